#include <gtest/gtest.h>

#include "clforge/euler.hpp"
#include "clforge/format.hpp"

using namespace clf;

namespace {

DifferentialEquation eqf(const std::string& name) {
  return load_equation(std::string(CLFORGE_DATA_DIR) + "/equations/" + name + ".eq");
}

}  // namespace

TEST(FormalLagrangian, Anisotropic3D) {
  auto eq = eqf("anisotropic3d");
  EXPECT_EQ(formal_lagrangian(eq),
            parse("v*(f(u)*u_xx + g(u)*u_yy + h(u)*u_zz + f1(u)*u_x^2 + g1(u)*u_y^2 + h1(u)*u_z^2 - u_t)"));
}

TEST(FormalLagrangian, PureEvolution) {
  auto eq = make_equation(parse("-u_t"), {Axis::x});
  EXPECT_EQ(formal_lagrangian(eq), parse("-v*u_t"));
}

TEST(FormalLagrangian, OmegaSource) {
  auto eq = eqf("source2d_omega");
  EXPECT_EQ(formal_lagrangian(eq),
            parse("v*(f(u)*u_xx + g(u)*u_yy + f1(u)*u_x^2 + g1(u)*u_y^2 + omega^2*F(u) - u_t)", eq.symbols));
}

TEST(VariationalDerivative, Basics) {
  EXPECT_EQ(variational_derivative(parse("v*u")), parse("v"));
  EXPECT_EQ(variational_derivative(parse("v*u_xx")), parse("v_xx"));
  EXPECT_EQ(variational_derivative(parse("v*u_x")), parse("-v_x"));
  EXPECT_EQ(variational_derivative(parse("u_x^2")), parse("-2*u_xx"));
  EXPECT_EQ(variational_derivative(parse("v*u_xy")), parse("v_xy"));
}

TEST(VariationalDerivative, ByDependentName) {
  EXPECT_EQ(variational_derivative(parse("v*u_t"), 'v'), parse("u_t"));
}

TEST(Adjoint, Anisotropic3D) {
  EXPECT_EQ(adjoint_equation(eqf("anisotropic3d")).F, parse("v_t + f(u)*v_xx + g(u)*v_yy + h(u)*v_zz"));
}

TEST(Adjoint, SourceTerm) {
  EXPECT_EQ(adjoint_equation(eqf("source2d")).F, parse("v_t + f(u)*v_xx + g(u)*v_yy + q1(u)*v"));
}

TEST(Adjoint, LinkedSourceUsesRelation) {
  auto eq = eqf("source2d_linked");
  EXPECT_EQ(adjoint_equation(eq).F, parse("v_t + f(u)*v_xx + g(u)*v_yy + r*f(u)*v", eq.symbols));
}

TEST(Adjoint, LinearHeat) {
  auto eq = eqf("linear_heat");
  EXPECT_EQ(adjoint_equation(eq).F, parse("v_t + k*v_yy", eq.symbols));
}

TEST(Adjoint, EvolutionTermFlipsSign) {
  auto eq = make_equation(parse("u_t"), {Axis::x});
  EXPECT_EQ(adjoint_equation(eq).F, parse("-v_t"));
}

TEST(Adjoint, RejectsThirdOrder) {
  EXPECT_ANY_THROW(make_equation(parse("u_t - u_xxx"), {Axis::x}));
}
