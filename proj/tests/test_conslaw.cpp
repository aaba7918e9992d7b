#include <gtest/gtest.h>

#include "clforge/conslaw.hpp"
#include "clforge/format.hpp"

#include "reference_vectors.hpp"

using namespace clf;
using clf::testing::find_member;
using clf::testing::make_vector;

namespace {

DifferentialEquation eqf(const std::string& name) {
  return load_equation(std::string(CLFORGE_DATA_DIR) + "/equations/" + name + ".eq");
}

ConservedVector vec(std::vector<std::string> comps, const SymbolTable& st = SymbolTable::standard()) {
  return make_vector({"", std::move(comps)}, st);
}

void expect_components(const ConservedVector& cv, const std::vector<std::string>& want, const SymbolTable& st) {
  ASSERT_EQ(cv.components.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i)
    EXPECT_EQ(cv.components[i], parse(want[i], st)) << "component " << i << ": " << to_plain(cv.components[i]);
}

struct Aniso : ::testing::Test {
  DifferentialEquation eq = eqf("anisotropic3d");
  Substitution s = solve_substitution(determining_system(eq));
  ConservedVector raw(Axis a) { return conserved_vector(eq, SymmetryGenerator::translation(a), s); }
};

}  // namespace

TEST(Characteristic, Translations) {
  EXPECT_EQ(characteristic(SymmetryGenerator::translation(Axis::x)), parse("-u_x"));
  EXPECT_EQ(characteristic(SymmetryGenerator::translation(Axis::t)), parse("-u_t"));
  SymmetryGenerator scaling;
  scaling.eta = parse("u");
  EXPECT_EQ(characteristic(scaling), parse("u"));
}

TEST_F(Aniso, RawVectorForX) {
  auto cv = raw(Axis::x);
  EXPECT_TRUE(cv.v_form);
  expect_components(cv,
                    {"v*u_x", "-f1(u)*v*u_x^2 + f(u)*u_x*v_x - f(u)*v*u_xx",
                     "-g1(u)*v*u_x*u_y + g(u)*u_x*v_y - g(u)*v*u_xy", "-h1(u)*v*u_x*u_z + h(u)*u_x*v_z - h(u)*v*u_xz"},
                    eq.symbols);
}

TEST_F(Aniso, ReducedVectorForX) {
  auto cv = reduce_vector(raw(Axis::x), eq);
  expect_components(cv,
                    {"-u*v_x", "f(u)*u_x*v_x - g(u)*u_y*v_y - h(u)*u_z*v_z", "g(u)*(u_x*v_y + u_y*v_x)",
                     "h(u)*(u_x*v_z + u_z*v_x)"},
                    eq.symbols);
  EXPECT_FALSE(cv.trail.empty());
}

TEST_F(Aniso, TimeTranslationDensity) {
  auto cv = raw(Axis::t);
  EXPECT_EQ(eliminate_ut(cv.components[0], eq),
            parse("v*(Dx(f(u)*Dx(u)) + Dy(g(u)*Dy(u)) + Dz(h(u)*Dz(u)))"));
}

TEST_F(Aniso, TimeTranslationReducesToZero) {
  auto cv = reduce_vector(raw(Axis::t), eq);
  for (const Expr& c : cv.components) EXPECT_TRUE(c.is_zero()) << to_plain(c);
  EXPECT_TRUE(is_trivial(cv, eq));
}

TEST_F(Aniso, MultiplierOfReducedFamilies) {
  auto x = reduce_vector(raw(Axis::x), eq);
  EXPECT_EQ(divergence_residual(x, eq), parse("v_x"));
  EXPECT_EQ(divergence_residual(eliminate_v(x), eq), parse("a1*y*z + a2*y + a3*z + a5"));

  auto y = reduce_vector(raw(Axis::y), eq);
  EXPECT_EQ(divergence_residual(eliminate_v(y), eq), parse("a1*x*z + a2*x + a4*z + a6"));
}

TEST_F(Aniso, ReductionKeepsCharacteristic) {
  for (Axis a : {Axis::t, Axis::x, Axis::y, Axis::z}) {
    auto r = raw(a);
    auto m_raw = compute_multiplier(r, eq);
    auto m_red = compute_multiplier(reduce_vector(r, eq), eq);
    ASSERT_TRUE(m_raw.exists());
    ASSERT_TRUE(m_red.exists());
    EXPECT_TRUE(m_red.pure());
    EXPECT_EQ(m_raw.characteristic, m_red.characteristic) << axis_char(a);
  }
}

TEST_F(Aniso, PermutationMapsXFamilyToY) {
  auto x = reduce_vector(raw(Axis::x), eq);
  auto p = permute_axes(x, AxisPermutation::swap(Axis::x, Axis::y));
  expect_components(p,
                    {"-u*v_y", "f(u)*(u_y*v_x + u_x*v_y)", "g(u)*u_y*v_y - f(u)*u_x*v_x - h(u)*u_z*v_z",
                     "h(u)*(u_y*v_z + u_z*v_y)"},
                    eq.symbols);
  auto direct = reduce_vector(raw(Axis::y), eq);
  EXPECT_EQ(p.components, direct.components);
}

TEST_F(Aniso, PermutationToZKeepsMultiplier) {
  auto x = reduce_vector(raw(Axis::x), eq);
  auto p = permute_axes(x, AxisPermutation::swap(Axis::x, Axis::z));
  EXPECT_EQ(divergence_residual(p, eq), parse("v_z"));
  EXPECT_EQ(p.components, reduce_vector(raw(Axis::z), eq).components);
}

TEST_F(Aniso, IdentityPermutation) {
  auto x = reduce_vector(raw(Axis::x), eq);
  EXPECT_EQ(permute_axes(x, AxisPermutation{}).components, x.components);
}

TEST_F(Aniso, XFamilyBasis) {
  auto basis = nontrivial_basis({eliminate_v(reduce_vector(raw(Axis::x), eq))}, eq);
  ASSERT_EQ(basis.size(), 4u);
  const auto& ref = clf::testing::translation_vectors_3d();
  for (int i : {0, 1, 2, 3}) EXPECT_GE(find_member(basis, make_vector(ref[i])), 0) << ref[i].name;
}

TEST_F(Aniso, TenVectorBasis) {
  std::vector<ConservedVector> fams;
  for (Axis a : {Axis::t, Axis::x, Axis::y, Axis::z}) fams.push_back(eliminate_v(reduce_vector(raw(a), eq)));
  auto basis = nontrivial_basis(fams, eq);
  ASSERT_EQ(basis.size(), 10u);
  EXPECT_EQ(coefficient_rank(basis), 10);
  for (const auto& r : clf::testing::translation_vectors_3d())
    EXPECT_GE(find_member(basis, make_vector(r)), 0) << r.name;
}

TEST(Trivial, Examples) {
  auto eq = eqf("anisotropic3d");
  EXPECT_TRUE(is_trivial(vec({"0", "-g(u)*u_y", "g(u)*u_x", "0"}), eq));
  EXPECT_FALSE(is_trivial(vec({"-u", "f(u)*u_x", "g(u)*u_y", "h(u)*u_z"}), eq));
  EXPECT_TRUE(is_trivial(vec({"0", "0", "0", "0"}), eq));
}

TEST(Trivial, VectorWithLinearVIsTrivial) {
  auto eq = eqf("anisotropic3d");
  auto s = solve_substitution(determining_system(eq));
  auto x = eliminate_v(reduce_vector(conserved_vector(eq, SymmetryGenerator::translation(Axis::x), s), eq));
  std::map<Atom, Expr> only_a6;
  for (const char* a : {"a1", "a2", "a3", "a4", "a5", "a7", "a8"}) only_a6[Atom::param(a)] = Expr(0);
  only_a6[Atom::param("a6")] = Expr(1);
  ConservedVector cv = x;
  for (Expr& c : cv.components) c = substitute(c, only_a6);
  EXPECT_EQ(cv.components[1], parse("-g(u)*u_y"));
  EXPECT_EQ(cv.components[2], parse("g(u)*u_x"));
  EXPECT_TRUE(is_trivial(cv, eq));
}

TEST(Divergence, MassVectorGivesTheEquation) {
  auto eq = eqf("anisotropic3d");
  auto cv = make_vector(clf::testing::translation_vectors_3d()[0]);
  EXPECT_EQ(divergence(cv, eq), eq.F);
  EXPECT_EQ(divergence_residual(cv, eq), Expr(1));
}

TEST(Divergence, CorruptedVectorHasNoMultiplier) {
  auto eq = eqf("anisotropic3d");
  auto cv = vec({"-u", "f(u)*u_x", "-g(u)*u_y", "h(u)*u_z"});
  EXPECT_THROW(divergence_residual(cv, eq), DivergenceFailure);
}

struct Omega : ::testing::Test {
  DifferentialEquation eq = eqf("source2d_omega");
  Substitution s = solve_substitution(determining_system(eq));
  ConservedVector raw() { return conserved_vector(eq, SymmetryGenerator::translation(Axis::x), s); }
};

TEST_F(Omega, RawVector) {
  expect_components(raw(),
                    {"v*u_x", "-f1(u)*v*u_x^2 + f(u)*u_x*v_x - f(u)*v*u_xx", "-g1(u)*v*u_x*u_y + g(u)*u_x*v_y - g(u)*v*u_xy"},
                    eq.symbols);
}

TEST_F(Omega, ReducedVector) {
  auto cv = reduce_vector(raw(), eq);
  expect_components(cv, {"-u*v_x", "f(u)*u_x*v_x + omega^2*F(u)*v", "g(u)*u_y*v_x - G(u)*v_xy"}, eq.symbols);
  EXPECT_EQ(divergence_residual(cv, eq), parse("v_x"));
}

TEST_F(Omega, FourVectorBasis) {
  auto basis = nontrivial_basis({eliminate_v(reduce_vector(raw(), eq))}, eq);
  ASSERT_EQ(basis.size(), 4u);
  EXPECT_EQ(coefficient_rank(basis), 4);
  for (const auto& r : clf::testing::omega_vectors())
    EXPECT_GE(find_member(basis, make_vector(r, eq.symbols), {Rational(1), Rational(-1)}), 0) << r.name;
}

TEST_F(Omega, ConservationFormMultiplier) {
  auto sinv = make_vector(clf::testing::omega_vectors()[0], eq.symbols);
  EXPECT_EQ(divergence_residual(sinv, eq), parse("-sin(omega*x)", eq.symbols));
  // D_t[sin u] - D_x[sin f u_x + omega cos F] - D_y[sin g u_y] as printed
  auto literal = vec({"sin(omega*x)*u", "-sin(omega*x)*f(u)*u_x - omega*cos(omega*x)*F(u)", "-sin(omega*x)*g(u)*u_y"},
                     eq.symbols);
  EXPECT_THROW(divergence_residual(literal, eq), DivergenceFailure);
}

TEST(DeltaSource, FourVectorBasis) {
  auto eq = eqf("source2d_delta");
  auto s = solve_substitution(determining_system(eq));
  auto fam = eliminate_v(reduce_vector(conserved_vector(eq, SymmetryGenerator::translation(Axis::x), s), eq));
  auto basis = nontrivial_basis({fam}, eq);
  ASSERT_EQ(basis.size(), 4u);
  for (const auto& b : basis) EXPECT_NO_THROW(divergence_residual(b, eq)) << b.label;
  auto lead = make_vector({"", {"exp(delta*x)*u", "-exp(delta*x)*f(u)*u_x + delta*exp(delta*x)*F(u)", "-exp(delta*x)*g(u)*u_y"}},
                          eq.symbols);
  EXPECT_GE(find_member(basis, lead, {Rational(1), Rational(-1)}), 0);
}

TEST(ConstantG, ConstrainedBasisConserves) {
  auto eq = eqf("constant_g3d");
  auto study = conservation_study(eq, translations(eq));
  EXPECT_FALSE(study.basis.empty());
  for (const auto& b : study.basis) EXPECT_NO_THROW(divergence_residual(b, study.bound)) << b.label;
}

TEST(Generators, Parsing) {
  auto eq = eqf("source2d");
  EXPECT_EQ(parse_generators("all", eq).size(), 3u);
  auto two = parse_generators("X1,X3", eq);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(characteristic(two[1]), parse("-u_y"));
  EXPECT_ANY_THROW(parse_generators("X4", eq));
}

TEST(Study, TranslationsOf3D) {
  auto eq = eqf("anisotropic3d");
  auto st = conservation_study(eq, translations(eq));
  EXPECT_EQ(st.raw.size(), 4u);
  EXPECT_EQ(st.basis.size(), 10u);
  EXPECT_EQ(st.rank, 10);
}

TEST(Study, TimeTranslationAloneIsTrivial) {
  auto eq = eqf("anisotropic3d");
  auto st = conservation_study(eq, parse_generators("X1", eq));
  EXPECT_TRUE(st.basis.empty());
}
