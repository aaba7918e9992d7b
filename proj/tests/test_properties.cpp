#include <cmath>

#include <gtest/gtest.h>

#include "clforge/euler.hpp"
#include "clforge/evaluate.hpp"
#include "clforge/format.hpp"

#include "random_expr.hpp"

using namespace clf;
using clf::testing::ExprGen;
using clf::testing::SmoothField;

constexpr int kCases = 200;

TEST(Property, TotalDerivativesCommute) {
  ExprGen gen(101, 2);
  for (int i = 0; i < kCases; ++i) {
    Expr e = gen();
    EXPECT_EQ(total_derivative(total_derivative(e, Axis::x), Axis::y),
              total_derivative(total_derivative(e, Axis::y), Axis::x))
        << to_plain(e);
    EXPECT_EQ(total_derivative(total_derivative(e, Axis::t), Axis::x),
              total_derivative(total_derivative(e, Axis::x), Axis::t))
        << to_plain(e);
  }
}

TEST(Property, Leibniz) {
  ExprGen gen(102, 2);
  for (int i = 0; i < kCases; ++i) {
    Expr a = gen(), b = gen();
    for (Axis ax : {Axis::t, Axis::x, Axis::y})
      EXPECT_EQ(total_derivative(a * b, ax), total_derivative(a, ax) * b + a * total_derivative(b, ax))
          << to_plain(a) << " | " << to_plain(b);
  }
}

TEST(Property, TotalDerivativeMatchesFiniteDifference) {
  ExprGen gen(103, 2, false);
  SmoothField u;
  const double h = 1e-4;
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int i = 0; i < kCases; ++i) {
    Expr e = gen();
    const double t = coord(gen.rng()), x = coord(gen.rng()), y = coord(gen.rng());
    const double exact = evaluate(total_derivative(e, Axis::x), u.point(t, x, y));
    const double fd = (evaluate(e, u.point(t, x + h, y)) - evaluate(e, u.point(t, x - h, y))) / (2 * h);
    EXPECT_NEAR(exact, fd, 1e-5 * std::max(1.0, std::abs(exact))) << to_plain(e);
  }
}

TEST(Property, NormalizeIsIdempotent) {
  ExprGen gen(104, 2);
  for (int i = 0; i < kCases; ++i) {
    Expr e = gen() * gen() + gen();
    EXPECT_EQ(normalize(normalize(e)), normalize(e));
    for (const auto& [m, c] : e.terms()) EXPECT_NE(c, 0);
  }
}

TEST(Property, EquivalenceIsAnEquivalenceRelation) {
  ExprGen gen(105, 2);
  for (int i = 0; i < kCases; ++i) {
    Expr a = gen(), b = gen();
    // same value built two ways
    Expr a2 = (a + b) - b;
    Expr a3 = a * Expr(1) + Expr(0);
    EXPECT_TRUE(equivalent(a, a));
    EXPECT_EQ(equivalent(a, b), equivalent(b, a));
    EXPECT_TRUE(equivalent(a, a2));
    EXPECT_TRUE(equivalent(a2, a3));
    EXPECT_TRUE(equivalent(a, a3));
  }
}

TEST(Property, EulerOperatorAnnihilatesTotalDerivatives) {
  ExprGen gen(106, 1);
  for (int i = 0; i < kCases; ++i) {
    Expr e = gen();
    for (Axis ax : {Axis::t, Axis::x, Axis::y})
      EXPECT_TRUE(variational_derivative(total_derivative(e, ax)).is_zero()) << to_plain(e);
  }
}

TEST(Property, EulerOperatorIsLinear) {
  ExprGen gen(107, 2);
  for (int i = 0; i < kCases; ++i) {
    Expr a = gen(), b = gen();
    const Rational p(3, 7), q(-2, 5);
    EXPECT_EQ(variational_derivative(a.scaled(p) + b.scaled(q)),
              variational_derivative(a).scaled(p) + variational_derivative(b).scaled(q));
  }
}

TEST(Property, SubstitutionCommutesWithTotalDerivative) {
  ExprGen gen(108, 1);
  const Expr phi = parse("x*y + sin(omega*x)");
  for (int i = 0; i < kCases; ++i) {
    Expr e = gen();
    std::map<Atom, Expr> b{{Atom::jet('v'), phi}};
    EXPECT_EQ(substitute(total_derivative(e, Axis::x), b), total_derivative(substitute(e, b), Axis::x)) << to_plain(e);
  }
}
