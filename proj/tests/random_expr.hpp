#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "clforge/evaluate.hpp"
#include "clforge/parse.hpp"

namespace clf::testing {

/// Small random polynomials over a fixed atom pool.
class ExprGen {
 public:
  /// max_jet caps the order of u/v jets drawn into the pool.
  explicit ExprGen(std::uint64_t seed, int max_jet = 1, bool with_v = true) : rng_(seed) {
    std::vector<std::string> names{"x", "y", "t", "k", "u", "f(u)", "f1(u)", "g(u)", "F(u)", "sin(omega*x)",
                                   "cos(omega*x)", "exp(delta*y)", "u_x", "u_y", "u_t"};
    if (max_jet >= 2)
      for (const char* s : {"u_xx", "u_xy", "u_yy", "u_tx"}) names.emplace_back(s);
    if (with_v) {
      names.emplace_back("v");
      names.emplace_back("v_x");
      names.emplace_back("v_y");
    }
    for (const auto& n : names) pool_.push_back(parse(n));
  }

  Expr operator()() {
    std::uniform_int_distribution<int> nterms(1, 4), nfac(0, 3), coef(-5, 5), den(1, 3);
    std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
    Expr e;
    const int n = nterms(rng_);
    for (int i = 0; i < n; ++i) {
      int c = coef(rng_);
      if (c == 0) c = 1;
      Expr term(Rational(c, den(rng_)));
      const int m = nfac(rng_);
      for (int j = 0; j < m; ++j) term *= pool_[pick(rng_)];
      e += term;
    }
    return e;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::vector<Expr> pool_;
};

/// u(t,x,y) = 1 + 3/10 sin(a x + b y + c t) with exact jets.
struct SmoothField {
  double a = 1.1, b = 0.7, c = -0.4;

  double jet(const MultiIndex& m, double t, double x, double y) const {
    const int n = order(m);
    const double p = a * x + b * y + c * t;
    const double s = std::sin(p + n * M_PI / 2);
    const double scale = std::pow(c, m[0]) * std::pow(a, m[1]) * std::pow(b, m[2]);
    return (n == 0 ? 1.0 : 0.0) + 0.3 * scale * s;
  }

  /// Point with every atom of the pool assigned, u-jets up to order 3.
  JetPoint point(double t, double x, double y) const {
    JetPoint p;
    p.set_var(Axis::t, t);
    p.set_var(Axis::x, x);
    p.set_var(Axis::y, y);
    p.set_var(Axis::z, 0.0);
    p.set_param("k", 0.8);
    p.set_param("omega", 1.3);
    p.set_param("delta", 0.6);
    p.functions.emplace("f", FunctionModel::exponential(0.5, 1.2));
    p.functions.emplace("g", FunctionModel::power(2.0, 0.7));
    for (int nt = 0; nt <= 3; ++nt)
      for (int nx = 0; nx + nt <= 3; ++nx)
        for (int ny = 0; ny + nx + nt <= 3; ++ny) {
          MultiIndex m{static_cast<std::uint8_t>(nt), static_cast<std::uint8_t>(nx), static_cast<std::uint8_t>(ny), 0};
          p.set_jet('u', m, jet(m, t, x, y));
        }
    return p;
  }
};

}  // namespace clf::testing
