#pragma once

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "clforge/expr.hpp"

namespace clf {

/// Monomials in the shifts (dt, dx, dy, dz) up to a weighted degree, with
/// weight 2 for t and 1 for each spatial variable.
class SeriesSpace {
 public:
  SeriesSpace(std::vector<Axis> axes, int max_weight);

  int max_weight() const { return max_weight_; }
  std::size_t size() const { return exps_.size(); }
  const MultiIndex& exponent(std::size_t i) const { return exps_[i]; }
  int weight(std::size_t i) const { return weights_[i]; }
  /// Index of a monomial, or -1 when it is truncated or uses an absent axis.
  int index(const MultiIndex& m) const;
  const std::vector<Axis>& axes() const { return axes_; }

  struct Pair {
    int a, b, out;
  };
  const std::vector<Pair>& products() const { return products_; }

 private:
  std::vector<Axis> axes_;
  int max_weight_;
  std::vector<MultiIndex> exps_;
  std::vector<int> weights_;
  std::map<MultiIndex, int> lookup_;
  std::vector<Pair> products_;
};

/// Truncated multivariate Taylor series about a base point.
class Series {
 public:
  explicit Series(std::shared_ptr<const SeriesSpace> space);
  static Series constant(std::shared_ptr<const SeriesSpace> space, double c);
  /// base + d(axis).
  static Series coordinate(std::shared_ptr<const SeriesSpace> space, Axis a, double base);

  double& operator[](std::size_t i) { return c_[i]; }
  double operator[](std::size_t i) const { return c_[i]; }
  double coefficient(const MultiIndex& m) const;
  const SeriesSpace& space() const { return *space_; }
  std::shared_ptr<const SeriesSpace> space_ptr() const { return space_; }

  Series& operator+=(const Series& o);
  Series& operator-=(const Series& o);
  Series scaled(double k) const;
  friend Series operator+(Series a, const Series& b) { return a += b; }
  friend Series operator-(Series a, const Series& b) { return a -= b; }
  friend Series operator*(const Series& a, const Series& b);

  Series derivative(Axis a) const;
  Series derivative(const MultiIndex& m) const;
  /// Antiderivative in t vanishing at dt = 0.
  Series integrate_t() const;

  /// g(s) for s = s0 + delta, from the derivatives g^(k)(s0), k = 0, 1, ...
  Series compose(const std::function<double(int)>& derivs) const;

 private:
  std::shared_ptr<const SeriesSpace> space_;
  std::vector<double> c_;
};

/// Evaluates a polynomial expression with atoms mapped to series.
Series eval_series(const Expr& e, const std::function<Series(const Atom&)>& atom_series,
                   std::shared_ptr<const SeriesSpace> space);

}  // namespace clf
