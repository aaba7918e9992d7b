#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "clforge/atom.hpp"

namespace clf {

using Rational = mpq_class;

/// Product of atom powers, kept sorted by atom with strictly positive exponents.
class Monomial {
 public:
  using Factor = std::pair<Atom, int>;

  Monomial() = default;
  explicit Monomial(const Atom& a, int power = 1);

  const std::vector<Factor>& factors() const { return factors_; }
  bool is_one() const { return factors_.empty(); }
  int degree(const Atom& a) const;
  int total_degree() const;

  Monomial operator*(const Monomial& other) const;
  /// Removes `power` copies of `a`; precondition degree(a) >= power.
  Monomial without(const Atom& a, int power = 1) const;
  /// Splits into (factors satisfying pred, the rest).
  std::pair<Monomial, Monomial> split(const std::function<bool(const Atom&)>& pred) const;
  /// Exact division; nullopt when `d` does not divide this monomial.
  std::optional<Monomial> divide(const Monomial& d) const;

  auto operator<=>(const Monomial&) const = default;
  bool operator==(const Monomial&) const = default;

 private:
  std::vector<Factor> factors_;
};

/// Canonical polynomial over atoms with exact rational coefficients.
///
/// Instances are always normalized: fully expanded, no zero coefficients,
/// monomials ordered by the atom order. Equality is therefore structural.
class Expr {
 public:
  using Terms = std::map<Monomial, Rational>;

  Expr() = default;
  Expr(long value);  // NOLINT(google-explicit-constructor)
  Expr(const Rational& value);  // NOLINT(google-explicit-constructor)
  Expr(const Atom& atom);  // NOLINT(google-explicit-constructor)
  Expr(const Monomial& m, const Rational& c);

  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  std::optional<Rational> as_rational() const;

  Expr operator-() const;
  Expr& operator+=(const Expr& o);
  Expr& operator-=(const Expr& o);
  Expr& operator*=(const Expr& o);
  friend Expr operator+(Expr a, const Expr& b) { return a += b; }
  friend Expr operator-(Expr a, const Expr& b) { return a -= b; }
  friend Expr operator*(const Expr& a, const Expr& b);
  friend bool operator==(const Expr& a, const Expr& b) { return a.terms_ == b.terms_; }

  Expr scaled(const Rational& c) const;
  Expr pow(unsigned n) const;
  void add_term(const Monomial& m, const Rational& c);

  std::set<Atom> atoms() const;
  bool any_atom(const std::function<bool(const Atom&)>& pred) const;
  int degree(const Atom& a) const;

  /// Groups terms by the part of each monomial made of atoms matching `pred`.
  /// The value for key K is the cofactor of K.
  std::map<Monomial, Expr> collect(const std::function<bool(const Atom&)>& pred) const;
  /// Coefficient of `a`^1 (terms of higher degree in `a` are ignored).
  Expr coefficient(const Atom& a, int power = 1) const;
  /// Terms that do not contain `a`.
  Expr without(const Atom& a) const;

 private:
  Terms terms_;
};

/// Idempotent by construction; kept as the named operation of the contract.
inline Expr normalize(const Expr& e) { return e; }
inline bool equivalent(const Expr& a, const Expr& b) { return (a - b).is_zero(); }

/// Replaces atoms by images (nullopt keeps the atom). Simultaneous.
Expr map_atoms(const Expr& e, const std::function<std::optional<Expr>(const Atom&)>& image);

/// Applies the derivation determined by its action on atoms (Leibniz rule).
Expr derive(const Expr& e, const std::function<Expr(const Atom&)>& d_atom);

/// Total derivative D_i extended to u, v, constrained symbols and phi.
Expr total_derivative(const Expr& e, Axis a);
Expr total_derivative(const Expr& e, const MultiIndex& m);

/// Formal partial derivative with respect to a jet-space coordinate.
/// For `u` itself the chain rule runs through f(u)-type atoms and phi;
/// for an independent variable it acts on the explicit dependence only.
Expr jet_partial(const Expr& e, const Atom& a);

/// Simultaneous substitution of atoms. Binding the plain `v` also binds every
/// v-jet to the corresponding total derivative of the image. Manual jet
/// bindings that contradict the auto-derived ones are rejected.
Expr substitute(const Expr& e, const std::map<Atom, Expr>& bindings);

/// Common factor made of atoms matching `pred` (minimum exponent per atom).
Monomial common_factor(const Expr& e, const std::function<bool(const Atom&)>& pred);
Expr divide_monomial(const Expr& e, const Monomial& m);

/// Reorders jet, coordinate and function-symbol data according to a permutation
/// of the spatial axes.
struct AxisPermutation {
  std::array<Axis, 4> map{Axis::t, Axis::x, Axis::y, Axis::z};
  std::map<std::string, std::string> func_swap;  // f <-> g etc.
  Axis operator()(Axis a) const { return map[axis_index(a)]; }
  static AxisPermutation swap(Axis a, Axis b);
  bool is_identity() const;
};
Atom permute_atom(const Atom& a, const AxisPermutation& p);
Expr permute(const Expr& e, const AxisPermutation& p);

/// Function symbol paired with each spatial axis by the anisotropic model.
std::string axis_function(Axis a);

}  // namespace clf
