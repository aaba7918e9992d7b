#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "clforge/expr.hpp"

namespace clf {

/// Numeric stand-in for an opaque function symbol f(u).
///
/// value(u, n) returns the n-th derivative; n = -1 is the antiderivative
/// normalized to vanish at u = 0 (at u = 1 for the power law u^-1 case).
class FunctionModel {
 public:
  enum class Kind { Constant, Power, Exponential, Polynomial, Table, Scaled };

  static FunctionModel constant(double c);
  /// c * u^n.
  static FunctionModel power(double n, double c = 1.0);
  /// c * exp(a u).
  static FunctionModel exponential(double a = 1.0, double c = 1.0);
  /// sum_i coef[i] u^i.
  static FunctionModel polynomial(std::vector<double> coef);
  /// Piecewise-linear interpolation of (u, f) samples; derivative orders 0 and 1 only.
  static FunctionModel table(std::vector<double> u, std::vector<double> f);
  /// scale * base^(n + shift); models q with q' = r f as scaled(f, r, -1).
  static FunctionModel scaled(const FunctionModel& base, double scale, int shift);
  static FunctionModel from_json(const nlohmann::json& j);

  double value(double u, int n = 0) const;
  Kind kind() const { return kind_; }
  nlohmann::json to_json() const;

 private:
  Kind kind_ = Kind::Constant;
  double a_ = 0.0;  // constant value, exponent, or rate
  double c_ = 1.0;
  std::vector<double> xs_, ys_;
  std::shared_ptr<const FunctionModel> base_;
  int shift_ = 0;
};

/// Numeric model of a constrained symbol satisfying a_t + K a_ss = 0:
/// a(t, s) = exp(K c^2 t) cos(c s + theta).
struct ConstrainedModel {
  double K = 1.0;
  double c = 1.0;
  double theta = 0.0;
  Axis space = Axis::y;

  /// Derivative with `nt` t-derivatives and `ns` s-derivatives at (t, s).
  double value(double t, double s, int nt, int ns) const;
};

class MissingAssignment : public std::runtime_error {
 public:
  explicit MissingAssignment(const Atom& a);
  const Atom& atom() const { return atom_; }

 private:
  Atom atom_;
};

/// Numeric values for the atoms of an expression.
struct JetPoint {
  std::map<Atom, double> values;  // coordinates, parameters, jets, phi partials
  std::map<std::string, FunctionModel> functions;
  std::map<std::string, ConstrainedModel> constrained;

  void set(const Atom& a, double x) { values[a] = x; }
  void set_var(Axis a, double x) { values[Atom::var(a)] = x; }
  void set_param(const std::string& p, double x) { values[Atom::param(p)] = x; }
  void set_jet(char dep, const MultiIndex& m, double x) { values[Atom::jet(dep, m)] = x; }

  /// Value of a single atom; throws MissingAssignment.
  double atom_value(const Atom& a) const;
};

double evaluate(const Expr& e, const JetPoint& p);

/// Flattened expression for repeated evaluation with atom values supplied in slots.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  /// `slots` assigns a position to every atom of `e`.
  CompiledExpr(const Expr& e, const std::map<Atom, int>& slots);

  double operator()(const double* slot_values) const;
  bool is_zero() const { return terms_.empty(); }

 private:
  struct Term {
    double coef;
    std::vector<std::pair<int, int>> factors;  // (slot, power)
  };
  std::vector<Term> terms_;
};

/// Assigns consecutive slots to the union of atoms of the given expressions.
std::map<Atom, int> slot_map(const std::vector<Expr>& exprs);

}  // namespace clf
