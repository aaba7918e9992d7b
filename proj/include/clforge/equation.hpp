#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clforge/expr.hpp"
#include "clforge/parse.hpp"

namespace clf {

/// A second-order scalar equation F = 0 for u(t, x, ...).
struct DifferentialEquation {
  std::string name;
  Expr F;
  std::vector<Axis> spatial{Axis::x, Axis::y, Axis::z};
  char dependent = 'u';
  int max_order = 2;
  /// Right-hand side of the solved form u_t = rhs, when F is linear in u_t
  /// with a constant coefficient.
  std::optional<Expr> solved_ut;
  /// Declared function-symbol links, e.g. q1 -> r*f. Keys are Func atoms.
  std::map<Atom, Expr> relations;
  SymbolTable symbols = SymbolTable::standard();
  /// How F was obtained from the written equation.
  std::string convention = "F as given";

  std::vector<Axis> axes() const;  // t followed by the spatial axes
  int dims() const { return static_cast<int>(spatial.size()); }
  bool has_axis(Axis a) const;
};

/// Constructs an equation from F, deriving the solved form and validating
/// that F is free of v and of jets above second order.
DifferentialEquation make_equation(const Expr& F, std::vector<Axis> spatial = {Axis::x, Axis::y, Axis::z},
                                   std::map<Atom, Expr> relations = {}, std::string name = {});

/// Rewrites every derivative of a related function symbol: with q1 -> r*f,
/// q2 -> r*f1 and so on.
Expr apply_relations(const Expr& e, const std::map<Atom, Expr>& relations);

/// Replaces every jet of u with a t-derivative by the corresponding total
/// derivative of the solved form.
Expr eliminate_ut(const Expr& e, const DifferentialEquation& eq);

/// Coefficient of u_t in F (a constant for every solvable equation).
Expr ut_coefficient(const DifferentialEquation& eq);

class EquationFileError : public std::runtime_error {
 public:
  EquationFileError(const std::string& what, int line);
  int line() const { return line_; }

 private:
  int line_;
};

/// Reads the equation file format:
///
///   # comment
///   name: 2D source, q' = r f
///   vars: t x y
///   params: r
///   constrained: alpha(t,y) beta(t,y)
///   relation: q1 = r*f
///   equation: Dt(u) = Dx(f(u)*Dx(u)) + Dy(g(u)*Dy(u)) + q(u)
///
/// "LHS = RHS" stores F = RHS - LHS; "LHS = 0" or a bare expression stores F = LHS.
DifferentialEquation parse_equation_file(const std::string& text);
DifferentialEquation load_equation(const std::string& path);

}  // namespace clf
