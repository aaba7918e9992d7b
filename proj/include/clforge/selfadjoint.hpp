#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clforge/equation.hpp"

namespace clf {

enum class SystemTag { Polynomial, OdeBranch, ConstrainedSymbol, Inconsistent };
std::string tag_name(SystemTag t);

/// Linear conditions on phi(t, x, y, z, u) from F*|_{v=phi} = lambda F.
struct DeterminingSystem {
  std::vector<Axis> axes;          // t and the spatial axes of the equation
  std::vector<Expr> constraints;   // each = 0; linear in the partials of phi
  bool phi_u_zero = false;         // phi_u = 0 was forced and eliminated
  Expr lambda;                     // multiplier in terms of phi partials
  SystemTag tag = SystemTag::Polynomial;
  std::map<Atom, Expr> relations;  // carried from the equation
};

DeterminingSystem determining_system(const DifferentialEquation& eq);

/// Constraint a_t + K a_ss = 0 on a constrained symbol a(t, s).
struct SymbolConstraint {
  std::string name;
  Axis space = Axis::y;
  Expr K;

  /// Rewrites a_{t^n s^m ...} to (-K)^n a_{s^(m + 2n) ...}.
  Expr rewrite(const Expr& e) const;
  /// Plain-text form "alpha_t(t,y) + k*alpha_yy(t,y) = 0".
  std::string describe() const;
};

enum class Ansatz { Auto, Poly, Trig, Exp, Constrained };
Ansatz ansatz_from_string(const std::string& s);
std::string ansatz_name(Ansatz a);

/// A substitution v = phi with free family parameters.
struct Substitution {
  Expr phi;
  /// Family markers: parameter atoms (a1, A1, ...) or constrained symbols (alpha, ...).
  std::vector<Atom> params;
  std::vector<SymbolConstraint> constraints;
  /// Equation-parameter specializations chosen by the ansatz, e.g. r -> omega^2.
  std::map<Atom, Expr> bindings;
  std::string family = "given";

  Expr apply_constraints(const Expr& e) const;
  /// True when the atom is a family marker (or a jet of one).
  bool is_family_atom(const Atom& a) const;
};

/// Wraps an explicit phi; constrained symbols in phi must be declared in `constraints`.
Substitution make_substitution(const Expr& phi, std::vector<SymbolConstraint> constraints = {});

class OutsideAnsatzError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InconsistentSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solves over polynomial, trigonometric, exponential and constrained-symbol
/// families. Unsupported shapes raise OutsideAnsatzError.
Substitution solve_substitution(const DeterminingSystem& sys, Ansatz ansatz = Ansatz::Auto);

class VerificationFailure : public std::runtime_error {
 public:
  VerificationFailure(const std::string& what, Expr residual, Expr lambda);
  const Expr& residual() const { return residual_; }
  const Expr& lambda() const { return lambda_; }

 private:
  Expr residual_;
  Expr lambda_;
};

/// Equation with the substitution's parameter bindings applied.
DifferentialEquation bind_equation(const DifferentialEquation& eq, const Substitution& s);

struct SelfAdjointCheck {
  Expr lambda;
  Expr residual;  // F*|_{v=phi} - lambda F after constraint rewriting
};
SelfAdjointCheck check_substitution(const DifferentialEquation& eq, const Substitution& s);

/// Returns lambda; throws VerificationFailure when the residual is nonzero.
Expr verify_substitution(const DifferentialEquation& eq, const Substitution& s);

}  // namespace clf
