#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clforge/equation.hpp"
#include "clforge/selfadjoint.hpp"

namespace clf {

/// Point symmetry X = xi^t d/dt + xi^x d/dx + ... + eta d/du.
struct SymmetryGenerator {
  std::string name;
  std::array<Expr, 4> xi{};  // indexed by axis
  Expr eta;

  static SymmetryGenerator translation(Axis a);
};

/// W = eta - xi^j u_j.
Expr characteristic(const SymmetryGenerator& X);

/// Relations among the jets of v implied by a substitution, e.g. v_xx -> -omega^2 v.
/// Keys are left-hand multi-indices; rules apply to every jet they divide.
using VJetRules = std::map<MultiIndex, Expr>;
VJetRules vjet_rules(const Substitution& s, const std::vector<Axis>& axes);
Expr apply_vjet_rules(const Expr& e, const VJetRules& rules);

/// Div C = sum_a M_a D^a F. The characteristic sum_a (-1)^|a| D^a M_a is
/// unchanged by equivalence transformations of the vector.
struct Multiplier {
  std::map<MultiIndex, Expr> terms;
  Expr characteristic;
  Expr residual;  // nonzero when Div C is not in the span of the D^a F

  bool exists() const { return residual.is_zero(); }
  /// True when only the a = 0 term is present (Div C = mu F).
  bool pure() const;
  Expr mu() const;
};

struct ConservedVector {
  std::string label;
  std::vector<Axis> axes;  // t followed by the spatial axes
  std::vector<Expr> components;
  std::optional<Substitution> substitution;
  VJetRules rules;
  bool v_form = false;  // components still carry jets of v
  std::string generator;
  std::vector<std::string> trail;
  std::optional<Expr> mu;

  const Expr& component(Axis a) const;
  Expr& component(Axis a);
};

/// Simplifies with the v-jet rules, constrained-symbol constraints and relations.
Expr simplify_for(const ConservedVector& cv, const DifferentialEquation& eq, const Expr& e);

/// Total divergence D_t C^1 + D_x C^2 + ... in simplified form.
Expr divergence(const ConservedVector& cv, const DifferentialEquation& eq);

/// Builds C^i = W [dL/du_i - D_j dL/du_ij] + D_j(W) dL/du_ij with L = vF,
/// keeping v symbolic and recording the substitution.
ConservedVector conserved_vector(const DifferentialEquation& eq, const SymmetryGenerator& X, const Substitution& s);

/// Same formula with v left free (no substitution).
ConservedVector conserved_vector(const DifferentialEquation& eq, const SymmetryGenerator& X);

Multiplier compute_multiplier(const ConservedVector& cv, const DifferentialEquation& eq);

class DivergenceFailure : public std::runtime_error {
 public:
  DivergenceFailure(const std::string& what, Expr residual);
  const Expr& residual() const { return residual_; }

 private:
  Expr residual_;
};

/// mu with Div C - mu F = 0; throws DivergenceFailure when no such function exists.
Expr divergence_residual(const ConservedVector& cv, const DifferentialEquation& eq);

enum class FoldPolicy { Auto, Always, Never };

/// Equivalence reduction: density freed of u-derivatives by transfers to the
/// fluxes, t-derivatives eliminated via the solved form, then flux passes in
/// axis order. First-order antiderivative folds in the fluxes run when the
/// equation carries antiderivative symbols (Auto) or as forced by the policy.
ConservedVector reduce_vector(const ConservedVector& cv, const DifferentialEquation& eq,
                              FoldPolicy policy = FoldPolicy::Auto);

/// True when Div C vanishes identically (without using F = 0).
bool is_trivial(const ConservedVector& cv, const DifferentialEquation& eq);

/// Replaces v and its jets by the substitution.
ConservedVector eliminate_v(const ConservedVector& cv);

/// Members of the families, one per family parameter, with zero and trivial
/// members dropped, the common equation-parameter factor divided out, and a
/// rationally independent subset kept in order.
std::vector<ConservedVector> nontrivial_basis(const std::vector<ConservedVector>& families,
                                              const DifferentialEquation& eq);

/// Rank over the rationals of the coefficient matrix of the vectors.
int coefficient_rank(const std::vector<ConservedVector>& vectors);

/// Relabels axes (with the paired function symbols) and reorders components.
/// The substitution is kept as is; the caller guarantees the equation and
/// the substitution family are symmetric under the permutation.
ConservedVector permute_axes(const ConservedVector& cv, const AxisPermutation& p);

/// Components equal up to one common rational factor; returns that factor.
std::optional<Rational> proportional(const ConservedVector& a, const ConservedVector& b);

/// Translations X1 = d/dt, X2 = d/dx, ... over the equation's axes.
std::vector<SymmetryGenerator> translations(const DifferentialEquation& eq);
/// "X3" or "all"; comma-separated lists allowed.
std::vector<SymmetryGenerator> parse_generators(const std::string& spec, const DifferentialEquation& eq);

struct ConservationStudy {
  Substitution substitution;
  DifferentialEquation bound;  // equation with the substitution's bindings
  std::vector<ConservedVector> raw;
  std::vector<ConservedVector> reduced;
  std::vector<ConservedVector> basis;
  int rank = 0;
};

/// Self-adjointness, vectors per generator, reduction and the nontrivial basis.
ConservationStudy conservation_study(const DifferentialEquation& eq, const std::vector<SymmetryGenerator>& generators,
                                     Ansatz ansatz = Ansatz::Auto, FoldPolicy policy = FoldPolicy::Auto);

}  // namespace clf
