#include "clforge/euler.hpp"

#include <set>

#include "clforge/format.hpp"

namespace clf {

Expr formal_lagrangian(const DifferentialEquation& eq) { return Expr(Atom::jet('v')) * eq.F; }

Expr variational_derivative(const Expr& e, char dep) {
  std::set<MultiIndex> jets;
  for (const Atom& a : e.atoms()) {
    if (!a.is_jet(dep)) continue;
    if (a.jet_order() > 2)
      throw OrderError("variational derivative is truncated at second order; found " + to_plain(a));
    if (a.jet_order() > 0) jets.insert(a.multi());
  }
  const Atom base = Atom::jet(dep);
  Expr r = jet_partial(e, base);
  for (const MultiIndex& m : jets) {
    const Expr partial = jet_partial(e, Atom::jet(dep, m));
    const Expr term = total_derivative(partial, m);
    if (order(m) % 2 == 1) {
      r -= term;
    } else {
      r += term;
    }
  }
  return r;
}

DifferentialEquation adjoint_equation(const DifferentialEquation& eq) {
  DifferentialEquation adj;
  adj.name = eq.name.empty() ? "adjoint" : "adjoint of " + eq.name;
  adj.F = apply_relations(variational_derivative(formal_lagrangian(eq)), eq.relations);
  adj.spatial = eq.spatial;
  adj.dependent = 'v';
  adj.relations = eq.relations;
  adj.symbols = eq.symbols;
  adj.convention = "F* = delta(v F)/delta u";
  return adj;
}

}  // namespace clf
