#include "clforge/conslaw.hpp"

#include <algorithm>
#include <sstream>

#include "clforge/euler.hpp"
#include "clforge/format.hpp"

namespace clf {

namespace {

const Atom kU = Atom::jet('u');

MultiIndex unit(Axis a) { return plus(MultiIndex{}, a); }

MultiIndex minus(MultiIndex m, const MultiIndex& k) {
  for (int i = 0; i < 4; ++i) m[i] = static_cast<std::uint8_t>(m[i] - k[i]);
  return m;
}

std::string axis_name(Axis a) { return std::string(1, axis_char(a)); }

bool u_dependent(const Atom& a) { return a.is_u_jet() || a.depends_on_u(); }

}  // namespace

SymmetryGenerator SymmetryGenerator::translation(Axis a) {
  SymmetryGenerator X;
  X.name = "X" + std::to_string(axis_index(a) + 1);
  X.xi[axis_index(a)] = Expr(1);
  return X;
}

Expr characteristic(const SymmetryGenerator& X) {
  Expr W = X.eta;
  for (Axis a : kAllAxes) W -= X.xi[axis_index(a)] * Expr(Atom::jet('u', unit(a)));
  return W;
}

VJetRules vjet_rules(const Substitution& s, const std::vector<Axis>& axes) {
  std::vector<MultiIndex> candidates;
  for (int tc = 0; tc <= 1; ++tc) {
    std::vector<MultiIndex> level{MultiIndex{}};
    for (int ord = 0; ord <= 2; ++ord) {
      for (const MultiIndex& m : level) {
        MultiIndex c = m;
        c[0] = static_cast<std::uint8_t>(tc);
        if (std::find(candidates.begin(), candidates.end(), c) == candidates.end()) candidates.push_back(c);
      }
      std::vector<MultiIndex> next;
      for (const MultiIndex& m : level)
        for (Axis a : axes) {
          if (a == Axis::t) continue;
          MultiIndex n = plus(m, a);
          if (std::find(next.begin(), next.end(), n) == next.end()) next.push_back(n);
        }
      level = next;
    }
  }

  auto equation_param = [&](const Atom& a) { return a.kind == AtomKind::Param && !s.is_family_atom(a); };
  VJetRules rules;
  std::vector<std::pair<MultiIndex, Expr>> kept;
  for (const MultiIndex& m : candidates) {
    bool reducible = false;
    for (const auto& [k, rhs] : rules)
      if (dominates(m, k)) reducible = true;
    if (reducible) continue;
    const Expr d = s.apply_constraints(total_derivative(s.phi, m));
    if (d.is_zero()) {
      if (order(m) > 0) rules[m] = Expr();
      continue;
    }
    bool matched = false;
    for (const auto& [k, dk] : kept) {
      const auto& [m0, c0] = *dk.terms().begin();
      const auto [p0, rest0] = m0.split(equation_param);
      Expr target;
      for (const auto& [mm, cc] : d.terms()) {
        const auto [pm, restm] = mm.split(equation_param);
        if (restm == rest0) target.add_term(pm, cc / c0);
      }
      if (target.is_zero() || target.size() != 1) continue;
      const auto& [tm, tc] = *target.terms().begin();
      auto q = tm.divide(p0);
      if (!q) continue;
      const Expr ratio(*q, tc);
      if (d == ratio * dk) {
        rules[m] = ratio * Expr(Atom::jet('v', k));
        matched = true;
        break;
      }
    }
    if (!matched) kept.emplace_back(m, d);
  }
  return rules;
}

Expr apply_vjet_rules(const Expr& e, const VJetRules& rules) {
  if (rules.empty()) return e;
  Expr cur = e;
  for (int guard = 0; guard < 32; ++guard) {
    bool changed = false;
    Expr next = map_atoms(cur, [&](const Atom& a) -> std::optional<Expr> {
      if (!a.is_v_jet()) return std::nullopt;
      const MultiIndex m = a.multi();
      for (const auto& [k, rhs] : rules) {
        if (!dominates(m, k)) continue;
        changed = true;
        return total_derivative(rhs, minus(m, k));
      }
      return std::nullopt;
    });
    cur = next;
    if (!changed) return cur;
  }
  throw std::logic_error("v-jet rule application did not terminate");
}

const Expr& ConservedVector::component(Axis a) const {
  for (std::size_t i = 0; i < axes.size(); ++i)
    if (axes[i] == a) return components[i];
  throw std::out_of_range("vector has no component along " + axis_name(a));
}

Expr& ConservedVector::component(Axis a) {
  return const_cast<Expr&>(static_cast<const ConservedVector&>(*this).component(a));
}

Expr simplify_for(const ConservedVector& cv, const DifferentialEquation& eq, const Expr& e) {
  Expr r = apply_relations(e, eq.relations);
  r = apply_vjet_rules(r, cv.rules);
  if (cv.substitution) r = cv.substitution->apply_constraints(r);
  return r;
}

Expr divergence(const ConservedVector& cv, const DifferentialEquation& eq) {
  Expr d;
  for (std::size_t i = 0; i < cv.axes.size(); ++i) d += total_derivative(cv.components[i], cv.axes[i]);
  return simplify_for(cv, eq, d);
}

namespace {

ConservedVector build_vector(const DifferentialEquation& eq, const SymmetryGenerator& X) {
  ConservedVector cv;
  cv.axes = eq.axes();
  cv.generator = X.name;
  cv.v_form = true;
  const Expr W = characteristic(X);
  const Expr L = formal_lagrangian(eq);
  for (Axis i : cv.axes) {
    Expr inner = jet_partial(L, Atom::jet('u', unit(i)));
    Expr tail;
    for (Axis j : cv.axes) {
      const Rational w = i == j ? Rational(1) : Rational(1, 2);
      const Expr Lij = jet_partial(L, Atom::jet('u', plus(unit(i), j))).scaled(w);
      if (Lij.is_zero()) continue;
      inner -= total_derivative(Lij, j);
      tail += total_derivative(W, j) * Lij;
    }
    cv.components.push_back(W * inner + tail);
  }
  return cv;
}

}  // namespace

ConservedVector conserved_vector(const DifferentialEquation& eq, const SymmetryGenerator& X, const Substitution& s) {
  const DifferentialEquation eqb = bind_equation(eq, s);
  ConservedVector cv = build_vector(eqb, X);
  cv.substitution = s;
  cv.rules = vjet_rules(s, cv.axes);
  for (Expr& c : cv.components) c = simplify_for(cv, eqb, c);
  cv.label = X.name + " family";
  cv.trail.push_back("built from " + X.name + " with W = " + to_plain(characteristic(X)));
  const Multiplier m = compute_multiplier(cv, eqb);
  if (m.exists()) cv.mu = m.characteristic;
  return cv;
}

ConservedVector conserved_vector(const DifferentialEquation& eq, const SymmetryGenerator& X) {
  ConservedVector cv = build_vector(eq, X);
  cv.label = X.name;
  cv.trail.push_back("built from " + X.name + " with W = " + to_plain(characteristic(X)));
  const Multiplier m = compute_multiplier(cv, eq);
  if (m.exists()) cv.mu = m.characteristic;
  return cv;
}

bool Multiplier::pure() const {
  for (const auto& [k, v] : terms)
    if (order(k) > 0 && !v.is_zero()) return false;
  return true;
}

Expr Multiplier::mu() const { return characteristic; }

Multiplier compute_multiplier(const ConservedVector& cv, const DifferentialEquation& eq) {
  const auto cF = ut_coefficient(eq).as_rational();
  if (!cF || sgn(*cF) == 0) throw std::invalid_argument("multiplier needs a constant u_t coefficient");
  Multiplier out;
  Expr R = divergence(cv, eq);
  std::map<MultiIndex, Expr> Dcache;
  for (int guard = 0; guard < 4096; ++guard) {
    std::optional<Atom> J;
    for (const Atom& a : R.atoms()) {
      if (!a.is_u_jet() || a.t_count() == 0) continue;
      if (!J || a.t_count() > J->t_count() || (a.t_count() == J->t_count() && a.jet_order() > J->jet_order()))
        J = a;
    }
    if (!J) break;
    Expr coef;
    for (const auto& [m, c] : R.terms())
      if (m.degree(*J) > 0) coef.add_term(m.without(*J), c);
    coef = coef.scaled(1 / *cF);
    MultiIndex alpha = J->multi();
    alpha[0] -= 1;
    auto it = Dcache.find(alpha);
    if (it == Dcache.end()) it = Dcache.emplace(alpha, simplify_for(cv, eq, total_derivative(eq.F, alpha))).first;
    out.terms[alpha] += coef;
    R = simplify_for(cv, eq, R - coef * it->second);
  }
  out.residual = R;
  for (const auto& [alpha, M] : out.terms) {
    if (M.is_zero()) continue;
    Expr term = total_derivative(M, alpha);
    if (order(alpha) % 2) term = -term;
    out.characteristic += term;
  }
  out.characteristic = simplify_for(cv, eq, out.characteristic);
  for (auto it = out.terms.begin(); it != out.terms.end();) {
    if (it->second.is_zero()) {
      it = out.terms.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

DivergenceFailure::DivergenceFailure(const std::string& what, Expr residual)
    : std::runtime_error(what), residual_(std::move(residual)) {}

Expr divergence_residual(const ConservedVector& cv, const DifferentialEquation& eq) {
  const Multiplier m = compute_multiplier(cv, eq);
  if (!m.exists()) throw DivergenceFailure("divergence is not a combination of F and its derivatives", m.residual);
  const Expr rest = divergence(cv, eq) - simplify_for(cv, eq, m.characteristic * eq.F);
  if (!simplify_for(cv, eq, rest).is_zero())
    throw DivergenceFailure("no multiplier mu with Div C = mu F", simplify_for(cv, eq, rest));
  return m.characteristic;
}

namespace {

struct Reducer {
  ConservedVector cv;
  const DifferentialEquation& eq;
  bool fold_fluxes;

  Expr simp(const Expr& e) const { return simplify_for(cv, eq, e); }

  Expr clean_t(const Expr& e) const {
    Expr r = simp(e);
    if (eq.solved_ut) r = simp(eliminate_ut(r, eq));
    return r;
  }

  bool has_axis(Axis a) const { return std::find(cv.axes.begin(), cv.axes.end(), a) != cv.axes.end(); }

  // Moves D_j(P) out of C^i: C^i -= D_j P, C^j += D_i P.
  void transfer(Axis i, Axis j, const Expr& P, const std::string& why) {
    cv.component(i) = simp(cv.component(i) - total_derivative(P, j));
    cv.component(j) = simp(cv.component(j) + total_derivative(P, i));
    cv.trail.push_back(why + ": D_" + axis_name(j) + "(" + to_plain(P) + ") moved from C^" + axis_name(i) +
                       " to C^" + axis_name(j));
  }

  // A * u_jj with A free of u-derivatives; returns P = A * u_j.
  std::optional<std::pair<Axis, Expr>> second_order(const Expr& C, Axis own, bool any_axis) const {
    for (const auto& [m, c] : C.terms()) {
      for (const auto& [a, p] : m.factors()) {
        if (!a.is_u_jet() || a.jet_order() != 2 || p != 1) continue;
        const MultiIndex mi = a.multi();
        std::optional<Axis> j;
        for (Axis ax : kAllAxes)
          if (mi[axis_index(ax)] == 2) j = ax;
        if (!j || *j == Axis::t || !has_axis(*j)) continue;
        if (!any_axis && *j == own) continue;
        const Expr A = C.coefficient(a);
        if (A.any_atom([](const Atom& b) { return b.is_u_jet() && b.jet_order() > 0; })) continue;
        return std::make_pair(*j, A * Expr(Atom::jet('u', unit(*j))));
      }
    }
    return std::nullopt;
  }

  // K * Phi(u) * u_j with Phi in {1, u^n, f^(m)}; returns P = K * Psi(u).
  std::optional<std::pair<Axis, Expr>> first_order(const Expr& C, std::optional<Axis> own) const {
    for (const auto& [m, c] : C.terms()) {
      const auto [udep, K] = m.split(u_dependent);
      std::optional<Atom> jet;
      Monomial phi;
      bool ok = true;
      for (const auto& [a, p] : udep.factors()) {
        if (a.is_u_jet() && a.jet_order() == 1 && p == 1 && !jet) {
          jet = a;
        } else if (a.is_u_jet() && a.jet_order() == 0) {
          phi = phi * Monomial(a, p);
        } else if (a.kind == AtomKind::Func && a.func_order() >= 0 && p == 1) {
          phi = phi * Monomial(a, p);
        } else {
          ok = false;
        }
      }
      if (!ok || !jet || phi.factors().size() > 1) continue;
      Axis j = Axis::t;
      for (Axis ax : kAllAxes)
        if (jet->multi()[axis_index(ax)]) j = ax;
      if (j == Axis::t || !has_axis(j) || (own && j == *own)) continue;
      Expr psi;
      if (phi.is_one()) {
        psi = Expr(kU);
      } else if (phi.factors()[0].first.is_u_jet()) {
        const int n = phi.factors()[0].second;
        psi = Expr(Monomial(kU, n + 1), Rational(1, n + 1));
      } else {
        const Atom& f = phi.factors()[0].first;
        psi = Expr(Atom::func(f.name, f.func_order() - 1));
      }
      return std::make_pair(j, Expr(K, c) * psi);
    }
    return std::nullopt;
  }

  void density() {
    Expr& C1 = cv.component(Axis::t);
    if (eq.solved_ut) C1 = simp(eliminate_ut(C1, eq));
    for (int guard = 0; guard < 64; ++guard) {
      if (auto s = second_order(cv.component(Axis::t), Axis::t, true)) {
        transfer(Axis::t, s->first, s->second, "density");
        continue;
      }
      if (auto f = first_order(cv.component(Axis::t), std::nullopt)) {
        transfer(Axis::t, f->first, f->second, "density");
        continue;
      }
      return;
    }
  }

  void fluxes() {
    for (std::size_t k = 1; k < cv.axes.size(); ++k) cv.components[k] = clean_t(cv.components[k]);
    for (int sweep = 0; sweep < 4; ++sweep) {
      const std::size_t before = cv.trail.size();
      for (std::size_t k = 1; k < cv.axes.size(); ++k) {
        const Axis i = cv.axes[k];
        for (int guard = 0; guard < 64; ++guard) {
          if (auto s = second_order(cv.component(i), i, false)) {
            transfer(i, s->first, s->second, "flux");
            continue;
          }
          if (fold_fluxes) {
            if (auto f = first_order(cv.component(i), i)) {
              transfer(i, f->first, f->second, "flux fold");
              continue;
            }
          }
          break;
        }
      }
      for (std::size_t k = 1; k < cv.axes.size(); ++k) cv.components[k] = clean_t(cv.components[k]);
      if (cv.trail.size() == before) return;
    }
  }
};

bool has_antiderivative(const Expr& e) {
  return e.any_atom([](const Atom& a) { return a.kind == AtomKind::Func && a.func_order() < 0; });
}

}  // namespace

ConservedVector reduce_vector(const ConservedVector& cv, const DifferentialEquation& eq, FoldPolicy policy) {
  const DifferentialEquation eqb = cv.substitution ? bind_equation(eq, *cv.substitution) : eq;
  bool fold = policy == FoldPolicy::Always;
  if (policy == FoldPolicy::Auto) fold = has_antiderivative(eqb.F);
  Reducer r{cv, eqb, fold};
  r.density();
  r.fluxes();
  ConservedVector out = std::move(r.cv);
  out.label = cv.label.empty() ? "reduced" : cv.label + ", reduced";
  const Multiplier m = compute_multiplier(out, eqb);
  out.mu.reset();
  if (m.exists()) out.mu = m.characteristic;
  return out;
}

bool is_trivial(const ConservedVector& cv, const DifferentialEquation& eq) {
  const ConservedVector e = cv.v_form && cv.substitution ? eliminate_v(cv) : cv;
  const DifferentialEquation eqb = e.substitution ? bind_equation(eq, *e.substitution) : eq;
  return divergence(e, eqb).is_zero();
}

ConservedVector eliminate_v(const ConservedVector& cv) {
  if (!cv.substitution) throw std::invalid_argument("vector carries no substitution for v");
  ConservedVector out = cv;
  const Substitution& s = *cv.substitution;
  const std::map<Atom, Expr> b{{Atom::jet('v'), s.phi}};
  for (Expr& c : out.components) c = s.apply_constraints(substitute(c, b));
  if (out.mu) out.mu = s.apply_constraints(substitute(*out.mu, b));
  out.rules.clear();
  out.v_form = false;
  out.trail.push_back("v replaced by " + to_plain(s.phi));
  return out;
}

namespace {

struct Key {
  std::size_t component;
  Monomial m;
  auto operator<=>(const Key&) const = default;
};

std::map<Key, Rational> coefficient_row(const ConservedVector& cv) {
  std::map<Key, Rational> row;
  for (std::size_t i = 0; i < cv.components.size(); ++i)
    for (const auto& [m, c] : cv.components[i].terms()) row[{i, m}] = c;
  return row;
}

int rank_of(std::vector<std::map<Key, Rational>> rows) {
  int rank = 0;
  std::vector<std::pair<Key, std::map<Key, Rational>>> pivots;
  for (auto& row : rows) {
    for (const auto& [pk, prow] : pivots) {
      auto it = row.find(pk);
      if (it == row.end()) continue;
      const Rational f = it->second / prow.at(pk);
      for (const auto& [k, v] : prow) {
        Rational& x = row[k];
        x -= f * v;
        if (sgn(x) == 0) row.erase(k);
      }
    }
    if (row.empty()) continue;
    pivots.emplace_back(row.begin()->first, row);
    ++rank;
  }
  return rank;
}

}  // namespace

int coefficient_rank(const std::vector<ConservedVector>& vectors) {
  std::vector<std::map<Key, Rational>> rows;
  for (const auto& v : vectors) rows.push_back(coefficient_row(v));
  return rank_of(rows);
}

std::vector<ConservedVector> nontrivial_basis(const std::vector<ConservedVector>& families,
                                              const DifferentialEquation& eq) {
  std::vector<ConservedVector> basis;
  std::vector<std::map<Key, Rational>> rows;
  for (const ConservedVector& fam : families) {
    const ConservedVector e = fam.v_form && fam.substitution ? eliminate_v(fam) : fam;
    if (!e.substitution) {
      if (!is_trivial(e, eq)) basis.push_back(e);
      continue;
    }
    const Substitution& s = *e.substitution;
    const DifferentialEquation eqb = bind_equation(eq, s);
    for (const Atom& p : s.params) {
      ConservedVector member = e;
      member.substitution.reset();
      auto pick = [&](const Expr& c) -> Expr {
        if (p.kind == AtomKind::Param) return c.coefficient(p);
        Expr r;
        for (const auto& [m, k] : c.terms())
          if (std::any_of(m.factors().begin(), m.factors().end(),
                          [&](const auto& f) { return f.first.kind == AtomKind::Constrained && f.first.name == p.name; }))
            r.add_term(m, k);
        return r;
      };
      bool zero = true;
      for (Expr& c : member.components) {
        c = pick(c);
        if (!c.is_zero()) zero = false;
      }
      if (zero) continue;
      if (p.kind == AtomKind::Constrained) {
        member.substitution = s;
      } else if (!s.bindings.empty()) {
        Substitution keep;
        keep.bindings = s.bindings;
        keep.family = s.family;
        member.substitution = keep;
      }
      if (divergence(member, eqb).is_zero()) continue;
      auto eq_param = [&](const Atom& a) { return a.kind == AtomKind::Param && !s.is_family_atom(a); };
      Monomial common;
      bool first = true;
      for (const Expr& c : member.components) {
        if (c.is_zero()) continue;
        const Monomial cf = common_factor(c, eq_param);
        if (first) {
          common = cf;
          first = false;
        } else {
          Monomial g;
          for (const auto& [a, k] : common.factors()) {
            const int d = std::min(k, cf.degree(a));
            if (d > 0) g = g * Monomial(a, d);
          }
          common = g;
        }
      }
      for (Expr& c : member.components) c = divide_monomial(c, common);
      auto row = coefficient_row(member);
      rows.push_back(row);
      if (rank_of(rows) < static_cast<int>(rows.size())) {
        rows.pop_back();
        continue;
      }
      member.label = fam.label.empty() ? to_plain(Expr(p)) : fam.label + ": " + to_plain(Expr(p));
      member.trail.push_back("member for " + to_plain(Expr(p)) +
                             (common.is_one() ? "" : ", divided by " + to_plain(Expr(common, 1))));
      const Multiplier m = compute_multiplier(member, eqb);
      member.mu.reset();
      if (m.exists()) member.mu = m.characteristic;
      basis.push_back(std::move(member));
    }
  }
  return basis;
}

ConservedVector permute_axes(const ConservedVector& cv, const AxisPermutation& p) {
  ConservedVector out = cv;
  for (std::size_t i = 0; i < cv.axes.size(); ++i) {
    const Axis target = p(cv.axes[i]);
    std::size_t k = 0;
    while (k < cv.axes.size() && cv.axes[k] != target) ++k;
    if (k == cv.axes.size()) throw std::invalid_argument("permutation leaves the vector's axes");
    out.components[k] = permute(cv.components[i], p);
  }
  VJetRules rules;
  for (const auto& [k, rhs] : cv.rules) {
    const Atom a = permute_atom(Atom::jet('v', k), p);
    rules[a.multi()] = permute(rhs, p);
  }
  out.rules = rules;
  if (cv.mu) out.mu = permute(*cv.mu, p);
  std::string desc;
  for (Axis a : kSpatialAxes)
    if (p(a) != a && a < p(a)) desc += (desc.empty() ? "" : ", ") + axis_name(a) + "<->" + axis_name(p(a));
  for (const auto& [from, to] : p.func_swap)
    if (from < to) desc += ", " + from + "<->" + to;
  out.trail.push_back("permuted " + (desc.empty() ? std::string("identity") : desc));
  if (!p.is_identity()) out.label = cv.label + " (" + desc + ")";
  return out;
}

std::optional<Rational> proportional(const ConservedVector& a, const ConservedVector& b) {
  if (a.components.size() != b.components.size()) return std::nullopt;
  std::optional<Rational> ratio;
  for (std::size_t i = 0; i < a.components.size(); ++i) {
    const Expr& x = a.components[i];
    const Expr& y = b.components[i];
    if (x.is_zero() != y.is_zero()) return std::nullopt;
    if (x.is_zero()) continue;
    if (!ratio) ratio = x.terms().begin()->second / y.terms().begin()->second;
    if (!(x == y.scaled(*ratio))) return std::nullopt;
  }
  if (!ratio) ratio = Rational(1);
  return ratio;
}

std::vector<SymmetryGenerator> translations(const DifferentialEquation& eq) {
  std::vector<SymmetryGenerator> out;
  for (Axis a : eq.axes()) out.push_back(SymmetryGenerator::translation(a));
  return out;
}

std::vector<SymmetryGenerator> parse_generators(const std::string& spec, const DifferentialEquation& eq) {
  const std::vector<SymmetryGenerator> all = translations(eq);
  if (spec.empty() || spec == "all") return all;
  std::vector<SymmetryGenerator> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto it = std::find_if(all.begin(), all.end(), [&](const SymmetryGenerator& g) { return g.name == item; });
    if (it == all.end()) {
      std::string names;
      for (const auto& g : all) names += (names.empty() ? "" : ", ") + g.name;
      throw std::invalid_argument("unknown generator '" + item + "' (available: " + names + ")");
    }
    out.push_back(*it);
  }
  return out;
}

ConservationStudy conservation_study(const DifferentialEquation& eq, const std::vector<SymmetryGenerator>& generators,
                                     Ansatz ansatz, FoldPolicy policy) {
  ConservationStudy st;
  st.substitution = solve_substitution(determining_system(eq), ansatz);
  st.bound = bind_equation(eq, st.substitution);
  for (const SymmetryGenerator& X : generators) {
    st.raw.push_back(conserved_vector(eq, X, st.substitution));
    st.reduced.push_back(reduce_vector(st.raw.back(), eq, policy));
  }
  st.basis = nontrivial_basis(st.reduced, eq);
  st.rank = coefficient_rank(st.basis);
  return st;
}

}  // namespace clf
