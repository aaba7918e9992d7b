#include "clforge/selfadjoint.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "clforge/euler.hpp"
#include "clforge/format.hpp"

namespace clf {

std::string tag_name(SystemTag t) {
  switch (t) {
    case SystemTag::Polynomial: return "solvable-polynomial";
    case SystemTag::OdeBranch: return "ODE-branch";
    case SystemTag::ConstrainedSymbol: return "constrained-symbol";
    case SystemTag::Inconsistent: return "inconsistent";
  }
  return "?";
}

Ansatz ansatz_from_string(const std::string& s) {
  if (s == "auto") return Ansatz::Auto;
  if (s == "poly") return Ansatz::Poly;
  if (s == "trig") return Ansatz::Trig;
  if (s == "exp") return Ansatz::Exp;
  if (s == "constrained") return Ansatz::Constrained;
  throw std::invalid_argument("unknown ansatz '" + s + "' (expected poly, trig, exp, constrained or auto)");
}

std::string ansatz_name(Ansatz a) {
  switch (a) {
    case Ansatz::Auto: return "auto";
    case Ansatz::Poly: return "poly";
    case Ansatz::Trig: return "trig";
    case Ansatz::Exp: return "exp";
    case Ansatz::Constrained: return "constrained";
  }
  return "?";
}

namespace {

const Atom kUt = Atom::jet('u', {1, 0, 0, 0});

int unknown_order(const Atom& a) {
  int n = 0;
  for (auto i : a.idx) n += i;
  return n;
}

MultiIndex multi_of_unknown(const Atom& a) {
  return {static_cast<std::uint8_t>(a.idx[0]), static_cast<std::uint8_t>(a.idx[1]),
          static_cast<std::uint8_t>(a.idx[2]), static_cast<std::uint8_t>(a.idx[3])};
}

Expr normalize_constraint(const Expr& c) {
  if (c.is_zero()) return c;
  Expr r = divide_monomial(c, common_factor(c, [](const Atom& a) { return a.kind == AtomKind::Param; }));
  std::optional<std::pair<Atom, Rational>> best;
  for (const auto& [m, k] : r.terms()) {
    if (m.factors().size() != 1 || m.factors()[0].second != 1) continue;
    const Atom& a = m.factors()[0].first;
    if (a.kind != AtomKind::Unknown) continue;
    if (!best || unknown_order(a) > unknown_order(best->first) ||
        (unknown_order(a) == unknown_order(best->first) && best->first < a))
      best = std::make_pair(a, k);
  }
  if (best) return r.scaled(1 / best->second);
  const Rational lead = r.terms().rbegin()->second;
  return sgn(lead) < 0 ? -r : r;
}

std::optional<Atom> leading_unknown(const Expr& c) {
  std::optional<Atom> best;
  for (const Atom& a : c.atoms())
    if (a.kind == AtomKind::Unknown && (!best || *best < a)) best = a;
  return best;
}

}  // namespace

DeterminingSystem determining_system(const DifferentialEquation& eq) {
  DeterminingSystem sys;
  sys.axes = eq.axes();
  sys.relations = eq.relations;

  const DifferentialEquation adj = adjoint_equation(eq);
  const Expr Fphi = apply_relations(substitute(adj.F, {{Atom::jet('v'), Expr(Atom::unknown())}}), eq.relations);
  const auto cF = ut_coefficient(eq).as_rational();
  if (!cF || sgn(*cF) == 0) throw std::invalid_argument("the equation must contain u_t with a constant coefficient");
  sys.lambda = Fphi.coefficient(kUt).scaled(1 / *cF);
  const Expr R = apply_relations(Fphi - sys.lambda * eq.F, eq.relations);

  auto groups = R.collect([](const Atom& a) { return a.is_u_jet() || a.kind == AtomKind::Func; });
  std::vector<Expr> raw;
  for (const auto& [key, cof] : groups) {
    Expr c = normalize_constraint(cof);
    if (!c.is_zero() && std::find(raw.begin(), raw.end(), c) == raw.end()) raw.push_back(c);
  }

  const Expr phi_u = Atom::unknown(UnknownIndex{0, 0, 0, 0, 1});
  if (std::find(raw.begin(), raw.end(), phi_u) != raw.end()) {
    sys.phi_u_zero = true;
    auto drop_u = [](const Atom& a) -> std::optional<Expr> {
      if (a.kind == AtomKind::Unknown && a.idx[kUnknownU] > 0) return Expr();
      return std::nullopt;
    };
    std::vector<Expr> reduced;
    for (const Expr& c : raw) {
      Expr r = normalize_constraint(map_atoms(c, drop_u));
      if (!r.is_zero() && std::find(reduced.begin(), reduced.end(), r) == reduced.end()) reduced.push_back(r);
    }
    raw = std::move(reduced);
    sys.lambda = map_atoms(sys.lambda, drop_u);
  }
  std::stable_sort(raw.begin(), raw.end(), [](const Expr& a, const Expr& b) {
    auto la = leading_unknown(a), lb = leading_unknown(b);
    if (!la || !lb) return static_cast<bool>(la);
    return *lb < *la;
  });
  sys.constraints = raw;

  const Expr phi = Atom::unknown();
  sys.tag = SystemTag::Polynomial;
  for (const Expr& c : sys.constraints) {
    if (c == phi) {
      sys.tag = SystemTag::Inconsistent;
      return sys;
    }
  }
  for (const Expr& c : sys.constraints) {
    if (c.size() != 2) continue;
    const bool has_t = c.any_atom([](const Atom& a) { return a.kind == AtomKind::Unknown && a.idx[0] == 1; });
    const bool has_phi = c.any_atom([](const Atom& a) { return a == Atom::unknown(); });
    if (has_t) sys.tag = SystemTag::ConstrainedSymbol;
    if (has_phi && sys.tag == SystemTag::Polynomial) sys.tag = SystemTag::OdeBranch;
  }
  return sys;
}

// ---------------------------------------------------------------------------

Expr SymbolConstraint::rewrite(const Expr& e) const {
  const int s = axis_index(space);
  return map_atoms(e, [&](const Atom& a) -> std::optional<Expr> {
    if (a.kind != AtomKind::Constrained || a.name != name || a.idx[0] == 0) return std::nullopt;
    const int n = a.idx[0];
    MultiIndex m = a.multi();
    m[0] = 0;
    m[s] = static_cast<std::uint8_t>(m[s] + 2 * n);
    return (-K).pow(static_cast<unsigned>(n)) * Expr(Atom::constrained(a.name, a.mask, m));
  });
}

std::string SymbolConstraint::describe() const {
  const std::uint8_t mask = axis_bit(Axis::t) | axis_bit(space);
  const Expr lhs = Expr(Atom::constrained(name, mask, plus({}, Axis::t))) +
                   K * Expr(Atom::constrained(name, mask, plus({}, space, 2)));
  return to_plain(lhs) + " = 0";
}

Expr Substitution::apply_constraints(const Expr& e) const {
  Expr r = e;
  for (const SymbolConstraint& c : constraints) r = c.rewrite(r);
  return r;
}

bool Substitution::is_family_atom(const Atom& a) const {
  for (const Atom& p : params) {
    if (p == a) return true;
    if (p.kind == AtomKind::Constrained && a.kind == AtomKind::Constrained && p.name == a.name) return true;
  }
  return false;
}

Substitution make_substitution(const Expr& phi, std::vector<SymbolConstraint> constraints) {
  static const std::regex kFamily("[aAB][0-9]+");
  Substitution s;
  s.phi = phi;
  s.constraints = std::move(constraints);
  std::set<std::string> seen;
  for (const Atom& a : phi.atoms()) {
    if (a.kind == AtomKind::Param && std::regex_match(a.name, kFamily)) s.params.push_back(a);
    if (a.kind == AtomKind::Constrained && seen.insert(a.name).second)
      s.params.push_back(Atom::constrained(a.name, a.mask));
  }
  return s;
}

namespace {

struct Shape {
  enum Kind { Pure, Ode, Heat } kind;
  Axis s;
  int m = 0;  // Pure: order of the annihilating derivative
  Expr c;     // Ode: phi_ss + c phi = 0; Heat: phi_t + c phi_ss = 0
};

std::optional<Axis> single_axis(const MultiIndex& m, int* count) {
  std::optional<Axis> r;
  for (Axis a : kAllAxes) {
    if (!m[axis_index(a)]) continue;
    if (r) return std::nullopt;
    r = a;
    *count = m[axis_index(a)];
  }
  return r;
}

Shape classify(const Expr& c) {
  auto outside = [&]() {
    return OutsideAnsatzError("constraint " + to_plain(c) + " = 0 is outside the ansatz library");
  };
  std::vector<std::pair<Atom, Expr>> terms;
  for (const auto& [m, k] : c.terms()) {
    auto [unk, rest] = m.split([](const Atom& a) { return a.kind == AtomKind::Unknown; });
    if (unk.factors().size() != 1 || unk.factors()[0].second != 1) throw outside();
    for (const auto& [a, p] : rest.factors())
      if (a.kind != AtomKind::Param) throw outside();
    const Atom& u = unk.factors()[0].first;
    if (u.idx[kUnknownU] != 0) throw OutsideAnsatzError("substitution depends on u: " + to_plain(c) + " = 0");
    auto it = std::find_if(terms.begin(), terms.end(), [&](const auto& t) { return t.first == u; });
    if (it == terms.end()) {
      terms.emplace_back(u, Expr(rest, k));
    } else {
      it->second += Expr(rest, k);
    }
  }
  if (terms.size() == 1) {
    int n = 0;
    auto ax = single_axis(multi_of_unknown(terms[0].first), &n);
    if (!ax) throw outside();
    return {Shape::Pure, *ax, n, {}};
  }
  if (terms.size() == 2) {
    for (int i = 0; i < 2; ++i) {
      const auto& [a, ka] = terms[i];
      const auto& [b, kb] = terms[1 - i];
      int na = 0, nb = 0;
      auto axa = single_axis(multi_of_unknown(a), &na);
      auto axb = single_axis(multi_of_unknown(b), &nb);
      auto qa = ka.as_rational();
      if (!qa) continue;
      if (axa && *axa != Axis::t && na == 2 && unknown_order(b) == 0)
        return {Shape::Ode, *axa, 2, kb.scaled(1 / *qa)};
      if (axa && *axa == Axis::t && na == 1 && axb && *axb != Axis::t && nb == 2)
        return {Shape::Heat, *axb, 2, kb.scaled(1 / *qa)};
    }
  }
  throw outside();
}

struct OdeFactor {
  Axis s;
  bool trig;
  std::string freq;
  Expr f1, f2;
};

OdeFactor ode_factor(const Shape& sh, Ansatz ansatz, std::map<Atom, Expr>& bindings) {
  const Expr& c = sh.c;
  std::optional<std::pair<bool, std::string>> kind;  // (trig?, freq)
  if (c.size() == 1) {
    const auto& [m, k] = *c.terms().begin();
    if (m.factors().size() == 1 && m.factors()[0].first.kind == AtomKind::Param) {
      const Atom& p = m.factors()[0].first;
      const int pw = m.factors()[0].second;
      if (pw == 2 && (k == 1 || k == -1)) kind = std::make_pair(k == 1, p.name);
      if (pw == 1 && (k == 1 || k == -1)) {
        if (ansatz == Ansatz::Trig) {
          bindings[p] = Expr(Atom::param("omega")).pow(2).scaled(k);
          kind = std::make_pair(true, std::string("omega"));
        } else if (ansatz == Ansatz::Exp) {
          bindings[p] = Expr(Atom::param("delta")).pow(2).scaled(-k);
          kind = std::make_pair(false, std::string("delta"));
        } else {
          throw OutsideAnsatzError("phi_" + std::string(2, axis_char(sh.s)) + " + " + to_plain(c) +
                                   "*phi = 0: the sign of " + p.name +
                                   " is not fixed; choose --ansatz trig (" + p.name + " = omega^2) or --ansatz exp (" +
                                   p.name + " = -delta^2)");
        }
      }
    }
  }
  if (!kind) {
    throw OutsideAnsatzError("phi_" + std::string(2, axis_char(sh.s)) + " + (" + to_plain(c) +
                             ")*phi = 0 is outside the ansatz library");
  }
  OdeFactor f{sh.s, kind->first, kind->second, {}, {}};
  if (f.trig) {
    f.f1 = Atom::trig(TrigFn::Cos, f.freq, sh.s);
    f.f2 = Atom::trig(TrigFn::Sin, f.freq, sh.s);
  } else {
    f.f1 = Atom::trig(TrigFn::Exp, f.freq, sh.s, 1);
    f.f2 = Atom::trig(TrigFn::Exp, f.freq, sh.s, -1);
  }
  return f;
}

}  // namespace

Substitution solve_substitution(const DeterminingSystem& sys, Ansatz ansatz) {
  if (sys.tag == SystemTag::Inconsistent)
    throw InconsistentSystemError("not nonlinearly self-adjoint: the determining system forces phi = 0");
  if (!sys.phi_u_zero) {
    for (const Expr& c : sys.constraints)
      if (c.any_atom([](const Atom& a) { return a.kind == AtomKind::Unknown && a.idx[kUnknownU] > 0; }))
        throw OutsideAnsatzError("the determining system involves phi_u; u-dependent substitutions are "
                                 "outside the ansatz library");
  }

  std::map<Axis, Shape> cover;
  auto claim = [&](Axis a, const Shape& sh) {
    auto it = cover.find(a);
    if (it == cover.end()) {
      cover.emplace(a, sh);
      return;
    }
    if (it->second.kind == Shape::Pure && sh.kind == Shape::Pure) {
      it->second.m = std::min(it->second.m, sh.m);
      return;
    }
    throw OutsideAnsatzError(std::string("conflicting constraints in ") + axis_char(a) +
                             " are outside the ansatz library");
  };
  for (const Expr& c : sys.constraints) {
    const Shape sh = classify(c);
    claim(sh.s, sh);
    if (sh.kind == Shape::Heat) claim(Axis::t, sh);
  }
  for (Axis a : sys.axes)
    if (!cover.count(a))
      throw OutsideAnsatzError(std::string("phi is unconstrained in ") + axis_char(a) +
                               "; arbitrary functions are outside the ansatz library");

  Substitution s;
  std::vector<std::pair<Axis, int>> poly;  // axis, max degree
  std::vector<OdeFactor> odes;
  std::optional<Shape> heat;
  for (Axis a : sys.axes) {
    const Shape& sh = cover.at(a);
    switch (sh.kind) {
      case Shape::Pure: poly.emplace_back(a, sh.m - 1); break;
      case Shape::Ode: odes.push_back(ode_factor(sh, ansatz, s.bindings)); break;
      case Shape::Heat:
        if (a == Axis::t) break;
        if (heat) throw OutsideAnsatzError("more than one heat-type constraint is outside the ansatz library");
        heat = sh;
        break;
    }
  }

  const bool uses_trig = std::any_of(odes.begin(), odes.end(), [](const OdeFactor& f) { return f.trig; });
  const bool uses_exp = std::any_of(odes.begin(), odes.end(), [](const OdeFactor& f) { return !f.trig; });
  auto require = [&](bool ok, const char* family) {
    if (!ok)
      throw OutsideAnsatzError(std::string("the determining system requires the ") + family +
                               " family, which --ansatz " + ansatz_name(ansatz) + " excludes");
  };
  if (ansatz != Ansatz::Auto) {
    require(!heat || ansatz == Ansatz::Constrained, "constrained");
    require(!uses_trig || ansatz == Ansatz::Trig || ansatz == Ansatz::Constrained, "trig");
    require(!uses_exp || ansatz == Ansatz::Exp || ansatz == Ansatz::Constrained, "exp");
  }

  // Polynomial part: multilinear-style tensor basis, degree then lexicographic, descending.
  std::vector<MultiIndex> mono{MultiIndex{}};
  for (const auto& [a, deg] : poly) {
    std::vector<MultiIndex> next;
    for (const MultiIndex& m : mono)
      for (int e = 0; e <= deg; ++e) next.push_back(plus(m, a, e));
    mono = std::move(next);
  }
  std::sort(mono.begin(), mono.end(), [](const MultiIndex& a, const MultiIndex& b) {
    if (order(a) != order(b)) return order(a) > order(b);
    return a > b;
  });
  auto poly_expr = [](const MultiIndex& m) {
    Expr e(1L);
    for (Axis a : kAllAxes)
      if (m[axis_index(a)]) e *= Expr(Atom::var(a)).pow(m[axis_index(a)]);
    return e;
  };

  std::vector<Expr> fns{Expr(1L)};
  for (const OdeFactor& f : odes) {
    std::vector<Expr> next;
    for (const Expr& g : fns) {
      next.push_back(g * f.f1);
      next.push_back(g * f.f2);
    }
    fns = std::move(next);
  }

  if (heat) {
    static const char* kGreek[] = {"alpha", "beta", "gamma", "sigma"};
    if (mono.size() * fns.size() > 4)
      throw OutsideAnsatzError("more than four constrained symbols are outside the ansatz library");
    const std::uint8_t mask = axis_bit(Axis::t) | axis_bit(heat->s);
    int i = 0;
    for (const MultiIndex& m : mono) {
      for (const Expr& g : fns) {
        const Atom sym = Atom::constrained(kGreek[i], mask);
        s.phi += Expr(sym) * poly_expr(m) * g;
        s.params.push_back(sym);
        s.constraints.push_back({kGreek[i], heat->s, heat->c});
        ++i;
      }
    }
    s.family = "constrained";
  } else if (odes.size() == 1 && (mono.size() == 2 || mono.size() == 1)) {
    for (int j = 0; j < 2; ++j) {
      const Expr& g = j == 0 ? odes[0].f1 : odes[0].f2;
      const Atom A = Atom::param("A" + std::to_string(j + 1));
      if (mono.size() == 2) {
        const Atom B = Atom::param("B" + std::to_string(j + 1));
        s.phi += (Expr(A) * poly_expr(mono[0]) + Expr(B) * poly_expr(mono[1])) * g;
      } else {
        s.phi += Expr(A) * poly_expr(mono[0]) * g;
      }
    }
    for (int j = 1; j <= 2; ++j) s.params.push_back(Atom::param("A" + std::to_string(j)));
    if (mono.size() == 2)
      for (int j = 1; j <= 2; ++j) s.params.push_back(Atom::param("B" + std::to_string(j)));
    s.family = odes[0].trig ? "trig" : "exp";
  } else {
    int i = 0;
    for (const MultiIndex& m : mono) {
      for (const Expr& g : fns) {
        const Atom a = Atom::param("a" + std::to_string(++i));
        s.phi += Expr(a) * poly_expr(m) * g;
        s.params.push_back(a);
      }
    }
    s.family = odes.empty() ? "polynomial" : (uses_trig ? "trig" : "exp");
  }
  return s;
}

// ---------------------------------------------------------------------------

VerificationFailure::VerificationFailure(const std::string& what, Expr residual, Expr lambda)
    : std::runtime_error(what), residual_(std::move(residual)), lambda_(std::move(lambda)) {}

DifferentialEquation bind_equation(const DifferentialEquation& eq, const Substitution& s) {
  if (s.bindings.empty()) return eq;
  std::map<Atom, Expr> relations;
  for (const auto& [k, v] : eq.relations) relations[k] = substitute(v, s.bindings);
  DifferentialEquation r = make_equation(substitute(eq.F, s.bindings), eq.spatial, relations, eq.name);
  r.symbols = eq.symbols;
  r.convention = eq.convention;
  return r;
}

SelfAdjointCheck check_substitution(const DifferentialEquation& eq, const Substitution& s) {
  if (s.phi.is_zero()) throw std::invalid_argument("the zero substitution is not admissible");
  const DifferentialEquation eqb = bind_equation(eq, s);
  const DifferentialEquation adj = adjoint_equation(eqb);
  const Expr Fphi = s.apply_constraints(substitute(adj.F, {{Atom::jet('v'), s.phi}}));
  const auto cF = ut_coefficient(eqb).as_rational();
  if (!cF || sgn(*cF) == 0) throw std::invalid_argument("the equation must contain u_t with a constant coefficient");
  SelfAdjointCheck r;
  r.lambda = Fphi.coefficient(kUt).scaled(1 / *cF);
  r.residual = s.apply_constraints(apply_relations(Fphi - r.lambda * eqb.F, eqb.relations));
  return r;
}

Expr verify_substitution(const DifferentialEquation& eq, const Substitution& s) {
  SelfAdjointCheck r = check_substitution(eq, s);
  if (!r.residual.is_zero())
    throw VerificationFailure("self-adjointness residual is nonzero: " + to_plain(r.residual), r.residual,
                              r.lambda);
  return r.lambda;
}

}  // namespace clf
