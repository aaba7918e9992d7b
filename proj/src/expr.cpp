#include "clforge/expr.hpp"

#include <algorithm>
#include <stdexcept>

namespace clf {

// ---------------------------------------------------------------------------
// Monomial

Monomial::Monomial(const Atom& a, int power) {
  if (power > 0) factors_.emplace_back(a, power);
}

int Monomial::degree(const Atom& a) const {
  for (const auto& [atom, p] : factors_)
    if (atom == a) return p;
  return 0;
}

int Monomial::total_degree() const {
  int d = 0;
  for (const auto& f : factors_) d += f.second;
  return d;
}

Monomial Monomial::operator*(const Monomial& other) const {
  Monomial r;
  r.factors_.reserve(factors_.size() + other.factors_.size());
  auto i = factors_.begin();
  auto j = other.factors_.begin();
  while (i != factors_.end() && j != other.factors_.end()) {
    if (i->first < j->first) {
      r.factors_.push_back(*i++);
    } else if (j->first < i->first) {
      r.factors_.push_back(*j++);
    } else {
      r.factors_.emplace_back(i->first, i->second + j->second);
      ++i;
      ++j;
    }
  }
  r.factors_.insert(r.factors_.end(), i, factors_.end());
  r.factors_.insert(r.factors_.end(), j, other.factors_.end());
  return r;
}

Monomial Monomial::without(const Atom& a, int power) const {
  Monomial r;
  for (const auto& [atom, p] : factors_) {
    if (atom == a) {
      if (p > power) r.factors_.emplace_back(atom, p - power);
    } else {
      r.factors_.emplace_back(atom, p);
    }
  }
  return r;
}

std::pair<Monomial, Monomial> Monomial::split(const std::function<bool(const Atom&)>& pred) const {
  std::pair<Monomial, Monomial> r;
  for (const auto& f : factors_) (pred(f.first) ? r.first : r.second).factors_.push_back(f);
  return r;
}

std::optional<Monomial> Monomial::divide(const Monomial& d) const {
  Monomial r = *this;
  for (const auto& [atom, p] : d.factors_) {
    if (r.degree(atom) < p) return std::nullopt;
    r = r.without(atom, p);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Expr

namespace {

/// Callers may hand in unreduced quotients such as mpq_class(4, 2).
Rational canonical(Rational q) {
  q.canonicalize();
  return q;
}

}  // namespace

Expr::Expr(long value) {
  if (value != 0) terms_.emplace(Monomial(), Rational(value));
}

Expr::Expr(const Rational& value) {
  if (sgn(value) != 0) terms_.emplace(Monomial(), canonical(value));
}

Expr::Expr(const Atom& atom) { terms_.emplace(Monomial(atom), Rational(1)); }

Expr::Expr(const Monomial& m, const Rational& c) {
  if (sgn(c) != 0) terms_.emplace(m, canonical(c));
}

std::optional<Rational> Expr::as_rational() const {
  if (terms_.empty()) return Rational(0);
  if (terms_.size() == 1 && terms_.begin()->first.is_one()) return terms_.begin()->second;
  return std::nullopt;
}

void Expr::add_term(const Monomial& m, const Rational& c) {
  if (sgn(c) == 0) return;
  const Rational q = canonical(c);
  auto [it, inserted] = terms_.try_emplace(m, q);
  if (!inserted) {
    it->second += q;
    if (sgn(it->second) == 0) terms_.erase(it);
  }
}

Expr Expr::operator-() const {
  Expr r = *this;
  for (auto& [m, c] : r.terms_) c = -c;
  return r;
}

Expr& Expr::operator+=(const Expr& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Expr& Expr::operator-=(const Expr& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

Expr operator*(const Expr& a, const Expr& b) {
  Expr r;
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) r.add_term(ma * mb, ca * cb);
  return r;
}

Expr& Expr::operator*=(const Expr& o) { return *this = *this * o; }

Expr Expr::scaled(const Rational& c) const {
  if (sgn(c) == 0) return {};
  const Rational q = canonical(c);
  Expr r = *this;
  for (auto& [m, v] : r.terms_) v *= q;
  return r;
}

Expr Expr::pow(unsigned n) const {
  Expr result(1L);
  Expr base = *this;
  while (n > 0) {
    if (n & 1u) result *= base;
    n >>= 1u;
    if (n > 0) base *= base;
  }
  return result;
}

std::set<Atom> Expr::atoms() const {
  std::set<Atom> r;
  for (const auto& [m, c] : terms_)
    for (const auto& f : m.factors()) r.insert(f.first);
  return r;
}

bool Expr::any_atom(const std::function<bool(const Atom&)>& pred) const {
  for (const auto& [m, c] : terms_)
    for (const auto& f : m.factors())
      if (pred(f.first)) return true;
  return false;
}

int Expr::degree(const Atom& a) const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree(a));
  return d;
}

std::map<Monomial, Expr> Expr::collect(const std::function<bool(const Atom&)>& pred) const {
  std::map<Monomial, Expr> r;
  for (const auto& [m, c] : terms_) {
    auto [key, rest] = m.split(pred);
    r[key].add_term(rest, c);
  }
  for (auto it = r.begin(); it != r.end();) it = it->second.is_zero() ? r.erase(it) : std::next(it);
  return r;
}

Expr Expr::coefficient(const Atom& a, int power) const {
  Expr r;
  for (const auto& [m, c] : terms_)
    if (m.degree(a) == power) r.add_term(m.without(a, power), c);
  return r;
}

Expr Expr::without(const Atom& a) const {
  Expr r;
  for (const auto& [m, c] : terms_)
    if (m.degree(a) == 0) r.add_term(m, c);
  return r;
}

// ---------------------------------------------------------------------------
// Structural operations

Expr map_atoms(const Expr& e, const std::function<std::optional<Expr>(const Atom&)>& image) {
  std::map<Atom, std::optional<Expr>> cache;
  Expr r;
  for (const auto& [m, c] : e.terms()) {
    Expr term(Monomial(), c);
    Monomial kept;
    for (const auto& [atom, p] : m.factors()) {
      auto it = cache.find(atom);
      if (it == cache.end()) it = cache.emplace(atom, image(atom)).first;
      if (it->second) {
        term *= it->second->pow(static_cast<unsigned>(p));
      } else {
        kept = kept * Monomial(atom, p);
      }
      if (term.is_zero()) break;
    }
    if (!term.is_zero()) r += term * Expr(kept, Rational(1));
  }
  return r;
}

Expr derive(const Expr& e, const std::function<Expr(const Atom&)>& d_atom) {
  std::map<Atom, Expr> cache;
  Expr r;
  for (const auto& [m, c] : e.terms()) {
    for (const auto& [atom, p] : m.factors()) {
      auto it = cache.find(atom);
      if (it == cache.end()) it = cache.emplace(atom, d_atom(atom)).first;
      if (it->second.is_zero()) continue;
      r += Expr(m.without(atom, 1), c * p) * it->second;
    }
  }
  return r;
}

namespace {

Atom shifted_unknown(const Atom& a, int slot) {
  UnknownIndex m = a.unknown_index();
  ++m[slot];
  return Atom::unknown(m);
}

Atom shifted_multi(const Atom& a, Axis ax) {
  Atom r = a;
  ++r.idx[axis_index(ax)];
  return r;
}

Expr trig_derivative(const Atom& a) {
  const Expr freq = Atom::param(a.name);
  switch (a.trig_fn()) {
    case TrigFn::Sin:
      return freq * Expr(Atom::trig(TrigFn::Cos, a.name, a.axis()));
    case TrigFn::Cos:
      return -(freq * Expr(Atom::trig(TrigFn::Sin, a.name, a.axis())));
    case TrigFn::Exp:
      return (freq * Expr(a)).scaled(a.trig_sign());
  }
  return {};
}

Expr atom_total_derivative(const Atom& a, Axis ax) {
  switch (a.kind) {
    case AtomKind::Var: return a.axis() == ax ? Expr(1L) : Expr();
    case AtomKind::Param: return {};
    case AtomKind::Func:
      return Expr(Atom::func(a.name, a.func_order() + 1)) * Expr(Atom::jet('u', plus({}, ax)));
    case AtomKind::Trig: return a.axis() == ax ? trig_derivative(a) : Expr();
    case AtomKind::Constrained:
      return (a.mask & axis_bit(ax)) ? Expr(shifted_multi(a, ax)) : Expr();
    case AtomKind::Unknown:
      return Expr(shifted_unknown(a, axis_index(ax))) +
             Expr(Atom::jet('u', plus({}, ax))) * Expr(shifted_unknown(a, kUnknownU));
    case AtomKind::Jet: return Expr(shifted_multi(a, ax));
  }
  return {};
}

}  // namespace

Expr total_derivative(const Expr& e, Axis a) {
  return derive(e, [a](const Atom& atom) { return atom_total_derivative(atom, a); });
}

Expr total_derivative(const Expr& e, const MultiIndex& m) {
  Expr r = e;
  for (Axis a : kAllAxes)
    for (int k = 0; k < m[axis_index(a)]; ++k) r = total_derivative(r, a);
  return r;
}

Expr jet_partial(const Expr& e, const Atom& wrt) {
  const bool wrt_u = wrt == Atom::jet('u');
  const bool wrt_var = wrt.kind == AtomKind::Var;
  return derive(e, [&](const Atom& b) -> Expr {
    if (b == wrt) return Expr(1L);
    if (wrt_u) {
      if (b.kind == AtomKind::Func) return Expr(Atom::func(b.name, b.func_order() + 1));
      if (b.kind == AtomKind::Unknown) return Expr(shifted_unknown(b, kUnknownU));
      return {};
    }
    if (wrt_var) {
      const Axis ax = wrt.axis();
      if (b.kind == AtomKind::Trig) return b.axis() == ax ? trig_derivative(b) : Expr();
      if (b.kind == AtomKind::Constrained)
        return (b.mask & axis_bit(ax)) ? Expr(shifted_multi(b, ax)) : Expr();
      if (b.kind == AtomKind::Unknown) return Expr(shifted_unknown(b, axis_index(ax)));
    }
    return {};
  });
}

Expr substitute(const Expr& e, const std::map<Atom, Expr>& bindings) {
  const Atom v = Atom::jet('v');
  auto v_it = bindings.find(v);
  std::map<MultiIndex, Expr> derived;
  auto v_image = [&](const MultiIndex& m) -> const Expr& {
    auto it = derived.find(m);
    if (it == derived.end()) it = derived.emplace(m, total_derivative(v_it->second, m)).first;
    return it->second;
  };
  if (v_it != bindings.end()) {
    for (const auto& [atom, image] : bindings) {
      if (atom.is_v_jet() && atom.jet_order() > 0 && !equivalent(image, v_image(atom.multi())))
        throw std::invalid_argument("inconsistent bindings for v and v_" + index_string(atom.multi()));
    }
  }
  return map_atoms(e, [&](const Atom& a) -> std::optional<Expr> {
    auto it = bindings.find(a);
    if (it != bindings.end()) return it->second;
    if (v_it != bindings.end() && a.is_v_jet()) return v_image(a.multi());
    return std::nullopt;
  });
}

Monomial common_factor(const Expr& e, const std::function<bool(const Atom&)>& pred) {
  if (e.is_zero()) return {};
  std::map<Atom, int> mins;
  bool first = true;
  for (const auto& [m, c] : e.terms()) {
    std::map<Atom, int> here;
    for (const auto& [a, p] : m.factors())
      if (pred(a)) here[a] = p;
    if (first) {
      mins = here;
      first = false;
    } else {
      for (auto it = mins.begin(); it != mins.end();) {
        auto h = here.find(it->first);
        if (h == here.end()) {
          it = mins.erase(it);
        } else {
          it->second = std::min(it->second, h->second);
          ++it;
        }
      }
    }
  }
  Monomial r;
  for (const auto& [a, p] : mins) r = r * Monomial(a, p);
  return r;
}

Expr divide_monomial(const Expr& e, const Monomial& d) {
  Expr r;
  for (const auto& [m, c] : e.terms()) {
    auto q = m.divide(d);
    if (!q) throw std::invalid_argument("monomial does not divide expression");
    r.add_term(*q, c);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Axis permutations

std::string axis_function(Axis a) {
  switch (a) {
    case Axis::x: return "f";
    case Axis::y: return "g";
    case Axis::z: return "h";
    default: return "";
  }
}

AxisPermutation AxisPermutation::swap(Axis a, Axis b) {
  if (a == Axis::t || b == Axis::t) throw std::invalid_argument("only spatial axes can be permuted");
  AxisPermutation p;
  p.map[axis_index(a)] = b;
  p.map[axis_index(b)] = a;
  if (a != b) {
    p.func_swap[axis_function(a)] = axis_function(b);
    p.func_swap[axis_function(b)] = axis_function(a);
  }
  return p;
}

bool AxisPermutation::is_identity() const {
  for (Axis a : kAllAxes)
    if (map[axis_index(a)] != a) return false;
  return func_swap.empty();
}

Atom permute_atom(const Atom& a, const AxisPermutation& p) {
  Atom r = a;
  auto permute_counts = [&](Atom& out) {
    for (Axis ax : kAllAxes) out.idx[axis_index(p(ax))] = a.idx[axis_index(ax)];
  };
  switch (a.kind) {
    case AtomKind::Var: return Atom::var(p(a.axis()));
    case AtomKind::Func: {
      auto it = p.func_swap.find(a.name);
      if (it != p.func_swap.end()) r.name = it->second;
      return r;
    }
    case AtomKind::Trig: r.idx[1] = static_cast<std::int8_t>(p(a.axis())); return r;
    case AtomKind::Constrained: {
      permute_counts(r);
      r.mask = 0;
      for (Axis ax : kAllAxes)
        if (a.mask & axis_bit(ax)) r.mask |= axis_bit(p(ax));
      return r;
    }
    case AtomKind::Unknown:
    case AtomKind::Jet: permute_counts(r); return r;
    default: return r;
  }
}

Expr permute(const Expr& e, const AxisPermutation& p) {
  if (p.is_identity()) return e;
  return map_atoms(e, [&](const Atom& a) -> std::optional<Expr> { return Expr(permute_atom(a, p)); });
}

}  // namespace clf
