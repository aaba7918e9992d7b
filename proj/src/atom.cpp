#include "clforge/atom.hpp"

#include <stdexcept>

namespace clf {

char axis_char(Axis a) {
  static constexpr char kChars[] = {'t', 'x', 'y', 'z'};
  return kChars[axis_index(a)];
}

std::optional<Axis> axis_from_char(char c) {
  switch (c) {
    case 't': return Axis::t;
    case 'x': return Axis::x;
    case 'y': return Axis::y;
    case 'z': return Axis::z;
    default: return std::nullopt;
  }
}

int order(const MultiIndex& m) { return m[0] + m[1] + m[2] + m[3]; }

MultiIndex plus(MultiIndex m, Axis a, int n) {
  m[axis_index(a)] = static_cast<std::uint8_t>(m[axis_index(a)] + n);
  return m;
}

std::string index_string(const MultiIndex& m) {
  std::string out;
  for (Axis a : kAllAxes) out.append(m[axis_index(a)], axis_char(a));
  return out;
}

std::optional<MultiIndex> parse_index(std::string_view s) {
  MultiIndex m{};
  for (char c : s) {
    auto a = axis_from_char(c);
    if (!a) return std::nullopt;
    ++m[axis_index(*a)];
  }
  return m;
}

bool dominates(const MultiIndex& big, const MultiIndex& small) {
  for (int i = 0; i < 4; ++i)
    if (big[i] < small[i]) return false;
  return true;
}

MultiIndex Atom::multi() const {
  return {static_cast<std::uint8_t>(idx[0]), static_cast<std::uint8_t>(idx[1]),
          static_cast<std::uint8_t>(idx[2]), static_cast<std::uint8_t>(idx[3])};
}

Atom Atom::var(Axis a) {
  Atom r;
  r.kind = AtomKind::Var;
  r.name = std::string(1, axis_char(a));
  r.idx[0] = static_cast<std::int8_t>(a);
  return r;
}

Atom Atom::param(std::string name) {
  Atom r;
  r.kind = AtomKind::Param;
  r.name = std::move(name);
  return r;
}

Atom Atom::func(std::string base, int order) {
  if (order < -1) throw std::invalid_argument("function symbol order below -1");
  Atom r;
  r.kind = AtomKind::Func;
  r.name = std::move(base);
  r.idx[0] = static_cast<std::int8_t>(order);
  return r;
}

Atom Atom::trig(TrigFn fn, std::string freq, Axis a, int sign) {
  Atom r;
  r.kind = AtomKind::Trig;
  r.name = std::move(freq);
  r.idx[0] = static_cast<std::int8_t>(fn);
  r.idx[1] = static_cast<std::int8_t>(a);
  r.idx[2] = static_cast<std::int8_t>(fn == TrigFn::Exp ? (sign < 0 ? -1 : 1) : 1);
  return r;
}

Atom Atom::constrained(std::string name, std::uint8_t arg_mask, MultiIndex m) {
  Atom r;
  r.kind = AtomKind::Constrained;
  r.name = std::move(name);
  for (int i = 0; i < 4; ++i) r.idx[i] = static_cast<std::int8_t>(m[i]);
  r.mask = arg_mask;
  return r;
}

Atom Atom::unknown(UnknownIndex m) {
  Atom r;
  r.kind = AtomKind::Unknown;
  r.name = "phi";
  r.idx = m;
  return r;
}

Atom Atom::jet(char dep, MultiIndex m) {
  Atom r;
  r.kind = AtomKind::Jet;
  r.name = std::string(1, dep);
  for (int i = 0; i < 4; ++i) r.idx[i] = static_cast<std::int8_t>(m[i]);
  return r;
}

bool Atom::depends_on_u() const {
  switch (kind) {
    case AtomKind::Func:
    case AtomKind::Unknown: return true;
    case AtomKind::Jet: return is_u_jet();
    default: return false;
  }
}

}  // namespace clf
