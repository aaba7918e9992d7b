#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace clf {

/// Independent variables of the jet space. `t` is always the evolution variable.
enum class Axis : std::uint8_t { t = 0, x = 1, y = 2, z = 3 };

inline constexpr std::array<Axis, 4> kAllAxes{Axis::t, Axis::x, Axis::y, Axis::z};
inline constexpr std::array<Axis, 3> kSpatialAxes{Axis::x, Axis::y, Axis::z};

char axis_char(Axis a);
std::optional<Axis> axis_from_char(char c);
inline int axis_index(Axis a) { return static_cast<int>(a); }

/// Derivative counts over (t, x, y, z). Order-independent by construction.
using MultiIndex = std::array<std::uint8_t, 4>;

int order(const MultiIndex& m);
MultiIndex plus(MultiIndex m, Axis a, int n = 1);
std::string index_string(const MultiIndex& m);  // "txx" style, empty for zero
std::optional<MultiIndex> parse_index(std::string_view s);
bool dominates(const MultiIndex& big, const MultiIndex& small);

/// Slots of the unknown substitution function phi(t, x, y, z, u).
inline constexpr int kUnknownU = 4;
using UnknownIndex = std::array<std::int8_t, 5>;

enum class AtomKind : std::uint8_t {
  Var,          // t, x, y, z
  Param,        // declared constants: a1, omega, k, ...
  Func,         // f^{(n)}(u); order -1 is the antiderivative (F, G, H)
  Trig,         // sin(w s), cos(w s), exp(+-w s)
  Constrained,  // alpha(t,y) and its jets; constrained by a linear PDE
  Unknown,      // partials of phi(t,x,y,z,u) in determining systems
  Jet,          // u, v and their derivative coordinates
};

enum class TrigFn : std::uint8_t { Sin = 0, Cos = 1, Exp = 2 };

/// A single generator of the expression polynomial ring.
///
/// Atoms are plain values with a total order: kind first (the canonical
/// ordering of the normal form), then name, then index data.
struct Atom {
  AtomKind kind = AtomKind::Param;
  std::string name;
  std::array<std::int8_t, 5> idx{};
  std::uint8_t mask = 0;

  auto operator<=>(const Atom&) const = default;
  bool operator==(const Atom&) const = default;

  static Atom var(Axis a);
  static Atom param(std::string name);
  static Atom func(std::string base, int order);
  static Atom trig(TrigFn fn, std::string freq, Axis a, int sign = 1);
  static Atom constrained(std::string name, std::uint8_t arg_mask, MultiIndex m = {});
  static Atom unknown(UnknownIndex m = {});
  static Atom jet(char dep, MultiIndex m = {});

  Axis axis() const { return static_cast<Axis>(kind == AtomKind::Var ? idx[0] : idx[1]); }
  int func_order() const { return idx[0]; }
  TrigFn trig_fn() const { return static_cast<TrigFn>(idx[0]); }
  int trig_sign() const { return idx[2]; }
  MultiIndex multi() const;
  UnknownIndex unknown_index() const { return idx; }
  char dep() const { return name.empty() ? '?' : name[0]; }

  bool is_jet(char d) const { return kind == AtomKind::Jet && dep() == d; }
  bool is_u_jet() const { return is_jet('u'); }
  bool is_v_jet() const { return is_jet('v'); }
  int jet_order() const { return clf::order(multi()); }
  int t_count() const { return idx[0]; }

  /// True for atoms that depend on u: u itself, f(u)-type symbols, phi(.., u).
  bool depends_on_u() const;
};

inline std::uint8_t axis_bit(Axis a) { return static_cast<std::uint8_t>(1u << axis_index(a)); }

}  // namespace clf
