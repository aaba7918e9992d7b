#pragma once

#include <string>

#include <json.hpp>

#include "clforge/expr.hpp"

namespace clf {

/// Grammar text; parse(to_plain(e)) == e for every normalized e.
std::string to_plain(const Expr& e);
std::string to_plain(const Atom& a);

/// LaTeX math-mode text (no surrounding delimiters).
std::string to_latex(const Expr& e);
std::string to_latex(const Atom& a);

/// JSON tree of an expression.
///
///   expr   := [ term, ... ]                      empty array is zero
///   term   := { "coef": "p/q", "factors": [ { "atom": atom, "pow": n }, ... ] }
///   atom   := { "kind": "var",         "name": "x" }
///           | { "kind": "param",       "name": "omega" }
///           | { "kind": "func",        "name": "f", "order": n }        n = -1 is F
///           | { "kind": "trig",        "fn": "sin"|"cos"|"exp", "freq": "omega",
///               "axis": "x", "sign": 1|-1 }
///           | { "kind": "constrained", "name": "alpha", "args": "ty", "index": "yy" }
///           | { "kind": "unknown",     "index": "xu" }
///           | { "kind": "jet",         "dep": "u"|"v", "index": "xx" }
nlohmann::json to_json(const Expr& e);
nlohmann::json to_json(const Atom& a);
Expr expr_from_json(const nlohmann::json& j);
Atom atom_from_json(const nlohmann::json& j);

}  // namespace clf
