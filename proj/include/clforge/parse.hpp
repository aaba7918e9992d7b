#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include "clforge/expr.hpp"

namespace clf {

/// Names the parser accepts besides the fixed grammar symbols
/// (t, x, y, z, u, v, jets, f/g/h/q and their derivatives and antiderivatives).
struct SymbolTable {
  std::set<std::string> params;
  std::map<std::string, std::uint8_t> constrained;  // name -> argument mask

  /// Parameters and constrained symbols used across the heat-equation families.
  static SymbolTable standard();

  void declare_param(const std::string& name);
  void declare_constrained(const std::string& name, std::uint8_t arg_mask);
  bool is_param(const std::string& name) const { return params.count(name) > 0; }
  std::string registry() const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class UnknownSymbolError : public ParseError {
 public:
  UnknownSymbolError(const std::string& symbol, std::size_t position, const std::string& registry);
  const std::string& symbol() const { return symbol_; }

 private:
  std::string symbol_;
};

/// Parses an expression of the equation grammar into normal form.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*          division by constants only
///   unary   := ('+' | '-') unary | power
///   power   := primary ('^' integer)?
///   primary := number | '(' expr ')' | Dt(expr) | Dx(expr) | Dy(expr) | Dz(expr)
///            | f(u) | f1(u) | F(u) | ...          also g, h, q
///            | sin(w*s) | cos(w*s) | exp(w*s) | exp(-w*s)
///            | alpha(t,y) | alpha_yy(t,y)         declared constrained symbols
///            | t | x | y | z | u | v | u_xx | v_t | phi | phi_xu | parameter
Expr parse(std::string_view text, const SymbolTable& symbols = SymbolTable::standard());

}  // namespace clf
