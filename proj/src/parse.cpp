#include "clforge/parse.hpp"

#include <cctype>
#include <sstream>
#include <vector>

namespace clf {

SymbolTable SymbolTable::standard() {
  SymbolTable s;
  for (int i = 1; i <= 8; ++i) s.params.insert("a" + std::to_string(i));
  for (const char* p : {"A1", "A2", "B1", "B2", "omega", "delta", "r", "k", "pi", "lam"}) s.params.insert(p);
  const std::uint8_t ty = axis_bit(Axis::t) | axis_bit(Axis::y);
  for (const char* c : {"alpha", "beta", "gamma", "sigma"}) s.constrained[c] = ty;
  return s;
}

void SymbolTable::declare_param(const std::string& name) { params.insert(name); }

void SymbolTable::declare_constrained(const std::string& name, std::uint8_t arg_mask) {
  constrained[name] = arg_mask;
}

std::string SymbolTable::registry() const {
  std::ostringstream os;
  os << "variables: t x y z; dependent: u v (jets u_x, v_xy, ...); functions: f g h q "
        "(derivatives f1 f2 ..., antiderivatives F G H); parameters:";
  for (const auto& p : params) os << ' ' << p;
  if (!constrained.empty()) {
    os << "; constrained:";
    for (const auto& [name, mask] : constrained) {
      os << ' ' << name << '(';
      bool first = true;
      for (Axis a : kAllAxes)
        if (mask & axis_bit(a)) {
          if (!first) os << ',';
          os << axis_char(a);
          first = false;
        }
      os << ')';
    }
  }
  return os.str();
}

ParseError::ParseError(const std::string& what, std::size_t position)
    : std::runtime_error(what + " at position " + std::to_string(position)), position_(position) {}

UnknownSymbolError::UnknownSymbolError(const std::string& symbol, std::size_t position,
                                       const std::string& registry)
    : ParseError("unknown symbol '" + symbol + "' (known " + registry + ")", position), symbol_(symbol) {}

namespace {

enum class Tok { Number, Ident, Op, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      out.push_back({Tok::Number, std::string(s.substr(i, j - i)), i});
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      out.push_back({Tok::Ident, std::string(s.substr(i, j - i)), i});
      i = j;
    } else if (std::string_view("+-*/^(),").find(c) != std::string_view::npos) {
      out.push_back({Tok::Op, std::string(1, c), i});
      ++i;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

Rational decimal_to_rational(const std::string& text, std::size_t pos) {
  const auto dot = text.find('.');
  if (dot == std::string::npos) return Rational(text);
  if (text.find('.', dot + 1) != std::string::npos) throw ParseError("malformed number", pos);
  std::string digits = text.substr(0, dot) + text.substr(dot + 1);
  if (digits.empty()) throw ParseError("malformed number", pos);
  mpz_class den = 1;
  for (std::size_t k = dot + 1; k < text.size(); ++k) den *= 10;
  Rational q(mpz_class(digits), den);
  q.canonicalize();
  return q;
}

class Parser {
 public:
  Parser(std::string_view text, const SymbolTable& symbols) : toks_(tokenize(text)), symbols_(symbols) {}

  Expr run() {
    Expr e = expr();
    if (peek().kind != Tok::End) throw ParseError("unexpected '" + peek().text + "'", peek().pos);
    return e;
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  const Token& next() { return toks_[i_++]; }
  bool accept(const char* op) {
    if (peek().kind == Tok::Op && peek().text == op) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect(const char* op) {
    if (!accept(op)) throw ParseError(std::string("expected '") + op + "'", peek().pos);
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept("+")) {
        e += term();
      } else if (accept("-")) {
        e -= term();
      } else {
        return e;
      }
    }
  }

  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept("*")) {
        e *= unary();
      } else if (peek().kind == Tok::Op && peek().text == "/") {
        const std::size_t pos = next().pos;
        Expr d = unary();
        auto q = d.as_rational();
        if (!q || sgn(*q) == 0) throw ParseError("division is only defined by nonzero constants", pos);
        e = e.scaled(1 / *q);
      } else {
        return e;
      }
    }
  }

  Expr unary() {
    if (accept("-")) return -unary();
    if (accept("+")) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (peek().kind == Tok::Op && peek().text == "^") {
      const std::size_t pos = next().pos;
      bool negative = accept("-");
      bool paren = accept("(");
      if (!paren && !negative) negative = false;
      if (paren && accept("-")) negative = true;
      const Token& n = next();
      if (n.kind != Tok::Number || n.text.find('.') != std::string::npos)
        throw ParseError("exponent must be an integer", n.pos);
      if (paren) expect(")");
      const unsigned long k = std::stoul(n.text);
      if (negative) {
        auto q = base.as_rational();
        if (!q || sgn(*q) == 0) throw ParseError("negative powers are only defined for nonzero constants", pos);
        return Expr(1 / *q).pow(static_cast<unsigned>(k));
      }
      return base.pow(static_cast<unsigned>(k));
    }
    return base;
  }

  Expr primary() {
    const Token& tok = peek();
    if (tok.kind == Tok::Number) {
      next();
      return Expr(decimal_to_rational(tok.text, tok.pos));
    }
    if (accept("(")) {
      Expr e = expr();
      expect(")");
      return e;
    }
    if (tok.kind != Tok::Ident) throw ParseError("expected an operand", tok.pos);
    next();
    if (peek().kind == Tok::Op && peek().text == "(") return call(tok);
    return identifier(tok);
  }

  Axis expect_var() {
    const Token& t = next();
    if (t.kind != Tok::Ident || t.text.size() != 1 || !axis_from_char(t.text[0]))
      throw ParseError("expected an independent variable", t.pos);
    return *axis_from_char(t.text[0]);
  }

  Expr call(const Token& name) {
    const std::string& n = name.text;
    expect("(");
    if (n.size() == 2 && n[0] == 'D' && axis_from_char(n[1])) {
      Expr inner = expr();
      expect(")");
      return total_derivative(inner, *axis_from_char(n[1]));
    }
    if (auto f = function_symbol(n)) {
      const Token& arg = next();
      if (arg.kind != Tok::Ident || arg.text != "u") throw ParseError("function symbols take the argument u", arg.pos);
      expect(")");
      return Expr(*f);
    }
    if (n == "sin" || n == "cos" || n == "exp") return trig(n, name.pos);
    auto [base, index_text] = split_index(n);
    auto c = symbols_.constrained.find(base);
    if (c != symbols_.constrained.end()) {
      std::uint8_t mask = 0;
      do {
        mask |= axis_bit(expect_var());
      } while (accept(","));
      expect(")");
      if (mask != c->second) throw ParseError("argument list of '" + base + "' does not match its declaration", name.pos);
      auto m = parse_index(index_text);
      if (!m) throw ParseError("bad derivative index on '" + n + "'", name.pos);
      for (Axis a : kAllAxes)
        if ((*m)[axis_index(a)] && !(mask & axis_bit(a)))
          throw ParseError("'" + base + "' does not depend on " + axis_char(a), name.pos);
      return Expr(Atom::constrained(base, mask, *m));
    }
    throw UnknownSymbolError(n, name.pos, symbols_.registry());
  }

  Expr trig(const std::string& fn, std::size_t pos) {
    const bool negative = accept("-");
    const Token& a = next();
    expect("*");
    const Token& b = next();
    expect(")");
    if (a.kind != Tok::Ident || b.kind != Tok::Ident) throw ParseError("trigonometric arguments have the form w*s", pos);
    std::string freq = a.text;
    std::string var = b.text;
    if (freq.size() == 1 && axis_from_char(freq[0])) std::swap(freq, var);
    if (var.size() != 1 || !axis_from_char(var[0])) throw ParseError("expected w*s with s an independent variable", b.pos);
    if (!symbols_.is_param(freq)) throw UnknownSymbolError(freq, a.pos, symbols_.registry());
    const Axis ax = *axis_from_char(var[0]);
    if (fn == "exp") return Expr(Atom::trig(TrigFn::Exp, freq, ax, negative ? -1 : 1));
    Expr r(Atom::trig(fn == "sin" ? TrigFn::Sin : TrigFn::Cos, freq, ax));
    if (negative) return fn == "sin" ? -r : r;  // sin is odd, cos is even
    return r;
  }

  static std::optional<Atom> function_symbol(const std::string& n) {
    if (n.empty()) return std::nullopt;
    const char c = n[0];
    const std::string rest = n.substr(1);
    const bool digits = rest.find_first_not_of("0123456789") == std::string::npos;
    if (!digits) return std::nullopt;
    if (c == 'f' || c == 'g' || c == 'h' || c == 'q') {
      return Atom::func(std::string(1, c), rest.empty() ? 0 : std::stoi(rest));
    }
    if ((c == 'F' || c == 'G' || c == 'H' || c == 'Q') && rest.empty()) {
      return Atom::func(std::string(1, static_cast<char>(std::tolower(c))), -1);
    }
    return std::nullopt;
  }

  static std::pair<std::string, std::string> split_index(const std::string& n) {
    const auto us = n.find('_');
    if (us == std::string::npos) return {n, ""};
    return {n.substr(0, us), n.substr(us + 1)};
  }

  Expr identifier(const Token& tok) {
    const std::string& n = tok.text;
    if (n.size() == 1 && axis_from_char(n[0])) return Expr(Atom::var(*axis_from_char(n[0])));
    if (symbols_.is_param(n)) return Expr(Atom::param(n));
    if (auto f = function_symbol(n)) return Expr(*f);
    auto [base, index_text] = split_index(n);
    if (base == "u" || base == "v") {
      auto m = parse_index(index_text);
      if (!m) throw ParseError("bad jet index in '" + n + "'", tok.pos);
      return Expr(Atom::jet(base[0], *m));
    }
    if (base == "phi") {
      UnknownIndex m{};
      for (char c : index_text) {
        if (c == 'u') {
          ++m[kUnknownU];
        } else if (auto a = axis_from_char(c)) {
          ++m[axis_index(*a)];
        } else {
          throw ParseError("bad index in '" + n + "'", tok.pos);
        }
      }
      return Expr(Atom::unknown(m));
    }
    throw UnknownSymbolError(n, tok.pos, symbols_.registry());
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
  const SymbolTable& symbols_;
};

}  // namespace

Expr parse(std::string_view text, const SymbolTable& symbols) { return Parser(text, symbols).run(); }

}  // namespace clf
