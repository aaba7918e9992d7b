#include "clforge/format.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace clf {

namespace {

// Display order inside a product: constants, coordinates, functions, jets.
int display_rank(const Atom& a) {
  switch (a.kind) {
    case AtomKind::Param: return 0;
    case AtomKind::Var: return 1;
    case AtomKind::Trig: return 2;
    case AtomKind::Constrained: return 3;
    case AtomKind::Func: return 4;
    case AtomKind::Unknown: return 5;
    case AtomKind::Jet: return 6;
  }
  return 7;
}

std::vector<Monomial::Factor> display_factors(const Monomial& m) {
  std::vector<Monomial::Factor> f = m.factors();
  std::stable_sort(f.begin(), f.end(), [](const auto& a, const auto& b) {
    return display_rank(a.first) < display_rank(b.first);
  });
  return f;
}

std::string unknown_index(const Atom& a) {
  const UnknownIndex m = a.unknown_index();
  std::string s;
  for (Axis ax : kAllAxes) s.append(static_cast<std::size_t>(m[axis_index(ax)]), axis_char(ax));
  s.append(static_cast<std::size_t>(m[kUnknownU]), 'u');
  return s;
}

std::string args_string(std::uint8_t mask) {
  std::string s;
  for (Axis ax : kAllAxes)
    if (mask & axis_bit(ax)) s += axis_char(ax);
  return s;
}

const char* trig_name(TrigFn fn) {
  switch (fn) {
    case TrigFn::Sin: return "sin";
    case TrigFn::Cos: return "cos";
    case TrigFn::Exp: return "exp";
  }
  return "?";
}

std::string latex_name(const std::string& n) {
  static const char* kGreek[] = {"alpha", "beta",  "gamma", "delta", "sigma", "omega",
                                 "lambda", "pi",   "mu",    "theta", "kappa"};
  for (const char* g : kGreek)
    if (n == g) return std::string("\\") + g;
  if (n == "lam") return "\\lambda";
  std::size_t split = n.size();
  while (split > 0 && std::isdigit(static_cast<unsigned char>(n[split - 1]))) --split;
  if (split > 0 && split < n.size()) return latex_name(n.substr(0, split)) + "_{" + n.substr(split) + "}";
  return n;
}

template <class AtomFn>
std::string render(const Expr& e, AtomFn atom_text, const char* times, bool latex) {
  if (e.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  std::vector<std::pair<Monomial, Rational>> terms(e.terms().begin(), e.terms().end());
  std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
    const auto fa = display_factors(a.first), fb = display_factors(b.first);
    return std::lexicographical_compare(fa.begin(), fa.end(), fb.begin(), fb.end(), [](const auto& x, const auto& y) {
      if (display_rank(x.first) != display_rank(y.first)) return display_rank(x.first) < display_rank(y.first);
      if (x.first != y.first) return x.first < y.first;
      return x.second > y.second;
    });
  });
  for (const auto& [m, c] : terms) {
    const bool negative = sgn(c) < 0;
    Rational mag = abs(c);
    if (first) {
      if (negative) os << '-';
    } else {
      os << (negative ? " - " : " + ");
    }
    first = false;
    std::vector<std::string> parts;
    if (m.is_one() || mag != 1) {
      if (latex && mag.get_den() != 1) {
        parts.push_back("\\frac{" + mag.get_num().get_str() + "}{" + mag.get_den().get_str() + "}");
      } else {
        parts.push_back(mag.get_str());
      }
    }
    for (const auto& [a, p] : display_factors(m)) {
      std::string s = atom_text(a);
      if (p != 1) s += latex ? "^{" + std::to_string(p) + "}" : "^" + std::to_string(p);
      parts.push_back(s);
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) os << times;
      os << parts[i];
    }
  }
  return os.str();
}

}  // namespace

std::string to_plain(const Atom& a) {
  switch (a.kind) {
    case AtomKind::Var: return std::string(1, axis_char(a.axis()));
    case AtomKind::Param: return a.name;
    case AtomKind::Func: {
      if (a.func_order() < 0) return std::string(1, static_cast<char>(std::toupper(a.name[0]))) + "(u)";
      if (a.func_order() == 0) return a.name + "(u)";
      return a.name + std::to_string(a.func_order()) + "(u)";
    }
    case AtomKind::Trig: {
      std::string arg = a.name + "*" + axis_char(a.axis());
      if (a.trig_fn() == TrigFn::Exp && a.trig_sign() < 0) arg = "-" + arg;
      return std::string(trig_name(a.trig_fn())) + "(" + arg + ")";
    }
    case AtomKind::Constrained: {
      const std::string idx = index_string(a.multi());
      std::string args;
      for (char c : args_string(a.mask)) {
        if (!args.empty()) args += ',';
        args += c;
      }
      return a.name + (idx.empty() ? "" : "_" + idx) + "(" + args + ")";
    }
    case AtomKind::Unknown: {
      const std::string idx = unknown_index(a);
      return idx.empty() ? "phi" : "phi_" + idx;
    }
    case AtomKind::Jet: {
      const std::string idx = index_string(a.multi());
      return idx.empty() ? a.name : a.name + "_" + idx;
    }
  }
  return "?";
}

std::string to_latex(const Atom& a) {
  switch (a.kind) {
    case AtomKind::Var: return std::string(1, axis_char(a.axis()));
    case AtomKind::Param: return latex_name(a.name);
    case AtomKind::Func: {
      const int n = a.func_order();
      if (n < 0) return "\\mathcal{" + std::string(1, static_cast<char>(std::toupper(a.name[0]))) + "}(u)";
      if (n <= 3) return a.name + std::string(static_cast<std::size_t>(n), '\'') + "(u)";
      return a.name + "^{(" + std::to_string(n) + ")}(u)";
    }
    case AtomKind::Trig: {
      const std::string arg = latex_name(a.name) + " " + axis_char(a.axis());
      if (a.trig_fn() == TrigFn::Exp) return std::string("e^{") + (a.trig_sign() < 0 ? "-" : "") + arg + "}";
      return std::string("\\") + trig_name(a.trig_fn()) + "(" + arg + ")";
    }
    case AtomKind::Constrained: {
      const std::string idx = index_string(a.multi());
      return latex_name(a.name) + (idx.empty() ? "" : "_{" + idx + "}");
    }
    case AtomKind::Unknown: {
      const std::string idx = unknown_index(a);
      return idx.empty() ? "\\varphi" : "\\varphi_{" + idx + "}";
    }
    case AtomKind::Jet: {
      const std::string idx = index_string(a.multi());
      return idx.empty() ? a.name : a.name + "_{" + idx + "}";
    }
  }
  return "?";
}

std::string to_plain(const Expr& e) {
  return render(e, [](const Atom& a) { return to_plain(a); }, "*", false);
}

std::string to_latex(const Expr& e) {
  return render(e, [](const Atom& a) { return to_latex(a); }, " ", true);
}

nlohmann::json to_json(const Atom& a) {
  using nlohmann::json;
  switch (a.kind) {
    case AtomKind::Var: return json{{"kind", "var"}, {"name", std::string(1, axis_char(a.axis()))}};
    case AtomKind::Param: return json{{"kind", "param"}, {"name", a.name}};
    case AtomKind::Func: return json{{"kind", "func"}, {"name", a.name}, {"order", a.func_order()}};
    case AtomKind::Trig:
      return json{{"kind", "trig"},
                  {"fn", trig_name(a.trig_fn())},
                  {"freq", a.name},
                  {"axis", std::string(1, axis_char(a.axis()))},
                  {"sign", a.trig_sign()}};
    case AtomKind::Constrained:
      return json{{"kind", "constrained"}, {"name", a.name}, {"args", args_string(a.mask)},
                  {"index", index_string(a.multi())}};
    case AtomKind::Unknown: return json{{"kind", "unknown"}, {"index", unknown_index(a)}};
    case AtomKind::Jet: return json{{"kind", "jet"}, {"dep", a.name}, {"index", index_string(a.multi())}};
  }
  return {};
}

nlohmann::json to_json(const Expr& e) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [m, c] : e.terms()) {
    nlohmann::json factors = nlohmann::json::array();
    for (const auto& [a, p] : m.factors()) factors.push_back({{"atom", to_json(a)}, {"pow", p}});
    terms.push_back({{"coef", c.get_str()}, {"factors", factors}});
  }
  return terms;
}

Atom atom_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  auto axis_of = [](const std::string& s) {
    auto a = s.size() == 1 ? axis_from_char(s[0]) : std::nullopt;
    if (!a) throw std::invalid_argument("bad axis '" + s + "'");
    return *a;
  };
  auto multi_of = [](const std::string& s) {
    auto m = parse_index(s);
    if (!m) throw std::invalid_argument("bad index '" + s + "'");
    return *m;
  };
  if (kind == "var") return Atom::var(axis_of(j.at("name").get<std::string>()));
  if (kind == "param") return Atom::param(j.at("name").get<std::string>());
  if (kind == "func") return Atom::func(j.at("name").get<std::string>(), j.at("order").get<int>());
  if (kind == "trig") {
    const std::string fn = j.at("fn").get<std::string>();
    const TrigFn f = fn == "sin" ? TrigFn::Sin : fn == "cos" ? TrigFn::Cos : TrigFn::Exp;
    if (fn != "sin" && fn != "cos" && fn != "exp") throw std::invalid_argument("bad trig fn '" + fn + "'");
    return Atom::trig(f, j.at("freq").get<std::string>(), axis_of(j.at("axis").get<std::string>()),
                      j.value("sign", 1));
  }
  if (kind == "constrained") {
    std::uint8_t mask = 0;
    for (char c : j.at("args").get<std::string>()) mask |= axis_bit(axis_of(std::string(1, c)));
    return Atom::constrained(j.at("name").get<std::string>(), mask, multi_of(j.at("index").get<std::string>()));
  }
  if (kind == "unknown") {
    UnknownIndex m{};
    for (char c : j.at("index").get<std::string>()) {
      if (c == 'u') {
        ++m[kUnknownU];
      } else {
        ++m[axis_index(axis_of(std::string(1, c)))];
      }
    }
    return Atom::unknown(m);
  }
  if (kind == "jet") {
    const std::string dep = j.at("dep").get<std::string>();
    if (dep != "u" && dep != "v") throw std::invalid_argument("bad dependent variable '" + dep + "'");
    return Atom::jet(dep[0], multi_of(j.value("index", std::string())));
  }
  throw std::invalid_argument("unknown atom kind '" + kind + "'");
}

Expr expr_from_json(const nlohmann::json& j) {
  Expr e;
  for (const auto& t : j) {
    Monomial m;
    for (const auto& f : t.at("factors")) m = m * Monomial(atom_from_json(f.at("atom")), f.at("pow").get<int>());
    Rational c(t.at("coef").get<std::string>());
    c.canonicalize();
    e.add_term(m, c);
  }
  return e;
}

}  // namespace clf
