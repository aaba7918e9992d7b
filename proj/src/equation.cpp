#include "clforge/equation.hpp"

#include <fstream>
#include <sstream>

#include "clforge/format.hpp"

namespace clf {

std::vector<Axis> DifferentialEquation::axes() const {
  std::vector<Axis> r{Axis::t};
  r.insert(r.end(), spatial.begin(), spatial.end());
  return r;
}

bool DifferentialEquation::has_axis(Axis a) const {
  if (a == Axis::t) return true;
  for (Axis s : spatial)
    if (s == a) return true;
  return false;
}

Expr apply_relations(const Expr& e, const std::map<Atom, Expr>& relations) {
  if (relations.empty()) return e;
  return map_atoms(e, [&](const Atom& a) -> std::optional<Expr> {
    if (a.kind != AtomKind::Func) return std::nullopt;
    for (const auto& [lhs, rhs] : relations) {
      if (lhs.name != a.name || a.func_order() < lhs.func_order()) continue;
      Expr r = rhs;
      for (int k = lhs.func_order(); k < a.func_order(); ++k) r = jet_partial(r, Atom::jet('u'));
      return r;
    }
    return std::nullopt;
  });
}

Expr ut_coefficient(const DifferentialEquation& eq) { return eq.F.coefficient(Atom::jet('u', {1, 0, 0, 0})); }

DifferentialEquation make_equation(const Expr& F, std::vector<Axis> spatial, std::map<Atom, Expr> relations,
                                   std::string name) {
  DifferentialEquation eq;
  eq.name = std::move(name);
  eq.spatial = std::move(spatial);
  eq.relations = std::move(relations);
  eq.F = apply_relations(F, eq.relations);
  for (const Atom& a : eq.F.atoms()) {
    if (a.is_v_jet()) throw std::invalid_argument("the equation must not contain v");
    if (a.kind == AtomKind::Unknown) throw std::invalid_argument("the equation must not contain phi");
    if (a.is_u_jet() && a.jet_order() > 2)
      throw std::invalid_argument("jet " + to_plain(a) + " exceeds second order");
    if (a.is_u_jet()) {
      for (Axis ax : kAllAxes)
        if (a.multi()[axis_index(ax)] && !eq.has_axis(ax))
          throw std::invalid_argument("jet " + to_plain(a) + " uses an undeclared variable");
    }
  }
  const Atom ut = Atom::jet('u', {1, 0, 0, 0});
  const Expr c = eq.F.coefficient(ut);
  const Expr rest = eq.F - c * Expr(ut);
  auto cq = c.as_rational();
  const bool ut_elsewhere = rest.any_atom([](const Atom& a) { return a.is_u_jet() && a.t_count() > 0; });
  if (cq && sgn(*cq) != 0 && !ut_elsewhere && eq.F.degree(ut) == 1) eq.solved_ut = rest.scaled(-1 / *cq);
  return eq;
}

Expr eliminate_ut(const Expr& e, const DifferentialEquation& eq) {
  if (!eq.solved_ut) throw std::logic_error("equation has no solved form for u_t");
  Expr cur = e;
  std::map<MultiIndex, Expr> cache;
  for (int guard = 0; guard < 64; ++guard) {
    bool found = false;
    for (const Atom& a : cur.atoms())
      if (a.is_u_jet() && a.t_count() > 0) found = true;
    if (!found) return cur;
    cur = map_atoms(cur, [&](const Atom& a) -> std::optional<Expr> {
      if (!a.is_u_jet() || a.t_count() == 0) return std::nullopt;
      MultiIndex m = a.multi();
      m[0] -= 1;
      auto it = cache.find(m);
      if (it == cache.end()) it = cache.emplace(m, total_derivative(*eq.solved_ut, m)).first;
      return it->second;
    });
  }
  throw std::logic_error("t-derivative elimination did not terminate");
}

EquationFileError::EquationFileError(const std::string& what, int line)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if ((c == ' ' || c == '\t' || (c == ',' && depth == 0)) && depth == 0) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

DifferentialEquation parse_equation_file(const std::string& text) {
  SymbolTable symbols = SymbolTable::standard();
  std::vector<Axis> spatial{Axis::x, Axis::y, Axis::z};
  std::string name;
  std::vector<std::pair<std::string, int>> relation_lines;
  std::string equation;
  int equation_line = 0;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw EquationFileError("expected 'key: value'", line_no);
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key == "name") {
      name = value;
    } else if (key == "vars") {
      spatial.clear();
      bool has_t = false;
      for (const std::string& w : words(value)) {
        auto a = w.size() == 1 ? axis_from_char(w[0]) : std::nullopt;
        if (!a) throw EquationFileError("unknown independent variable '" + w + "'", line_no);
        if (*a == Axis::t) {
          has_t = true;
        } else {
          spatial.push_back(*a);
        }
      }
      if (!has_t) throw EquationFileError("vars must include t", line_no);
      if (spatial.empty()) throw EquationFileError("vars must include a spatial variable", line_no);
    } else if (key == "params") {
      for (const std::string& w : words(value)) symbols.declare_param(w);
    } else if (key == "constrained") {
      for (const std::string& w : words(value)) {
        const auto open = w.find('(');
        if (open == std::string::npos || w.back() != ')')
          throw EquationFileError("constrained symbols are declared as name(t,y)", line_no);
        std::uint8_t mask = 0;
        for (char c : w.substr(open + 1, w.size() - open - 2)) {
          if (c == ',' || c == ' ') continue;
          auto a = axis_from_char(c);
          if (!a) throw EquationFileError("bad argument list in '" + w + "'", line_no);
          mask |= axis_bit(*a);
        }
        symbols.declare_constrained(w.substr(0, open), mask);
      }
    } else if (key == "relation") {
      relation_lines.emplace_back(value, line_no);
    } else if (key == "equation") {
      equation = value;
      equation_line = line_no;
    } else {
      throw EquationFileError("unknown key '" + key + "'", line_no);
    }
  }
  if (equation.empty()) throw EquationFileError("missing 'equation:' line", line_no);

  std::map<Atom, Expr> relations;
  for (const auto& [rel, ln] : relation_lines) {
    const auto eqpos = rel.find('=');
    if (eqpos == std::string::npos) throw EquationFileError("relation needs '='", ln);
    try {
      const Expr lhs = parse(rel.substr(0, eqpos), symbols);
      const Expr rhs = parse(rel.substr(eqpos + 1), symbols);
      if (lhs.size() != 1 || lhs.terms().begin()->first.factors().size() != 1 ||
          lhs.terms().begin()->first.factors()[0].first.kind != AtomKind::Func)
        throw EquationFileError("relation must define a function symbol", ln);
      relations[lhs.terms().begin()->first.factors()[0].first] = rhs;
    } catch (const ParseError& e) {
      throw EquationFileError(std::string("relation: ") + e.what(), ln);
    }
  }

  Expr F;
  std::string convention;
  try {
    const auto eqpos = equation.find('=');
    if (eqpos == std::string::npos) {
      F = parse(equation, symbols);
      convention = "F as given";
    } else {
      const Expr lhs = parse(equation.substr(0, eqpos), symbols);
      const Expr rhs = parse(equation.substr(eqpos + 1), symbols);
      if (rhs.is_zero()) {
        F = lhs;
        convention = "F = LHS";
      } else {
        F = rhs - lhs;
        convention = "F = RHS - LHS";
      }
    }
  } catch (const ParseError& e) {
    throw EquationFileError(std::string("equation: ") + e.what(), equation_line);
  }
  try {
    DifferentialEquation eq = make_equation(F, spatial, relations, name);
    eq.symbols = symbols;
    eq.convention = convention;
    return eq;
  } catch (const std::invalid_argument& e) {
    throw EquationFileError(e.what(), equation_line);
  }
}

DifferentialEquation load_equation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EquationFileError("cannot open '" + path + "'", 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_equation_file(ss.str());
}

}  // namespace clf
