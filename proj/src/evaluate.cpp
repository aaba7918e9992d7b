#include "clforge/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "clforge/format.hpp"

namespace clf {

FunctionModel FunctionModel::constant(double c) {
  FunctionModel m;
  m.kind_ = Kind::Constant;
  m.a_ = c;
  return m;
}

FunctionModel FunctionModel::power(double n, double c) {
  FunctionModel m;
  m.kind_ = Kind::Power;
  m.a_ = n;
  m.c_ = c;
  return m;
}

FunctionModel FunctionModel::exponential(double a, double c) {
  FunctionModel m;
  m.kind_ = Kind::Exponential;
  m.a_ = a;
  m.c_ = c;
  return m;
}

FunctionModel FunctionModel::polynomial(std::vector<double> coef) {
  FunctionModel m;
  m.kind_ = Kind::Polynomial;
  m.ys_ = std::move(coef);
  return m;
}

FunctionModel FunctionModel::table(std::vector<double> u, std::vector<double> f) {
  if (u.size() != f.size() || u.size() < 2) throw std::invalid_argument("table needs at least two (u, f) samples");
  if (!std::is_sorted(u.begin(), u.end())) throw std::invalid_argument("table abscissae must be increasing");
  FunctionModel m;
  m.kind_ = Kind::Table;
  m.xs_ = std::move(u);
  m.ys_ = std::move(f);
  return m;
}

FunctionModel FunctionModel::scaled(const FunctionModel& base, double scale, int shift) {
  FunctionModel m;
  m.kind_ = Kind::Scaled;
  m.c_ = scale;
  m.shift_ = shift;
  m.base_ = std::make_shared<const FunctionModel>(base);
  return m;
}

FunctionModel FunctionModel::from_json(const nlohmann::json& j) {
  if (j.is_number()) return constant(j.get<double>());
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return constant(j.at("value").get<double>());
  if (kind == "power") return power(j.at("n").get<double>(), j.value("c", 1.0));
  if (kind == "exponential") return exponential(j.value("a", 1.0), j.value("c", 1.0));
  if (kind == "polynomial") return polynomial(j.at("coef").get<std::vector<double>>());
  if (kind == "table") return table(j.at("u").get<std::vector<double>>(), j.at("f").get<std::vector<double>>());
  if (kind == "scaled") return scaled(from_json(j.at("base")), j.value("scale", 1.0), j.value("shift", 0));
  throw std::invalid_argument("unknown function model '" + kind + "'");
}

nlohmann::json FunctionModel::to_json() const {
  switch (kind_) {
    case Kind::Constant: return {{"kind", "constant"}, {"value", a_}};
    case Kind::Power: return {{"kind", "power"}, {"n", a_}, {"c", c_}};
    case Kind::Exponential: return {{"kind", "exponential"}, {"a", a_}, {"c", c_}};
    case Kind::Polynomial: return {{"kind", "polynomial"}, {"coef", ys_}};
    case Kind::Table: return {{"kind", "table"}, {"u", xs_}, {"f", ys_}};
    case Kind::Scaled: return {{"kind", "scaled"}, {"scale", c_}, {"shift", shift_}, {"base", base_->to_json()}};
  }
  return {};
}

double FunctionModel::value(double u, int n) const {
  switch (kind_) {
    case Kind::Constant:
      if (n < 0) return a_ * u;
      return n == 0 ? a_ : 0.0;
    case Kind::Power: {
      if (n < 0) {
        if (a_ == -1.0) return c_ * std::log(u);
        return c_ * std::pow(u, a_ + 1) / (a_ + 1);
      }
      double f = c_;
      for (int k = 0; k < n; ++k) f *= a_ - k;
      if (f == 0.0) return 0.0;
      const double e = a_ - n;
      if (e >= 0 && e <= 8 && e == std::floor(e)) {
        double r = f;
        for (int k = 0; k < static_cast<int>(e); ++k) r *= u;
        return r;
      }
      return f * std::pow(u, e);
    }
    case Kind::Exponential:
      if (n < 0) return c_ / a_ * (std::exp(a_ * u) - 1.0);
      return c_ * std::pow(a_, n) * std::exp(a_ * u);
    case Kind::Polynomial: {
      std::vector<double> p = ys_;
      if (n < 0) {
        p.insert(p.begin(), 0.0);
        for (std::size_t i = 1; i < p.size(); ++i) p[i] /= static_cast<double>(i);
      }
      for (int k = 0; k < n && !p.empty(); ++k) {
        for (std::size_t i = 1; i < p.size(); ++i) p[i - 1] = p[i] * static_cast<double>(i);
        p.pop_back();
      }
      double r = 0.0;
      for (auto it = p.rbegin(); it != p.rend(); ++it) r = r * u + *it;
      return r;
    }
    case Kind::Table: {
      if (n < 0 || n > 1) throw std::domain_error("table models provide derivative orders 0 and 1 only");
      auto it = std::upper_bound(xs_.begin(), xs_.end(), u);
      std::size_t i = it == xs_.begin() ? 0 : static_cast<std::size_t>(it - xs_.begin()) - 1;
      i = std::min(i, xs_.size() - 2);
      const double slope = (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
      return n == 1 ? slope : ys_[i] + slope * (u - xs_[i]);
    }
    case Kind::Scaled: return c_ * base_->value(u, n + shift_);
  }
  return 0.0;
}

double ConstrainedModel::value(double t, double s, int nt, int ns) const {
  const double phase = c * s + theta + ns * M_PI / 2;
  return std::pow(K * c * c, nt) * std::exp(K * c * c * t) * std::pow(c, ns) * std::cos(phase);
}

MissingAssignment::MissingAssignment(const Atom& a)
    : std::runtime_error("no value assigned to '" + to_plain(a) + "'"), atom_(a) {}

double JetPoint::atom_value(const Atom& a) const {
  auto it = values.find(a);
  if (it != values.end()) return it->second;
  switch (a.kind) {
    case AtomKind::Func: {
      auto f = functions.find(a.name);
      if (f == functions.end()) throw MissingAssignment(a);
      return f->second.value(atom_value(Atom::jet('u')), a.func_order());
    }
    case AtomKind::Trig: {
      const double w = atom_value(Atom::param(a.name));
      const double s = atom_value(Atom::var(a.axis()));
      switch (a.trig_fn()) {
        case TrigFn::Sin: return std::sin(w * s);
        case TrigFn::Cos: return std::cos(w * s);
        case TrigFn::Exp: return std::exp(a.trig_sign() * w * s);
      }
      return 0.0;
    }
    case AtomKind::Constrained: {
      auto m = constrained.find(a.name);
      if (m == constrained.end()) throw MissingAssignment(a);
      const MultiIndex idx = a.multi();
      return m->second.value(atom_value(Atom::var(Axis::t)), atom_value(Atom::var(m->second.space)),
                             idx[0], idx[axis_index(m->second.space)]);
    }
    default: throw MissingAssignment(a);
  }
}

double evaluate(const Expr& e, const JetPoint& p) {
  std::map<Atom, double> cache;
  double sum = 0.0;
  for (const auto& [m, c] : e.terms()) {
    double t = c.get_d();
    for (const auto& [a, k] : m.factors()) {
      auto it = cache.find(a);
      if (it == cache.end()) it = cache.emplace(a, p.atom_value(a)).first;
      t *= k == 1 ? it->second : std::pow(it->second, k);
    }
    sum += t;
  }
  return sum;
}

CompiledExpr::CompiledExpr(const Expr& e, const std::map<Atom, int>& slots) {
  for (const auto& [m, c] : e.terms()) {
    Term t{c.get_d(), {}};
    for (const auto& [a, k] : m.factors()) {
      auto it = slots.find(a);
      if (it == slots.end()) throw MissingAssignment(a);
      t.factors.emplace_back(it->second, k);
    }
    terms_.push_back(std::move(t));
  }
}

double CompiledExpr::operator()(const double* v) const {
  double sum = 0.0;
  for (const Term& t : terms_) {
    double p = t.coef;
    for (const auto& [s, k] : t.factors) {
      double x = v[s];
      for (int i = 0; i < k; ++i) p *= x;
    }
    sum += p;
  }
  return sum;
}

std::map<Atom, int> slot_map(const std::vector<Expr>& exprs) {
  std::map<Atom, int> slots;
  for (const Expr& e : exprs)
    for (const Atom& a : e.atoms()) slots.emplace(a, static_cast<int>(slots.size()));
  return slots;
}

}  // namespace clf
