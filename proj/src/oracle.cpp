#include "clforge/oracle.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "clforge/euler.hpp"
#include "clforge/format.hpp"
#include "clforge/series.hpp"

namespace clf {

int thread_cap() {
  int n = 1;
#ifdef _OPENMP
  n = omp_get_max_threads();
#endif
  if (const char* env = std::getenv("CONSLAW_FORGE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = cap;
  }
  return std::max(n, 1);
}

nlohmann::json OracleReport::to_json() const {
  return {{"method", method},          {"samples", samples},     {"max_residual", max_residual},
          {"worst_sample", worst_sample}, {"tolerance", tolerance}, {"passed", passed()}};
}

namespace {

std::mt19937_64 sample_rng(std::uint64_t seed, int sample) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sample), 0x5eedu};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

FunctionModel random_model(std::mt19937_64& rng) {
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: return FunctionModel::power(uniform(rng, 1.0, 2.0), uniform(rng, 0.5, 1.5));
    case 1: {
      const double a = uniform(rng, 0.2, 0.6) * (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
      return FunctionModel::exponential(a, uniform(rng, 0.5, 1.5));
    }
    default:
      return FunctionModel::polynomial(
          {uniform(rng, 0.5, 1.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.3, 0.3), uniform(rng, -0.2, 0.2)});
  }
}

std::vector<double> run_samples(int samples, const std::function<double(int)>& body) {
  std::vector<double> out(static_cast<std::size_t>(std::max(samples, 0)), 0.0);
  std::vector<std::string> errors(out.size());
#pragma omp parallel for schedule(dynamic) num_threads(thread_cap())
  for (int i = 0; i < samples; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = body(i);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error(e);
  return out;
}

OracleReport summarize(const std::string& method, const std::vector<double>& r, double tol) {
  OracleReport rep;
  rep.method = method;
  rep.samples = static_cast<int>(r.size());
  rep.tolerance = tol;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double a = std::isnan(r[i]) ? INFINITY : std::abs(r[i]);
    if (rep.worst_sample < 0 || a > rep.max_residual) {
      rep.max_residual = a;
      rep.worst_sample = static_cast<int>(i);
    }
  }
  return rep;
}

}  // namespace

SampleModel::SampleModel(const DifferentialEquation& eq, const std::optional<Substitution>& s) : eq_(eq), s_(s) {}

JetPoint SampleModel::draw(std::uint64_t seed, int sample, const std::set<Atom>& atoms) const {
  auto rng = sample_rng(seed, sample);
  std::set<Atom> all = atoms;
  for (const Atom& a : eq_.F.atoms()) all.insert(a);
  for (Axis a : eq_.axes()) all.insert(Atom::var(a));
  if (s_) {
    for (const Atom& a : s_->phi.atoms()) all.insert(a);
    for (const auto& c : s_->constraints)
      for (const Atom& a : c.K.atoms()) all.insert(a);
  }
  for (const auto& [lhs, rhs] : eq_.relations)
    for (const Atom& a : rhs.atoms()) all.insert(a);

  JetPoint p;
  std::set<std::string> funcs, constrained;
  for (const Atom& a : all) {
    switch (a.kind) {
      case AtomKind::Var: p.set(a, a.axis() == Axis::t ? uniform(rng, 0.0, 0.3) : uniform(rng, -1.0, 1.0)); break;
      case AtomKind::Param:
        p.set(a, s_ && s_->is_family_atom(a) ? uniform(rng, -1.0, 1.0) : uniform(rng, 0.5, 1.5));
        break;
      case AtomKind::Jet:
        p.set(a, a.jet_order() == 0 ? uniform(rng, 0.8, 1.2) : uniform(rng, -1.0, 1.0));
        break;
      case AtomKind::Unknown: p.set(a, uniform(rng, -1.0, 1.0)); break;
      case AtomKind::Func: funcs.insert(a.name); break;
      case AtomKind::Constrained: constrained.insert(a.name); break;
      case AtomKind::Trig: break;
    }
  }
  if (!p.values.count(Atom::jet('u'))) p.set(Atom::jet('u'), uniform(rng, 0.8, 1.2));
  for (const auto& [lhs, rhs] : eq_.relations) funcs.erase(lhs.name);
  for (const std::string& f : funcs) p.functions[f] = random_model(rng);
  for (const auto& [lhs, rhs] : eq_.relations) {
    std::optional<Atom> base;
    for (const Atom& a : rhs.atoms())
      if (a.kind == AtomKind::Func) base = a;
    if (!base || rhs.size() != 1 || rhs.terms().begin()->first.degree(*base) != 1)
      throw std::invalid_argument("relation " + to_plain(Expr(lhs)) + " = " + to_plain(rhs) +
                                  " has no numeric model");
    if (!p.functions.count(base->name)) p.functions[base->name] = random_model(rng);
    const double scale = evaluate(rhs.coefficient(*base), p);
    p.functions[lhs.name] =
        FunctionModel::scaled(p.functions.at(base->name), scale, base->func_order() - lhs.func_order());
  }
  for (const std::string& name : constrained) {
    ConstrainedModel m;
    bool found = false;
    if (s_) {
      for (const auto& c : s_->constraints) {
        if (c.name != name) continue;
        m.K = evaluate(c.K, p);
        m.space = c.space;
        found = true;
      }
    }
    if (!found) throw std::invalid_argument("constrained symbol " + name + " has no declared constraint");
    m.c = uniform(rng, 0.5, 1.5);
    m.theta = uniform(rng, 0.0, 2 * std::numbers::pi);
    p.constrained[name] = m;
  }
  return p;
}

OracleReport jet_oracle(const Expr& e, const DifferentialEquation& eq, const std::optional<Substitution>& s,
                        const OracleOptions& opt) {
  if (e.any_atom([](const Atom& a) { return a.is_u_jet() && a.t_count() > 0; }))
    throw std::invalid_argument("jet oracle needs an expression free of t-derivatives of u");
  const SampleModel model(eq, s);
  const std::set<Atom> atoms = e.atoms();
  const auto r = run_samples(opt.samples, [&](int i) { return evaluate(e, model.draw(opt.seed, i, atoms)); });
  return summarize("jet", r, opt.tolerance);
}

namespace {

ConservedVector concrete(const ConservedVector& cv) {
  ConservedVector e = cv.v_form && cv.substitution ? eliminate_v(cv) : cv;
  for (const Expr& c : e.components)
    if (c.any_atom([](const Atom& a) { return a.is_v_jet(); }))
      throw std::invalid_argument("vector depends on a free v; supply a substitution");
  return e;
}

}  // namespace

OracleReport vector_jet_oracle(const ConservedVector& cv, const DifferentialEquation& eq, const OracleOptions& opt) {
  const ConservedVector e = concrete(cv);
  const DifferentialEquation eqb = e.substitution ? bind_equation(eq, *e.substitution) : eq;
  Expr d = eliminate_ut(divergence(e, eqb), eqb);
  if (e.substitution) d = e.substitution->apply_constraints(d);
  return jet_oracle(d, eqb, e.substitution, opt);
}

namespace {

int jet_weight(const Expr& e) {
  int w = 0;
  for (const Atom& a : e.atoms())
    if (a.kind == AtomKind::Jet) w = std::max(w, 2 * a.t_count() + a.jet_order() - a.t_count());
  return w;
}

}  // namespace

OracleReport series_oracle(const ConservedVector& cv, const DifferentialEquation& eq, const OracleOptions& opt) {
  const DifferentialEquation eqb = cv.substitution ? bind_equation(eq, *cv.substitution) : eq;
  if (!eqb.solved_ut) throw std::invalid_argument("series oracle needs the solved form u_t = ...");
  std::vector<Expr> comps;
  for (const Expr& c : cv.components) comps.push_back(apply_relations(c, eqb.relations));
  const bool uses_v = std::any_of(comps.begin(), comps.end(),
                                  [](const Expr& c) { return c.any_atom([](const Atom& a) { return a.is_v_jet(); }); });
  if (uses_v && !cv.substitution) throw std::invalid_argument("vector depends on a free v; supply a substitution");

  int W = 2;
  for (std::size_t i = 0; i < cv.axes.size(); ++i)
    W = std::max(W, jet_weight(comps[i]) + (cv.axes[i] == Axis::t ? 2 : 1));
  const auto space = std::make_shared<const SeriesSpace>(cv.axes, W);

  std::set<Atom> atoms;
  for (const Expr& c : comps)
    for (const Atom& a : c.atoms()) atoms.insert(a);
  const SampleModel model(eqb, cv.substitution);

  const auto r = run_samples(opt.samples, [&](int sample) {
    const JetPoint p = model.draw(opt.seed, sample, atoms);
    auto rng = sample_rng(opt.seed ^ 0x9e3779b97f4a7c15ull, sample);
    const double u0 = p.atom_value(Atom::jet('u'));

    Series U0(space);
    U0[0] = u0;
    for (std::size_t i = 1; i < space->size(); ++i)
      if (space->exponent(i)[0] == 0) U0[i] = uniform(rng, -0.5, 0.5);

    Series u = U0;
    std::optional<Series> phi;
    std::function<Series(const Atom&)> atom_series = [&](const Atom& a) -> Series {
      switch (a.kind) {
        case AtomKind::Var: return Series::coordinate(space, a.axis(), p.atom_value(a));
        case AtomKind::Param: return Series::constant(space, p.atom_value(a));
        case AtomKind::Func: {
          const FunctionModel& f = p.functions.at(a.name);
          const double base = u[0];
          return u.compose([&](int k) { return f.value(base, a.func_order() + k); });
        }
        case AtomKind::Trig: {
          const double w = p.atom_value(Atom::param(a.name));
          const double sign = a.trig_fn() == TrigFn::Exp ? a.trig_sign() : 1.0;
          const Series arg = Series::coordinate(space, a.axis(), p.atom_value(Atom::var(a.axis()))).scaled(sign * w);
          const double s0 = arg[0];
          switch (a.trig_fn()) {
            case TrigFn::Sin: return arg.compose([&](int k) { return std::sin(s0 + k * std::numbers::pi / 2); });
            case TrigFn::Cos: return arg.compose([&](int k) { return std::cos(s0 + k * std::numbers::pi / 2); });
            case TrigFn::Exp: return arg.compose([&](int) { return std::exp(s0); });
          }
          break;
        }
        case AtomKind::Constrained: {
          const ConstrainedModel& m = p.constrained.at(a.name);
          const double rate = m.K * m.c * m.c;
          const Series targ = Series::coordinate(space, Axis::t, p.atom_value(Atom::var(Axis::t))).scaled(rate);
          const Series sarg = Series::coordinate(space, m.space, p.atom_value(Atom::var(m.space))).scaled(m.c) +
                              Series::constant(space, m.theta);
          const double t0 = targ[0], s0 = sarg[0];
          const Series base = targ.compose([&](int) { return std::exp(t0); }) *
                              sarg.compose([&](int k) { return std::cos(s0 + k * std::numbers::pi / 2); });
          return base.derivative(a.multi());
        }
        case AtomKind::Jet:
          if (a.is_u_jet()) return u.derivative(a.multi());
          if (!phi) throw std::logic_error("v used before phi is available");
          return phi->derivative(a.multi());
        case AtomKind::Unknown: break;
      }
      throw std::invalid_argument("series oracle cannot model " + to_plain(a));
    };

    for (int it = 0; it <= W / 2 + 1; ++it) u = U0 + eval_series(*eqb.solved_ut, atom_series, space).integrate_t();
    if (cv.substitution) phi = eval_series(cv.substitution->phi, atom_series, space);

    double div = 0.0;
    for (std::size_t i = 0; i < cv.axes.size(); ++i)
      div += eval_series(comps[i], atom_series, space).coefficient(plus(MultiIndex{}, cv.axes[i]));
    return div;
  });
  return summarize("series", r, opt.tolerance);
}

OracleReport selfadjoint_oracle(const DifferentialEquation& eq, const Substitution& s, const OracleOptions& opt) {
  const DifferentialEquation eqb = bind_equation(eq, s);
  const SelfAdjointCheck chk = check_substitution(eq, s);
  const DifferentialEquation adj = adjoint_equation(eqb);
  Expr e = substitute(adj.F, {{Atom::jet('v'), s.phi}}) - chk.lambda * eqb.F;
  e = s.apply_constraints(apply_relations(eliminate_ut(apply_relations(e, eqb.relations), eqb), eqb.relations));
  return jet_oracle(e, eqb, s, opt);
}

}  // namespace clf
