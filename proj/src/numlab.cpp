#include "clforge/numlab.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "clforge/format.hpp"
#include "clforge/oracle.hpp"
#include "clforge/parse.hpp"

namespace clf {

namespace {

constexpr double kDtFloor = 1e-12;

Boundary boundary_from(const std::string& s) {
  if (s == "periodic") return Boundary::Periodic;
  if (s == "zero_flux" || s == "zero-flux" || s == "neumann") return Boundary::ZeroFlux;
  throw ConfigError("unknown boundary '" + s + "' (periodic or zero_flux)");
}

FaceAverage face_from(const std::string& s) {
  if (s == "arithmetic") return FaceAverage::Arithmetic;
  if (s == "harmonic") return FaceAverage::Harmonic;
  throw ConfigError("unknown face average '" + s + "' (arithmetic or harmonic)");
}

const char* kCoefNames[3] = {"f", "g", "h"};

SymbolTable config_symbols(const SimulationConfig& c) {
  SymbolTable t = SymbolTable::standard();
  for (const auto& [k, v] : c.params) t.declare_param(k);
  return t;
}

JetPoint config_point(const SimulationConfig& c) {
  JetPoint p;
  p.set_param("pi", std::numbers::pi);
  for (const auto& [k, v] : c.params) p.set_param(k, v);
  p.functions = c.functions;
  return p;
}

std::vector<double> sample_expr(const Expr& e, const SimulationConfig& c, const Grid& g, double t) {
  JetPoint p = config_point(c);
  p.set_var(Axis::t, t);
  std::vector<double> out(g.size());
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) {
        const int idx[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) p.set_var(kSpatialAxes[a], a < g.dims ? g.center(a, idx[a]) : 0.0);
        out[g.index(i, j, k)] = evaluate(e, p);
      }
  return out;
}

}  // namespace

SimulationConfig SimulationConfig::from_json(const nlohmann::json& j) {
  SimulationConfig c;
  try {
    c.dims = j.at("dims").get<int>();
    if (c.dims < 1 || c.dims > 3) throw ConfigError("dims must be 1, 2 or 3");
    auto read3 = [&](const char* key, auto& dst) {
      if (!j.contains(key)) return;
      const auto& arr = j.at(key);
      if (!arr.is_array() || static_cast<int>(arr.size()) != c.dims)
        throw ConfigError(std::string(key) + " needs one entry per dimension");
      for (int a = 0; a < c.dims; ++a) arr[static_cast<std::size_t>(a)].get_to(dst[static_cast<std::size_t>(a)]);
    };
    if (!j.contains("n")) throw ConfigError("missing grid sizes 'n'");
    read3("n", c.n);
    read3("lower", c.lower);
    read3("upper", c.upper);
    for (int a = c.dims; a < 3; ++a) c.n[static_cast<std::size_t>(a)] = 1;
    c.T = j.value("T", c.T);
    if (j.contains("dt")) c.dt = j.at("dt").get<double>();
    c.safety = j.value("safety", c.safety);
    c.boundary = boundary_from(j.value("boundary", std::string("zero_flux")));
    c.face = face_from(j.value("face", std::string("arithmetic")));
    if (j.contains("functions"))
      for (const auto& [k, v] : j.at("functions").items()) c.functions[k] = FunctionModel::from_json(v);
    if (j.contains("params"))
      for (const auto& [k, v] : j.at("params").items()) c.params[k] = v.get<double>();
    if (j.contains("initial")) {
      if (j.at("initial").is_array()) {
        c.initial_samples = j.at("initial").get<std::vector<double>>();
      } else {
        c.initial = j.at("initial").get<std::string>();
      }
    }
    if (j.contains("exact")) {
      c.exact = j.at("exact").at("expr").get<std::string>();
      c.exact_decay = j.at("exact").value("decay", 0.0);
    }
    c.snapshot_every = j.value("snapshot_every", 0);
    if (j.contains("vectors")) c.vectors = j.at("vectors").get<std::vector<std::string>>();
    if (j.contains("study")) {
      c.study_levels = j.at("study").value("levels", 3);
      c.study_mode = j.at("study").value("mode", std::string("space"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

nlohmann::json SimulationConfig::to_json() const {
  nlohmann::json j;
  j["dims"] = dims;
  std::vector<int> nn(n.begin(), n.begin() + dims);
  std::vector<double> lo(lower.begin(), lower.begin() + dims), hi(upper.begin(), upper.begin() + dims);
  j["n"] = nn;
  j["lower"] = lo;
  j["upper"] = hi;
  j["T"] = T;
  if (dt) j["dt"] = *dt;
  j["safety"] = safety;
  j["boundary"] = boundary == Boundary::Periodic ? "periodic" : "zero_flux";
  j["face"] = face == FaceAverage::Arithmetic ? "arithmetic" : "harmonic";
  j["functions"] = nlohmann::json::object();
  for (const auto& [k, v] : functions) j["functions"][k] = v.to_json();
  j["params"] = params;
  if (initial_samples.empty()) {
    j["initial"] = initial;
  } else {
    j["initial"] = initial_samples;
  }
  if (exact) j["exact"] = {{"expr", *exact}, {"decay", exact_decay}};
  j["snapshot_every"] = snapshot_every;
  j["vectors"] = vectors;
  if (study_levels) j["study"] = {{"levels", study_levels}, {"mode", study_mode}};
  return j;
}

void SimulationConfig::validate() const {
  if (dims < 1 || dims > 3) throw ConfigError("dims must be 1, 2 or 3");
  for (int a = 0; a < dims; ++a) {
    if (n[static_cast<std::size_t>(a)] < 4) throw ConfigError("each used axis needs at least 4 cells");
    if (!(upper[static_cast<std::size_t>(a)] > lower[static_cast<std::size_t>(a)]))
      throw ConfigError("upper bound must exceed lower bound on every axis");
    if (dims == 3 && n[static_cast<std::size_t>(a)] > 64)
      throw ConfigError("3D runs are limited to 64 cells per axis (got " + std::to_string(n[static_cast<std::size_t>(a)]) + ")");
    if (!functions.count(kCoefNames[a])) throw ConfigError(std::string("missing coefficient model '") + kCoefNames[a] + "'");
  }
  if (!(T > 0)) throw ConfigError("T must be positive");
  if (dt && !(*dt > 0)) throw ConfigError("dt must be positive");
  if (!(safety > 0 && safety <= 1)) throw ConfigError("safety must lie in (0, 1]");
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be non-negative");
  if (study_levels && study_levels < 3) throw ConfigError("a convergence study needs at least 3 levels");
  if (study_mode != "space" && study_mode != "time") throw ConfigError("study mode must be space or time");
  if (!initial_samples.empty()) {
    std::size_t cells = 1;
    for (int a = 0; a < dims; ++a) cells *= static_cast<std::size_t>(n[static_cast<std::size_t>(a)]);
    if (initial_samples.size() != cells)
      throw ConfigError("initial samples: got " + std::to_string(initial_samples.size()) + " values for " +
                        std::to_string(cells) + " cells");
  }
  try {
    const SymbolTable t = config_symbols(*this);
    parse(initial, t);
    if (exact) parse(*exact, t);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("initial/exact expression: ") + e.what());
  }
}

SimulationConfig SimulationConfig::refined(int factor) const {
  if (factor != 1 && !initial_samples.empty())
    throw ConfigError("grid refinement needs the initial condition as an expression");
  SimulationConfig c = *this;
  for (int a = 0; a < dims; ++a) c.n[static_cast<std::size_t>(a)] *= factor;
  return c;
}

const FunctionModel& SimulationConfig::coefficient(int axis) const { return functions.at(kCoefNames[axis]); }

SimulationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return SimulationConfig::from_json(j);
}

Grid::Grid(const SimulationConfig& c) : dims(c.dims), n(c.n), lower(c.lower) {
  for (int a = 0; a < 3; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    h[ua] = a < dims ? (c.upper[ua] - c.lower[ua]) / n[ua] : 1.0;
  }
  stride = {static_cast<std::size_t>(n[1]) * n[2], static_cast<std::size_t>(n[2]), 1};
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dims; ++a) v *= h[static_cast<std::size_t>(a)];
  return v;
}

Problem::Problem(const SimulationConfig& c) : grid(c), boundary(c.boundary), face(c.face) {
  for (int a = 0; a < c.dims; ++a) coef[static_cast<std::size_t>(a)] = &c.coefficient(a);
  auto q = c.functions.find("q");
  if (q != c.functions.end()) source = &q->second;
}

namespace {

inline double face_coef(const FunctionModel& f, FaceAverage mode, double ul, double ur) {
  if (mode == FaceAverage::Arithmetic) return f.value(0.5 * (ul + ur));
  const double fl = f.value(ul), fr = f.value(ur);
  const double s = fl + fr;
  return s == 0.0 ? 0.0 : 2.0 * fl * fr / s;
}

// Flux through the upper face of cell c along axis a; zero at a closed wall.
inline double face_flux(const Problem& p, const std::vector<double>& u, std::size_t c, int a) {
  const Grid& g = p.grid;
  const std::size_t s = g.stride[a];
  const int na = g.n[a];
  const int i = static_cast<int>((c / s) % static_cast<std::size_t>(na));
  std::size_t r = c + s;
  if (i + 1 == na) {
    if (p.boundary != Boundary::Periodic) return 0.0;
    r = c - static_cast<std::size_t>(na - 1) * s;
  }
  return face_coef(*p.coef[a], p.face, u[c], u[r]) * (u[r] - u[c]) / g.h[a];
}

inline double cell_update(const Problem& p, const std::vector<double>& u, const std::array<std::vector<double>, 3>& flux,
                          std::size_t c, double dt) {
  const Grid& g = p.grid;
  double rate = 0.0;
  for (int a = 0; a < g.dims; ++a) {
    const std::size_t s = g.stride[a];
    const int na = g.n[a];
    const int i = static_cast<int>((c / s) % static_cast<std::size_t>(na));
    const double up = flux[a][c];
    double down = 0.0;
    if (i > 0) {
      down = flux[a][c - s];
    } else if (p.boundary == Boundary::Periodic) {
      down = flux[a][c + static_cast<std::size_t>(na - 1) * s];
    }
    rate += (up - down) / g.h[a];
  }
  if (p.source) rate += p.source->value(u[c]);
  return u[c] + dt * rate;
}

inline double cell_coef_max(const Problem& p, double uc) {
  double m = 0.0;
  for (int a = 0; a < p.grid.dims; ++a) m = std::max(m, p.coef[a]->value(uc));
  return m;
}

}  // namespace

double stable_dt(const Problem& p, const std::vector<double>& u, double safety, bool parallel) {
  double m = 0.0;
  const auto n = static_cast<std::ptrdiff_t>(u.size());
  if (parallel) {
#pragma omp parallel for reduction(max : m) num_threads(thread_cap())
    for (std::ptrdiff_t c = 0; c < n; ++c) m = std::max(m, cell_coef_max(p, u[static_cast<std::size_t>(c)]));
  } else {
    for (std::ptrdiff_t c = 0; c < n; ++c) m = std::max(m, cell_coef_max(p, u[static_cast<std::size_t>(c)]));
  }
  if (!(m > 0)) return std::numeric_limits<double>::infinity();
  double hmin2 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < p.grid.dims; ++a) hmin2 = std::min(hmin2, p.grid.h[a] * p.grid.h[a]);
  return safety * hmin2 / (2.0 * p.grid.dims * m);
}

void step_serial(const Problem& p, const std::vector<double>& u, double dt, std::vector<double>& out) {
  std::array<std::vector<double>, 3> flux;
  for (int a = 0; a < p.grid.dims; ++a) {
    flux[a].resize(u.size());
    for (std::size_t c = 0; c < u.size(); ++c) flux[a][c] = face_flux(p, u, c, a);
  }
  out.resize(u.size());
  for (std::size_t c = 0; c < u.size(); ++c) out[c] = cell_update(p, u, flux, c, dt);
}

void step_parallel(const Problem& p, const std::vector<double>& u, double dt, std::vector<double>& out) {
  std::array<std::vector<double>, 3> flux;
  for (int a = 0; a < p.grid.dims; ++a) flux[a].resize(u.size());
  out.resize(u.size());
  const auto n = static_cast<std::ptrdiff_t>(u.size());
#pragma omp parallel num_threads(thread_cap())
  {
    for (int a = 0; a < p.grid.dims; ++a) {
#pragma omp for schedule(static)
      for (std::ptrdiff_t c = 0; c < n; ++c) flux[a][static_cast<std::size_t>(c)] = face_flux(p, u, static_cast<std::size_t>(c), a);
    }
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < n; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      out[cc] = cell_update(p, u, flux, cc, dt);
    }
  }
}

std::vector<double> initial_field(const SimulationConfig& c, const Grid& g) {
  if (!c.initial_samples.empty()) return c.initial_samples;
  return sample_expr(parse(c.initial, config_symbols(c)), c, g, 0.0);
}

std::optional<std::vector<double>> exact_field(const SimulationConfig& c, const Grid& g, double t) {
  if (!c.exact) return std::nullopt;
  std::vector<double> u = sample_expr(parse(*c.exact, config_symbols(c)), c, g, t);
  const double decay = std::exp(-c.exact_decay * t);
  for (double& x : u) x *= decay;
  return u;
}

Trajectory solve(const SimulationConfig& c, const StepObserver& observer, bool parallel) {
  c.validate();
  const Problem p(c);
  Trajectory tr{p.grid, {}, {}, 0, std::numeric_limits<double>::infinity(), 0.0};
  SimulationState s{0.0, 0, initial_field(c, p.grid)};
  for (double x : s.u)
    if (!std::isfinite(x)) throw SimulationAbort("initial condition is not finite");
  if (observer) observer(s);
  tr.snapshots.push_back(s);
  std::vector<double> next;
  while (c.T - s.t > 1e-14 * c.T) {
    const double clamp = stable_dt(p, s.u, c.safety, parallel);
    if (clamp < kDtFloor)
      throw SimulationAbort("stability clamp forced dt = " + std::to_string(clamp) + " below 1e-12 at t = " +
                            std::to_string(s.t));
    double dt = std::min(clamp, c.T - s.t);
    if (c.dt) dt = std::min(dt, *c.dt);
    if (parallel) {
      step_parallel(p, s.u, dt, next);
    } else {
      step_serial(p, s.u, dt, next);
    }
    for (double x : next)
      if (!std::isfinite(x)) throw SimulationAbort("non-finite value at step " + std::to_string(s.step + 1));
    s.u.swap(next);
    s.t = c.T - s.t - dt <= 1e-14 * c.T ? c.T : s.t + dt;
    ++s.step;
    tr.min_dt = std::min(tr.min_dt, dt);
    tr.max_dt = std::max(tr.max_dt, dt);
    if (observer) observer(s);
    if (c.snapshot_every > 0 && s.step % c.snapshot_every == 0 && s.t < c.T) tr.snapshots.push_back(s);
  }
  tr.steps = s.step;
  tr.final_state = s;
  if (tr.snapshots.back().step != s.step) tr.snapshots.push_back(s);
  return tr;
}

// ---------------------------------------------------------------------------
// Discrete balance

namespace {

struct Shape {
  std::array<int, 3> n{1, 1, 1};
  std::array<std::size_t, 3> stride{1, 1, 1};

  explicit Shape(std::array<int, 3> nn) : n(nn) {
    stride = {static_cast<std::size_t>(n[1]) * n[2], static_cast<std::size_t>(n[2]), 1};
  }
  std::size_t size() const { return static_cast<std::size_t>(n[0]) * n[1] * n[2]; }
};

// First or second difference along dimension d; one-sided second order at the ends.
std::vector<double> diff(const std::vector<double>& w, const Shape& sh, int d, int ord, double h, bool periodic) {
  std::vector<double> out(w.size(), 0.0);
  const int na = sh.n[static_cast<std::size_t>(d)];
  const std::size_t s = sh.stride[static_cast<std::size_t>(d)];
  for (std::size_t c = 0; c < w.size(); ++c) {
    const int i = static_cast<int>((c / s) % static_cast<std::size_t>(na));
    auto at = [&](int k) {
      if (periodic) k = (k % na + na) % na;
      return w[c + static_cast<std::size_t>(k - i) * s - 0];
    };
    if (ord == 1) {
      if (periodic || (i > 0 && i + 1 < na)) {
        out[c] = (at(i + 1) - at(i - 1)) / (2 * h);
      } else if (i == 0) {
        out[c] = (-3 * at(0) + 4 * at(1) - at(2)) / (2 * h);
      } else {
        out[c] = (3 * at(na - 1) - 4 * at(na - 2) + at(na - 3)) / (2 * h);
      }
    } else {
      if (periodic || (i > 0 && i + 1 < na)) {
        out[c] = (at(i + 1) - 2 * at(i) + at(i - 1)) / (h * h);
      } else if (i == 0) {
        out[c] = (2 * at(0) - 5 * at(1) + 4 * at(2) - at(3)) / (h * h);
      } else {
        out[c] = (2 * at(na - 1) - 5 * at(na - 2) + 4 * at(na - 3) - at(na - 4)) / (h * h);
      }
    }
  }
  return out;
}

// Applies the spatial part of m (counts over x, y, z) to a base field.
std::vector<double> apply_index(std::vector<double> w, const Shape& sh, std::array<int, 3> counts, const Grid& g,
                                bool periodic) {
  for (int d = 0; d < 3; ++d) {
    const int k = counts[static_cast<std::size_t>(d)];
    if (k == 0) continue;
    if (k == 2) {
      w = diff(w, sh, d, 2, g.h[static_cast<std::size_t>(d)], periodic);
    } else {
      w = diff(w, sh, d, 1, g.h[static_cast<std::size_t>(d)], periodic);
    }
  }
  return w;
}

}  // namespace

struct BalanceMonitor::Compiled {
  enum class Source { Const, Coord, Time, Jet, Func, Trig };
  struct Slot {
    Source kind = Source::Const;
    double value = 0.0;
    int axis = 0;
    MultiIndex jet{};
    const FunctionModel* f = nullptr;
    int order = 0;
    Atom atom;
  };

  SimulationConfig cfg;
  Grid grid;
  std::vector<Slot> slots;
  std::vector<CompiledExpr> comps;
  std::vector<MultiIndex> jets;
  std::vector<std::set<Atom>> cv_atoms;
  std::vector<std::vector<MultiIndex>> comp_jets;

  Compiled(const SimulationConfig& c, const ConservedVector& cv) : cfg(c), grid(c) {
    if (static_cast<int>(cv.components.size()) != c.dims + 1)
      throw std::invalid_argument("vector has " + std::to_string(cv.components.size()) + " components but the run has " +
                                  std::to_string(c.dims) + " spatial dimensions");
    for (int a = 0; a <= c.dims; ++a)
      if (cv.axes[static_cast<std::size_t>(a)] != kAllAxes[static_cast<std::size_t>(a)])
        throw std::invalid_argument("vector axes must be t followed by x, y, z in order");
    const auto map = slot_map(cv.components);
    slots.resize(map.size());
    const JetPoint base = config_point(c);
    for (const auto& [a, i] : map) {
      Slot s;
      s.atom = a;
      switch (a.kind) {
        case AtomKind::Var:
          if (a.axis() == Axis::t) {
            s.kind = Source::Time;
          } else if (axis_index(a.axis()) <= c.dims) {
            s.kind = Source::Coord;
            s.axis = axis_index(a.axis()) - 1;
          } else {
            throw std::invalid_argument("component uses coordinate " + to_plain(a) + " absent from the run");
          }
          break;
        case AtomKind::Param:
          s.kind = Source::Const;
          s.value = base.atom_value(a);
          break;
        case AtomKind::Jet: {
          if (!a.is_u_jet()) throw std::invalid_argument("component depends on v; eliminate it first");
          const MultiIndex m = a.multi();
          if (m[0] > 0) throw std::invalid_argument("component references unavailable jet " + to_plain(a));
          for (int d = c.dims + 1; d < 4; ++d)
            if (m[static_cast<std::size_t>(d)])
              throw std::invalid_argument("component references unavailable jet " + to_plain(a) + " on a " +
                                          std::to_string(c.dims) + "D run");
          if (order(m) > 2) throw std::invalid_argument("component references unavailable jet " + to_plain(a));
          s.kind = Source::Jet;
          s.jet = m;
          if (std::find(jets.begin(), jets.end(), m) == jets.end()) jets.push_back(m);
          break;
        }
        case AtomKind::Func: {
          auto f = c.functions.find(a.name);
          if (f == c.functions.end()) throw std::invalid_argument("no model for function " + to_plain(a));
          s.kind = Source::Func;
          s.f = &f->second;
          s.order = a.func_order();
          break;
        }
        case AtomKind::Trig:
          if (axis_index(a.axis()) > c.dims)
            throw std::invalid_argument("component uses coordinate of " + to_plain(a) + " absent from the run");
          s.kind = Source::Trig;
          s.value = base.atom_value(Atom::param(a.name));
          s.axis = axis_index(a.axis()) - 1;
          break;
        default: throw std::invalid_argument("component atom " + to_plain(a) + " cannot be evaluated on a grid");
      }
      slots[static_cast<std::size_t>(i)] = s;
    }
    if (std::find(jets.begin(), jets.end(), MultiIndex{}) == jets.end()) jets.push_back(MultiIndex{});
    for (const Expr& e : cv.components) {
      comps.emplace_back(e, map);
      cv_atoms.push_back(e.atoms());
    }
    for (std::size_t i = 0; i < comps.size(); ++i) comp_jets.push_back(jets_of(i));
  }

  std::vector<MultiIndex> jets_of(std::size_t comp) const {
    std::vector<MultiIndex> out{MultiIndex{}};
    for (const Atom& a : cv_atoms[comp])
      if (a.kind == AtomKind::Jet && std::find(out.begin(), out.end(), a.multi()) == out.end()) out.push_back(a.multi());
    return out;
  }

  template <class Coord>
  double eval_sites(std::size_t comp, const std::map<MultiIndex, std::vector<double>>& field, const Coord& coord,
                    std::size_t nsites, double t, double weight) const {
    const CompiledExpr& e = comps[comp];
    if (e.is_zero()) return 0.0;
    std::vector<const double*> src(slots.size(), nullptr);
    for (std::size_t k = 0; k < slots.size(); ++k)
      if (slots[k].kind == Source::Jet) {
        auto it = field.find(slots[k].jet);
        if (it != field.end()) src[k] = it->second.data();
      }
    const double* u = field.at(MultiIndex{}).data();
    std::vector<double> site_value(nsites);
    const auto n = static_cast<std::ptrdiff_t>(nsites);
#pragma omp parallel num_threads(thread_cap())
    {
      std::vector<double> v(slots.size(), 0.0);
#pragma omp for schedule(static)
      for (std::ptrdiff_t si = 0; si < n; ++si) {
        const auto site = static_cast<std::size_t>(si);
        for (std::size_t k = 0; k < slots.size(); ++k) {
          const Slot& s = slots[k];
          switch (s.kind) {
            case Source::Const: v[k] = s.value; break;
            case Source::Coord: v[k] = coord(site, s.axis); break;
            case Source::Time: v[k] = t; break;
            case Source::Jet: v[k] = src[k] ? src[k][site] : 0.0; break;
            case Source::Func: v[k] = s.f->value(u[site], s.order); break;
            case Source::Trig: {
              const double arg = s.value * coord(site, s.axis);
              switch (s.atom.trig_fn()) {
                case TrigFn::Sin: v[k] = std::sin(arg); break;
                case TrigFn::Cos: v[k] = std::cos(arg); break;
                case TrigFn::Exp: v[k] = std::exp(s.atom.trig_sign() * arg); break;
              }
              break;
            }
          }
        }
        site_value[site] = e(v.data());
      }
    }
    double sum = 0.0;
    for (double x : site_value) sum += x;
    return sum * weight;
  }

  double density(const std::vector<double>& u, double t) const {
    const Shape sh(grid.n);
    const bool periodic = cfg.boundary == Boundary::Periodic;
    std::map<MultiIndex, std::vector<double>> field;
    field[MultiIndex{}] = u;
    for (const MultiIndex& m : comp_jets[0])
      if (order(m) > 0) field[m] = apply_index(u, sh, {m[1], m[2], m[3]}, grid, periodic);
    auto coord = [&](std::size_t c, int a) {
      const int i = static_cast<int>((c / grid.stride[static_cast<std::size_t>(a)]) %
                                     static_cast<std::size_t>(grid.n[static_cast<std::size_t>(a)]));
      return grid.center(a, i);
    };
    return eval_sites(0, field, coord, grid.size(), t, grid.cell_volume());
  }

  double wall_flux(const std::vector<double>& u, double t, int a, int side) const {
    const std::size_t comp = static_cast<std::size_t>(a) + 1;
    if (comps[comp].is_zero()) return 0.0;
    const auto ua = static_cast<std::size_t>(a);
    const bool periodic = cfg.boundary == Boundary::Periodic;
    std::array<int, 3> wn = grid.n;
    wn[ua] = 1;
    const Shape wsh(wn);
    const int na = grid.n[ua];
    const double h = grid.h[ua];
    std::vector<double> w0(wsh.size()), w1(wsh.size()), w2(wsh.size());
    for (std::size_t ws = 0; ws < wsh.size(); ++ws) {
      int idx[3];
      std::size_t rem = ws;
      for (int d = 0; d < 3; ++d) {
        idx[d] = static_cast<int>(rem / wsh.stride[static_cast<std::size_t>(d)]);
        rem %= wsh.stride[static_cast<std::size_t>(d)];
      }
      auto cell = [&](int i) {
        int id[3] = {idx[0], idx[1], idx[2]};
        id[a] = i;
        return u[grid.index(id[0], id[1], id[2])];
      };
      if (periodic) {
        const double ul = cell(na - 1), ur = cell(0);
        w0[ws] = 0.5 * (ul + ur);
        w1[ws] = (ur - ul) / h;
        w2[ws] = (cell(1) - ur - ul + cell(na - 2)) / (2 * h * h);
      } else {
        const int i0 = side == 0 ? 0 : na - 1;
        const int dir = side == 0 ? 1 : -1;
        const double u0 = cell(i0), u1 = cell(i0 + dir), u2 = cell(i0 + 2 * dir);
        w0[ws] = (15 * u0 - 10 * u1 + 3 * u2) / 8;
        w1[ws] = dir * (-2 * u0 + 3 * u1 - u2) / h;
        w2[ws] = (u0 - 2 * u1 + u2) / (h * h);
      }
    }
    std::map<MultiIndex, std::vector<double>> field;
    for (const MultiIndex& m : comp_jets[comp]) {
      std::array<int, 3> counts{m[1], m[2], m[3]};
      const int normal = counts[ua];
      counts[ua] = 0;
      const std::vector<double>& base = normal == 0 ? w0 : normal == 1 ? w1 : w2;
      field[m] = apply_index(base, wsh, counts, grid, periodic);
    }
    // the field for u itself is always present; Func slots read it
    field[MultiIndex{}] = w0;
    const double wall = side == 0 ? grid.lower[ua] : cfg.upper[ua];
    auto coord = [&](std::size_t ws, int d) {
      if (d == a) return wall;
      const int i = static_cast<int>((ws / wsh.stride[static_cast<std::size_t>(d)]) %
                                     static_cast<std::size_t>(wsh.n[static_cast<std::size_t>(d)]));
      return grid.center(d, i);
    };
    return eval_sites(comp, field, coord, wsh.size(), t, grid.cell_volume() / h);
  }

  double boundary_flux(const std::vector<double>& u, double t) const {
    double b = 0.0;
    for (int a = 0; a < grid.dims; ++a) b += wall_flux(u, t, a, 1) - wall_flux(u, t, a, 0);
    return b;
  }
};

BalanceMonitor::BalanceMonitor(const SimulationConfig& c, const ConservedVector& cv)
    : impl_(std::make_shared<Compiled>(c, cv)) {
  report_.label = cv.label;
}

void BalanceMonitor::observe(const SimulationState& s) {
  const double d = impl_->density(s.u, s.t);
  const double b = impl_->boundary_flux(s.u, s.t);
  if (!report_.times.empty()) {
    const double dt = s.t - report_.times.back();
    const double r = d - report_.density.back() + dt * 0.5 * (b + report_.boundary.back());
    report_.residual.push_back(r);
    const double cum = (report_.cumulative.empty() ? 0.0 : report_.cumulative.back()) + r;
    report_.cumulative.push_back(cum);
    report_.max_residual = std::max(report_.max_residual, std::abs(r));
    report_.max_cumulative = std::max(report_.max_cumulative, std::abs(cum));
  }
  report_.times.push_back(s.t);
  report_.density.push_back(d);
  report_.boundary.push_back(b);
}

nlohmann::json BalanceReport::to_json() const {
  return {{"label", label},
          {"steps", residual.size()},
          {"max_residual", max_residual},
          {"max_cumulative", max_cumulative},
          {"final_time", times.empty() ? 0.0 : times.back()},
          {"initial_density", density.empty() ? 0.0 : density.front()},
          {"final_density", density.empty() ? 0.0 : density.back()}};
}

std::string BalanceReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "step,t,density,boundary_flux,residual,cumulative\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    os << i << ',' << times[i] << ',' << density[i] << ',' << boundary[i] << ',';
    if (i == 0) {
      os << "0,0\n";
    } else {
      os << residual[i - 1] << ',' << cumulative[i - 1] << '\n';
    }
  }
  return os.str();
}

BalanceReport discrete_balance(const SimulationConfig& c, const Trajectory& tr, const ConservedVector& cv) {
  if (c.snapshot_every != 1) throw std::invalid_argument("discrete_balance needs every step stored (snapshot_every = 1)");
  BalanceMonitor m(c, cv);
  for (const SimulationState& s : tr.snapshots) m.observe(s);
  return m.report();
}

// ---------------------------------------------------------------------------
// Convergence

namespace {

std::vector<double> restrict_to(const std::vector<double>& fine, const Grid& gf, const Grid& gc) {
  std::array<int, 3> r{1, 1, 1};
  for (int a = 0; a < gc.dims; ++a) r[static_cast<std::size_t>(a)] = gf.n[static_cast<std::size_t>(a)] / gc.n[static_cast<std::size_t>(a)];
  std::vector<double> out(gc.size(), 0.0);
  const double w = 1.0 / (r[0] * r[1] * r[2]);
  for (int i = 0; i < gf.n[0]; ++i)
    for (int j = 0; j < gf.n[1]; ++j)
      for (int k = 0; k < gf.n[2]; ++k) out[gc.index(i / r[0], j / r[1], k / r[2])] += w * fine[gf.index(i, j, k)];
  return out;
}

double rms(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

double order_of(double coarse, double fine, double ratio) {
  if (coarse == 0.0 && fine == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::log(coarse / fine) / std::log(ratio);
}

}  // namespace

ConvergenceReport convergence_study(const SimulationConfig& c, int levels, const std::vector<ConservedVector>& vectors,
                                    const std::string& mode) {
  if (levels < 3) throw ConfigError("a convergence study needs at least 3 levels");
  if (mode != "space" && mode != "time") throw ConfigError("study mode must be space or time");
  ConvergenceReport rep;
  rep.mode = mode;
  std::vector<std::vector<double>> finals;
  std::vector<Grid> grids;
  double dt0 = 0.0;
  if (mode == "time") {
    const Problem p(c);
    dt0 = stable_dt(p, initial_field(c, p.grid), c.safety, true);
    if (c.dt) dt0 = std::min(dt0, *c.dt);
    if (!std::isfinite(dt0)) dt0 = c.T / 16;
  }
  for (int l = 0; l < levels; ++l) {
    SimulationConfig cl = mode == "space" ? c.refined(1 << l) : c;
    if (mode == "time") cl.dt = dt0 / (1 << l);
    cl.snapshot_every = 0;
    std::vector<BalanceMonitor> monitors;
    for (const auto& v : vectors) monitors.emplace_back(cl, v);
    const Trajectory tr = solve(cl, [&](const SimulationState& s) {
      for (auto& m : monitors) m.observe(s);
    });
    ConvergenceLevel lv;
    lv.n = cl.n;
    lv.dt = tr.max_dt;
    lv.steps = tr.steps;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      const std::string key = vectors[i].label.empty() ? "vector " + std::to_string(i + 1) : vectors[i].label;
      lv.balance[key] = monitors[i].report().max_cumulative;
    }
    if (mode == "space" && c.exact) lv.error = rms(tr.final_state.u, *exact_field(cl, tr.grid, tr.final_state.t));
    finals.push_back(tr.final_state.u);
    grids.push_back(tr.grid);
    rep.levels.push_back(lv);
  }
  const bool reference = mode == "time" || !c.exact;
  if (reference) {
    for (int l = 0; l + 1 < levels; ++l) {
      const auto& L = static_cast<std::size_t>(levels - 1);
      const std::vector<double> ref = mode == "space" ? restrict_to(finals[L], grids[L], grids[static_cast<std::size_t>(l)]) : finals[L];
      rep.levels[static_cast<std::size_t>(l)].error = rms(finals[static_cast<std::size_t>(l)], ref);
    }
  }
  const int last = reference ? levels - 2 : levels - 1;
  for (int l = 0; l < last; ++l) {
    const auto& a = rep.levels[static_cast<std::size_t>(l)];
    const auto& b = rep.levels[static_cast<std::size_t>(l) + 1];
    rep.solution_orders.push_back(order_of(a.error, b.error, 2.0));
    rep.dt_orders.push_back(order_of(a.error, b.error, a.dt / b.dt));
  }
  for (const auto& [key, v] : rep.levels.front().balance) {
    for (int l = 0; l + 1 < levels; ++l) {
      const double a = rep.levels[static_cast<std::size_t>(l)].balance.at(key);
      const double b = rep.levels[static_cast<std::size_t>(l) + 1].balance.at(key);
      rep.balance_ratios[key].push_back(b == 0.0 ? std::numeric_limits<double>::infinity() : a / b);
      rep.balance_orders[key].push_back(order_of(a, b, 2.0));
    }
  }
  return rep;
}

nlohmann::json ConvergenceReport::to_json() const {
  auto num = [](double x) -> nlohmann::json {
    if (std::isnan(x)) return nullptr;
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
  };
  nlohmann::json j;
  j["mode"] = mode;
  j["levels"] = nlohmann::json::array();
  for (const auto& l : levels) {
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [k, v] : l.balance) b[k] = num(v);
    j["levels"].push_back({{"n", l.n}, {"dt", l.dt}, {"steps", l.steps}, {"error", num(l.error)}, {"balance", b}});
  }
  j["solution_orders"] = nlohmann::json::array();
  for (double o : solution_orders) j["solution_orders"].push_back(num(o));
  j["dt_orders"] = nlohmann::json::array();
  for (double o : dt_orders) j["dt_orders"].push_back(num(o));
  j["balance_orders"] = nlohmann::json::object();
  for (const auto& [k, v] : balance_orders) {
    j["balance_orders"][k] = nlohmann::json::array();
    for (double o : v) j["balance_orders"][k].push_back(num(o));
  }
  j["balance_ratios"] = nlohmann::json::object();
  for (const auto& [k, v] : balance_ratios) {
    j["balance_ratios"][k] = nlohmann::json::array();
    for (double o : v) j["balance_ratios"][k].push_back(num(o));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

template <class T>
void put(std::ostream& os, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(b, sizeof(T));
}

template <class T>
T get(std::istream& is) {
  char b[sizeof(T)];
  if (!is.read(b, sizeof(T))) throw std::runtime_error("snapshot is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void write_snapshot(const std::string& path, const SimulationConfig& c, const SimulationState& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os.write("CLFSNAP1", 8);
  put<std::int32_t>(os, c.dims);
  for (int a = 0; a < 3; ++a) put<std::int32_t>(os, c.n[static_cast<std::size_t>(a)]);
  for (int a = 0; a < 3; ++a) put<double>(os, c.lower[static_cast<std::size_t>(a)]);
  for (int a = 0; a < 3; ++a) put<double>(os, c.upper[static_cast<std::size_t>(a)]);
  put<double>(os, s.t);
  for (double x : s.u) put<double>(os, x);
}

SimulationState read_snapshot(const std::string& path, SimulationConfig* header) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read '" + path + "'");
  char magic[8];
  if (!is.read(magic, 8) || std::string(magic, 8) != "CLFSNAP1") throw std::runtime_error("not a snapshot file");
  SimulationConfig c;
  c.dims = get<std::int32_t>(is);
  for (int a = 0; a < 3; ++a) c.n[static_cast<std::size_t>(a)] = get<std::int32_t>(is);
  for (int a = 0; a < 3; ++a) c.lower[static_cast<std::size_t>(a)] = get<double>(is);
  for (int a = 0; a < 3; ++a) c.upper[static_cast<std::size_t>(a)] = get<double>(is);
  SimulationState s;
  s.t = get<double>(is);
  const std::size_t n = static_cast<std::size_t>(c.n[0]) * c.n[1] * c.n[2];
  s.u.resize(n);
  for (double& x : s.u) x = get<double>(is);
  if (header) *header = c;
  return s;
}

}  // namespace clf
