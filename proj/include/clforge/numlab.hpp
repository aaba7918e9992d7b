#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "clforge/conslaw.hpp"
#include "clforge/evaluate.hpp"

namespace clf {

enum class Boundary { Periodic, ZeroFlux };
enum class FaceAverage { Arithmetic, Harmonic };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SimulationAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit run of u_t = sum_i D_i(f_i(u) D_i u) + q(u) on a box, with
/// f_1 = f, f_2 = g, f_3 = h.
///
/// JSON form (all keys optional except dims and n):
///
///   { "dims": 2, "lower": [0, 0], "upper": [1, 1], "n": [64, 64],
///     "T": 0.05, "dt": 1e-4, "safety": 0.9,
///     "boundary": "zero_flux" | "periodic", "face": "arithmetic" | "harmonic",
///     "functions": { "f": {"kind": "power", "n": 1}, "g": ..., "q": ... },
///     "params": { "k": 0.1 },
///     "initial": "1 + 1/2*cos(pi*x)*cos(pi*y)"   (or an array of cell values),
///     "exact": { "expr": "sin(pi*x)*sin(pi*y)", "decay": 1.97 },
///     "snapshot_every": 0, "vectors": ["eq315.json"],
///     "study": { "levels": 3, "mode": "space" | "time" } }
struct SimulationConfig {
  int dims = 2;
  std::array<double, 3> lower{0.0, 0.0, 0.0};
  std::array<double, 3> upper{1.0, 1.0, 1.0};
  std::array<int, 3> n{32, 32, 1};
  double T = 0.05;
  std::optional<double> dt;  // cap; the stability clamp may shrink each step
  double safety = 0.9;
  Boundary boundary = Boundary::ZeroFlux;
  FaceAverage face = FaceAverage::Arithmetic;
  std::map<std::string, FunctionModel> functions;
  std::map<std::string, double> params;
  std::string initial = "1";
  std::vector<double> initial_samples;  // grid-order values; overrides `initial`
  std::optional<std::string> exact;
  double exact_decay = 0.0;
  int snapshot_every = 0;
  std::vector<std::string> vectors;
  int study_levels = 0;
  std::string study_mode = "space";

  static SimulationConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws ConfigError.
  void validate() const;
  /// Same run with every grid size multiplied by `factor`.
  SimulationConfig refined(int factor) const;
  const FunctionModel& coefficient(int axis) const;
};

SimulationConfig load_config(const std::string& path);

/// Cell-centered grid, row-major with the last used axis fastest.
struct Grid {
  int dims = 1;
  std::array<int, 3> n{1, 1, 1};
  std::array<double, 3> lower{0.0, 0.0, 0.0};
  std::array<double, 3> h{1.0, 1.0, 1.0};
  std::array<std::size_t, 3> stride{1, 1, 1};

  explicit Grid(const SimulationConfig& c);
  std::size_t size() const { return static_cast<std::size_t>(n[0]) * n[1] * n[2]; }
  std::size_t index(int i, int j, int k) const { return i * stride[0] + j * stride[1] + k * stride[2]; }
  double center(int axis, int i) const { return lower[axis] + (i + 0.5) * h[axis]; }
  double cell_volume() const;
};

struct SimulationState {
  double t = 0.0;
  int step = 0;
  std::vector<double> u;
};

/// Everything the step kernels need, resolved from a config.
struct Problem {
  Grid grid;
  std::array<const FunctionModel*, 3> coef{};
  const FunctionModel* source = nullptr;
  Boundary boundary = Boundary::ZeroFlux;
  FaceAverage face = FaceAverage::Arithmetic;

  explicit Problem(const SimulationConfig& c);
};

/// Largest stable step: safety * min h^2 / (2 dims max_grid max_i f_i(u)).
double stable_dt(const Problem& p, const std::vector<double>& u, double safety, bool parallel);

/// One explicit step; serial reference and OpenMP kernel give identical bits.
void step_serial(const Problem& p, const std::vector<double>& u, double dt, std::vector<double>& out);
void step_parallel(const Problem& p, const std::vector<double>& u, double dt, std::vector<double>& out);

std::vector<double> initial_field(const SimulationConfig& c, const Grid& g);
/// Closed-form solution sampled on the grid at time t, when configured.
std::optional<std::vector<double>> exact_field(const SimulationConfig& c, const Grid& g, double t);

struct Trajectory {
  Grid grid;
  std::vector<SimulationState> snapshots;  // initial, every snapshot_every steps, final
  SimulationState final_state;
  int steps = 0;
  double min_dt = 0.0;
  double max_dt = 0.0;
};

using StepObserver = std::function<void(const SimulationState&)>;

/// Runs to T. The observer sees the initial state and every step.
Trajectory solve(const SimulationConfig& c, const StepObserver& observer = {}, bool parallel = true);

struct BalanceReport {
  std::string label;
  std::vector<double> times;
  std::vector<double> density;   // sum of C^1 dV per state
  std::vector<double> boundary;  // outward flux through the walls per state
  std::vector<double> residual;  // per step
  std::vector<double> cumulative;
  double max_residual = 0.0;
  double max_cumulative = 0.0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Accumulates the discrete balance of a conserved vector along a run:
/// r_n = [sum C^1 dV]^{n+1} - [sum C^1 dV]^n + dt (B^n + B^{n+1}) / 2.
class BalanceMonitor {
 public:
  BalanceMonitor(const SimulationConfig& c, const ConservedVector& cv);
  void observe(const SimulationState& s);
  const BalanceReport& report() const { return report_; }

 private:
  struct Compiled;
  std::shared_ptr<Compiled> impl_;
  BalanceReport report_;
};

/// Balance over a stored trajectory (needs snapshot_every = 1).
BalanceReport discrete_balance(const SimulationConfig& c, const Trajectory& tr, const ConservedVector& cv);

struct ConvergenceLevel {
  std::array<int, 3> n{};
  double dt = 0.0;
  int steps = 0;
  double error = 0.0;  // RMS against the exact solution or the finest level
  std::map<std::string, double> balance;  // max cumulative residual per vector
};

struct ConvergenceReport {
  std::string mode;
  std::vector<ConvergenceLevel> levels;
  std::vector<double> solution_orders;
  std::vector<double> dt_orders;  // same errors measured against the step size
  std::map<std::string, std::vector<double>> balance_orders;
  std::map<std::string, std::vector<double>> balance_ratios;

  nlohmann::json to_json() const;
};

/// Nested refinement study. In space mode each level halves h (dt follows the
/// clamp); in time mode the grid is fixed and dt halves from the configured cap.
ConvergenceReport convergence_study(const SimulationConfig& c, int levels,
                                    const std::vector<ConservedVector>& vectors = {},
                                    const std::string& mode = "space");

/// Flat little-endian snapshot: "CLFSNAP1", int32 dims, int32 n[3],
/// float64 lower[3], upper[3], t, then the field in grid order.
void write_snapshot(const std::string& path, const SimulationConfig& c, const SimulationState& s);
SimulationState read_snapshot(const std::string& path, SimulationConfig* header = nullptr);

}  // namespace clf
