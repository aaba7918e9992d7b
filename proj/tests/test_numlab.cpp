#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "clforge/numlab.hpp"
#include "clforge/report.hpp"

#include "reference_vectors.hpp"

using namespace clf;
using clf::testing::make_vector;

namespace {

std::string data(const std::string& rel) { return std::string(CLFORGE_DATA_DIR) + "/" + rel; }

SimulationConfig demo(int n = 16) {
  auto c = load_config(data("configs/demo2d.json"));
  c.n = {n, n, 1};
  c.vectors.clear();
  c.study_levels = 0;
  return c;
}

SimulationConfig linear(int n) {
  auto c = load_config(data("configs/linear_periodic.json"));
  c.n = {n, n, 1};
  return c;
}

double total(const std::vector<double>& u, const Grid& g) {
  return std::accumulate(u.begin(), u.end(), 0.0) * g.cell_volume();
}

ConservedVector mass2d() { return load_vectors(data("vectors/mass_2d.json")).front(); }

}  // namespace

TEST(Config, RoundTrip) {
  auto c = load_config(data("configs/demo2d.json"));
  EXPECT_EQ(c.dims, 2);
  EXPECT_EQ(c.n[0], 32);
  EXPECT_EQ(c.boundary, Boundary::ZeroFlux);
  EXPECT_EQ(c.study_levels, 3);
  auto d = SimulationConfig::from_json(c.to_json());
  EXPECT_EQ(d.to_json(), c.to_json());
}

TEST(Config, Rejections) {
  try {
    load_config(data("configs/invalid3d.json")).validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("limited to 64"), std::string::npos);
  }
  auto c = demo();
  c.safety = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = demo();
  c.study_levels = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = demo();
  c.functions.erase("g");
  EXPECT_THROW(c.validate(), ConfigError);
  c = demo();
  c.T = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(SimulationConfig::from_json({{"dims", 4}, {"n", {8}}}), ConfigError);
}

TEST(Solve, LinearDecayMatchesClosedForm) {
  auto c = linear(64);
  auto tr = solve(c);
  auto ex = exact_field(c, tr.grid, tr.final_state.t);
  ASSERT_TRUE(ex);
  EXPECT_DOUBLE_EQ(tr.final_state.t, 0.1);
  const double amp = std::exp(-c.exact_decay * 0.1);
  double err = 0;
  for (std::size_t i = 0; i < ex->size(); ++i) err = std::max(err, std::abs(tr.final_state.u[i] - (*ex)[i]));
  EXPECT_LT(err / amp, 0.01);
}

TEST(Solve, ZeroFluxTelescopes) {
  auto c = demo(32);
  Grid g(c);
  double prev = std::nan("");
  double worst = 0;
  solve(c, [&](const SimulationState& s) {
    const double m = total(s.u, g);
    if (!std::isnan(prev)) worst = std::max(worst, std::abs(m - prev));
    prev = m;
  });
  EXPECT_LT(worst, 1e-12);
}

TEST(Solve, PeriodicTelescopes) {
  auto c = demo(32);
  c.boundary = Boundary::Periodic;
  c.upper = {2.0, 2.0, 1.0};
  c.initial = "1 + 1/2*sin(pi*x)*cos(pi*y)";
  Grid g(c);
  double prev = std::nan("");
  double worst = 0;
  solve(c, [&](const SimulationState& s) {
    const double m = total(s.u, g);
    if (!std::isnan(prev)) worst = std::max(worst, std::abs(m - prev));
    prev = m;
  });
  EXPECT_LT(worst, 1e-12);
}

TEST(Solve, MaximumPrinciple) {
  auto c = demo(32);
  auto u0 = initial_field(c, Grid(c));
  const double lo = *std::min_element(u0.begin(), u0.end());
  const double hi = *std::max_element(u0.begin(), u0.end());
  solve(c, [&](const SimulationState& s) {
    for (double x : s.u) {
      ASSERT_GE(x, lo - 1e-10);
      ASSERT_LE(x, hi + 1e-10);
    }
  });
}

TEST(Solve, PorousMediumFiniteSpeed) {
  auto c = load_config(data("configs/porous1d.json"));
  Grid g(c);
  auto u0 = initial_field(c, g);
  auto tr = solve(c);
  const auto& u = tr.final_state.u;
  auto support = [](const std::vector<double>& v) {
    return std::count_if(v.begin(), v.end(), [](double x) { return x > 1e-10; });
  };
  EXPECT_EQ(support(u0), 32);
  EXPECT_EQ(support(u), 40);
  EXPECT_EQ(tr.steps, 43);
  EXPECT_NEAR(total(u, g), total(u0, g), 1e-14);
  // frozen from the reference run
  EXPECT_NEAR(u[14], 0.065221067771912458, 1e-12);
  EXPECT_NEAR(u[16], 0.24375066195007725, 1e-12);
  EXPECT_NEAR(u[20], 0.52901290888117469, 1e-12);
  EXPECT_NEAR(u[32], 0.87651903240253826, 1e-12);
  EXPECT_EQ(u[14], u[49]);
}

TEST(Solve, SerialAndParallelAgreeBitwise) {
  for (int dims : {1, 2, 3}) {
    SimulationConfig c;
    c.dims = dims;
    c.n = {12, dims > 1 ? 10 : 1, dims > 2 ? 8 : 1};
    c.functions["f"] = FunctionModel::power(1.0);
    c.functions["g"] = FunctionModel::exponential(0.5);
    c.functions["h"] = FunctionModel::power(2.0, 0.5);
    c.functions["q"] = FunctionModel::constant(0.1);
    c.initial = "1 + 1/2*cos(pi*x)*cos(pi*y)*cos(pi*z)";
    c.face = dims == 2 ? FaceAverage::Harmonic : FaceAverage::Arithmetic;
    Problem p(c);
    auto u = initial_field(c, p.grid);
    std::vector<double> a(u.size()), b(u.size());
    for (int s = 0; s < 5; ++s) {
      const double dt = stable_dt(p, u, 0.9, false);
      EXPECT_EQ(dt, stable_dt(p, u, 0.9, true));
      step_serial(p, u, dt, a);
      step_parallel(p, u, dt, b);
      ASSERT_EQ(a, b) << "dims " << dims << " step " << s;
      u = a;
    }
  }
}

TEST(Solve, TinyStepAborts) {
  auto c = demo(16);
  c.functions["f"] = FunctionModel::exponential(60.0);
  EXPECT_THROW(solve(c), SimulationAbort);
}

TEST(Solve, Deterministic) {
  auto c = demo(16);
  auto a = solve(c, {}, true);
  auto b = solve(c, {}, false);
  EXPECT_EQ(a.final_state.u, b.final_state.u);
  EXPECT_EQ(a.steps, b.steps);
}

TEST(Balance, MassVectorSeriesLength) {
  auto c = demo(16);
  c.snapshot_every = 1;
  auto tr = solve(c);
  auto cv = mass2d();
  auto rep = discrete_balance(c, tr, cv);
  EXPECT_EQ(static_cast<int>(rep.residual.size()), tr.steps);
  EXPECT_EQ(rep.cumulative.size(), rep.residual.size());
  EXPECT_LT(rep.max_cumulative, 1e-2);

  BalanceMonitor mon(c, cv);
  solve(c, [&](const SimulationState& s) { mon.observe(s); });
  EXPECT_EQ(mon.report().residual, rep.residual);
}

TEST(Balance, ZeroVectorIsExact) {
  auto c = demo(16);
  BalanceMonitor mon(c, make_vector({"zero", {"0", "0", "0"}}));
  solve(c, [&](const SimulationState& s) { mon.observe(s); });
  EXPECT_EQ(mon.report().max_cumulative, 0.0);
}

TEST(Balance, TrivialCurlVectorConverges) {
  // wall integrals of tangential derivatives are midpoint sums, so this only converges
  auto cv = make_vector({"trivial", {"0", "-g(u)*u_y", "g(u)*u_x"}});
  std::vector<double> r;
  for (int n : {16, 32}) {
    auto c = demo(n);
    BalanceMonitor mon(c, cv);
    solve(c, [&](const SimulationState& s) { mon.observe(s); });
    r.push_back(mon.report().max_cumulative);
  }
  EXPECT_LT(r[0], 1e-4);
  EXPECT_GE(r[0] / r[1], 3.5);
}

TEST(Balance, RejectsUnavailableJets) {
  auto c = load_config(data("configs/porous1d.json"));
  EXPECT_THROW(BalanceMonitor(c, make_vector({"", {"u", "u_xy"}})), std::invalid_argument);
  auto d = demo();
  EXPECT_THROW(BalanceMonitor(d, make_vector({"", {"u", "v_x", "0"}})), std::invalid_argument);
  EXPECT_THROW(BalanceMonitor(d, make_vector({"", {"u", "u_x", "0", "0"}})), std::invalid_argument);
}

TEST(Balance, CsvLayout) {
  auto c = demo(8);
  BalanceMonitor mon(c, mass2d());
  solve(c, [&](const SimulationState& s) { mon.observe(s); });
  const std::string csv = mon.report().to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,t,density,boundary_flux,residual,cumulative");
  // header, initial state, one row per step
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), mon.report().residual.size() + 2);
  EXPECT_EQ(mon.report().to_json()["label"], "mass");
}

TEST(Study, LinearSpatialOrder) {
  auto rep = convergence_study(linear(16), 3);
  ASSERT_EQ(rep.solution_orders.size(), 2u);
  for (double p : rep.solution_orders) EXPECT_NEAR(p, 2.0, 0.2);
  // dt follows h^2, so the same errors fall like dt^1
  for (double p : rep.dt_orders) EXPECT_NEAR(p, 1.0, 0.2);
}

TEST(Study, ZeroDataGivesZeroError) {
  auto c = linear(8);
  c.initial = "0";
  c.exact.reset();
  for (const char* mode : {"space", "time"}) {
    auto rep = convergence_study(c, 3, {}, mode);
    for (const auto& l : rep.levels) EXPECT_EQ(l.error, 0.0) << mode;
  }
}

TEST(Study, TimeModeHalvesStep) {
  auto rep = convergence_study(linear(16), 3, {}, "time");
  ASSERT_EQ(rep.levels.size(), 3u);
  EXPECT_DOUBLE_EQ(rep.levels[1].dt * 2, rep.levels[0].dt);
  EXPECT_EQ(rep.levels[0].n, rep.levels[2].n);
  auto j = rep.to_json();
  EXPECT_EQ(j["mode"], "time");
}

TEST(Study, RefiningSamplesIsRejected) {
  auto c = load_config(data("configs/porous1d.json"));
  EXPECT_THROW(convergence_study(c, 3), ConfigError);
}

TEST(Snapshot, RoundTrip) {
  auto c = demo(8);
  auto tr = solve(c);
  const auto path = (std::filesystem::temp_directory_path() / "clforge_snap_test.bin").string();
  write_snapshot(path, c, tr.final_state);
  SimulationConfig h;
  auto s = read_snapshot(path, &h);
  EXPECT_EQ(s.u, tr.final_state.u);
  EXPECT_EQ(s.t, tr.final_state.t);
  EXPECT_EQ(h.dims, 2);
  EXPECT_EQ(h.n[0], 8);
  EXPECT_EQ(h.upper[1], 1.0);
  std::filesystem::remove(path);
  EXPECT_ANY_THROW(read_snapshot(data("configs/demo2d.json")));
}
