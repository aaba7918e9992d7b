/// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "clforge/conslaw.hpp"
#include "clforge/euler.hpp"
#include "clforge/format.hpp"
#include "clforge/numlab.hpp"
#include "clforge/oracle.hpp"
#include "clforge/report.hpp"

#include "../random_expr.hpp"
#include "../reference_vectors.hpp"

using namespace clf;
using Clock = std::chrono::steady_clock;

namespace {

std::string data(const std::string& rel) { return std::string(CLFORGE_DATA_DIR) + "/" + rel; }
DifferentialEquation eqf(const std::string& name) { return load_equation(data("equations/" + name + ".eq")); }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream note;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) note << "; ";
      note << what;
      pass = false;
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  if (!o.pass) ++failures;
  std::printf("%s  %d  %-34s %6.2fs  %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), seconds_since(t0),
              o.note.str().c_str());
  std::fflush(stdout);
}

void adjoint_exactness(Outcome& o) {
  const auto t0 = Clock::now();
  auto a3 = eqf("anisotropic3d");
  o.require(adjoint_equation(a3).F == parse("v_t + f(u)*v_xx + g(u)*v_yy + h(u)*v_zz"), "3D adjoint differs");
  auto src = eqf("source2d");
  o.require(adjoint_equation(src).F == parse("v_t + f(u)*v_xx + g(u)*v_yy + q1(u)*v"), "source adjoint differs");
  const double t = seconds_since(t0);
  o.require(t < 1.0, "took " + std::to_string(t) + " s");
  o.note << "F* exact for both equations in " << t << " s";
}

void family_suite(Outcome& o) {
  struct Case {
    const char* file;
    const char* phi;
  };
  const Case cases[] = {
      {"anisotropic3d", "a1*x*y*z + a2*x*y + a3*x*z + a4*y*z + a5*x + a6*y + a7*z + a8"},
      {"source2d_omega", "(A1*y + B1)*cos(omega*x) + (A2*y + B2)*sin(omega*x)"},
      {"source2d_delta", "(A1*y + B1)*exp(delta*x) + (A2*y + B2)*exp(-delta*x)"},
      {"constant_g3d", "alpha(t,y)*x*z + beta(t,y)*x + gamma(t,y)*z + sigma(t,y)"},
  };
  int ok = 0;
  for (const Case& c : cases) {
    auto eq = eqf(c.file);
    auto s = solve_substitution(determining_system(eq));
    const bool same = s.phi == parse(c.phi, eq.symbols);
    o.require(same, std::string(c.file) + ": phi = " + to_plain(s.phi));
    Expr lambda = verify_substitution(eq, s);
    o.require(lambda == -jet_partial(s.phi, Atom::jet('u')), std::string(c.file) + ": lambda != -phi_u");
    o.require(check_substitution(eq, s).residual.is_zero(), std::string(c.file) + ": residual");
    ok += same;
  }
  auto a3 = solve_substitution(determining_system(eqf("anisotropic3d")));
  o.require(a3.params.size() == 8, "polynomial family has " + std::to_string(a3.params.size()) + " parameters");
  auto cg = solve_substitution(determining_system(eqf("constant_g3d")));
  o.require(cg.constraints.size() == 4, "constrained family lacks its four constraints");
  auto sys = determining_system(eqf("source2d"));
  bool inconsistent = sys.tag == SystemTag::Inconsistent;
  try {
    solve_substitution(sys);
    inconsistent = false;
  } catch (const InconsistentSystemError&) {
  }
  o.require(inconsistent, "arbitrary q not reported inconsistent");
  o.note << ok << "/4 families exact, lambda = 0, arbitrary q inconsistent";
}

void theorem_translations(Outcome& o) {
  auto eq = eqf("anisotropic3d");
  auto st = conservation_study(eq, translations(eq));
  o.require(st.basis.size() == 10, "basis size " + std::to_string(st.basis.size()));
  int found = 0;
  for (const auto& r : clf::testing::translation_vectors_3d()) {
    const bool hit = clf::testing::find_member(st.basis, clf::testing::make_vector(r)) >= 0;
    o.require(hit, "missing " + r.name);
    found += hit;
  }
  o.require(st.rank == 10 && coefficient_rank(st.basis) == 10, "rank " + std::to_string(st.rank));
  const auto& x1 = st.reduced.front();
  bool zero = true;
  for (const Expr& c : x1.components) zero = zero && c.is_zero();
  o.require(zero && is_trivial(x1, st.bound), "time translation not trivial");
  o.note << found << "/10 vectors match component by component, rank " << st.rank << ", time translation trivial";
}

void theorem_source(Outcome& o) {
  auto eq = eqf("source2d_omega");
  auto st = conservation_study(eq, parse_generators("X2", eq));
  o.require(st.basis.size() == 4, "basis size " + std::to_string(st.basis.size()));
  int found = 0;
  for (const auto& r : clf::testing::omega_vectors()) {
    const bool hit =
        clf::testing::find_member(st.basis, clf::testing::make_vector(r, eq.symbols), {Rational(1), Rational(-1)}) >= 0;
    o.require(hit, "missing " + r.name);
    found += hit;
  }
  auto lead = clf::testing::make_vector(clf::testing::omega_vectors()[0], eq.symbols);
  Expr mu = divergence_residual(lead, eq);
  o.require(mu == parse("-sin(omega*x)", eq.symbols), "factor " + to_plain(mu));
  o.note << found << "/4 vectors match up to sign, conservation form factor " << to_plain(mu) << " (F = rhs - u_t)";
}

void divergence_identities(Outcome& o) {
  struct Group {
    DifferentialEquation eq;
    std::vector<ConservedVector> vectors;
  };
  std::vector<Group> groups;
  for (const char* n : {"anisotropic3d", "source2d_omega", "source2d_delta"}) {
    auto eq = eqf(n);
    auto st = conservation_study(eq, translations(eq));
    Group g{st.bound, st.basis};
    for (const auto& r : st.reduced) g.vectors.push_back(r);
    groups.push_back(std::move(g));
  }
  OracleOptions opt;
  opt.seed = 1;
  opt.samples = 1000;
  opt.tolerance = 1e-10;
  int checked = 0;
  double worst = 0, worst_series = 0;
  for (auto& g : groups)
    for (auto& cv : g.vectors) {
      Expr mu;
      try {
        mu = divergence_residual(cv, g.eq);
      } catch (const DivergenceFailure&) {
        o.require(false, cv.label + ": no multiplier");
        continue;
      }
      Expr lhs = divergence(cv, g.eq) - simplify_for(cv, g.eq, mu * g.eq.F);
      o.require(simplify_for(cv, g.eq, lhs).is_zero(), cv.label + ": Div C - mu F != 0");
      cv.mu = mu;
      auto r = vector_jet_oracle(cv, g.eq, opt);
      worst = std::max(worst, r.max_residual);
      o.require(r.passed(), cv.label + ": oracle " + std::to_string(r.max_residual));
      auto sr = series_oracle(cv, g.eq, opt);
      worst_series = std::max(worst_series, sr.max_residual);
      o.require(sr.passed(), cv.label + ": series oracle " + std::to_string(sr.max_residual));
      ++checked;
    }

  auto eq = eqf("anisotropic3d");
  auto bad = clf::testing::make_vector({"flipped", {"-u", "f(u)*u_x", "-g(u)*u_y", "h(u)*u_z"}});
  bool symbolic_rejects = false;
  try {
    divergence_residual(bad, eq);
  } catch (const DivergenceFailure&) {
    symbolic_rejects = true;
  }
  bad.mu = Expr(1);
  auto r = vector_jet_oracle(bad, eq, opt);
  o.require(symbolic_rejects, "negative control passes symbolically");
  o.require(!r.passed(), "negative control passes the oracle");
  o.note << checked << " vectors exact, jet oracle max " << worst << ", series oracle max " << worst_series
         << "; negative control residual " << r.max_residual;
}

void numeric_balance(Outcome& o) {
  auto c = load_config(data("configs/demo2d.json"));
  c.vectors.clear();
  c.n = {32, 32, 1};
  auto mass = load_vectors(data("vectors/mass_2d.json"));
  auto rep = convergence_study(c, 3, mass);
  const auto& ratios = rep.balance_ratios.at(mass.front().label);
  for (double r : ratios) o.require(r >= 3.5, "balance ratio " + std::to_string(r));

  auto l = load_config(data("configs/linear_periodic.json"));
  l.n = {16, 16, 1};
  auto lin = convergence_study(l, 4);
  for (double p : lin.solution_orders) o.require(std::abs(p - 2.0) <= 0.2, "linear order " + std::to_string(p));

  o.note << "mass balance ratios";
  for (double r : ratios) o.note << " " << r;
  o.note << " (N = 32, 64, 128); linear orders";
  for (double p : lin.solution_orders) o.note << " " << p;
}

void property_suites(Outcome& o) {
  int fails = 0, cases = 0;
  clf::testing::ExprGen g1(2024, 1);
  for (int i = 0; i < 200; ++i, ++cases) {
    Expr e = g1();
    for (Axis a : {Axis::t, Axis::x, Axis::y})
      if (!variational_derivative(total_derivative(e, a)).is_zero()) ++fails;
  }
  clf::testing::ExprGen g2(2025, 2);
  for (int i = 0; i < 200; ++i, ++cases) {
    Expr e = g2();
    if (total_derivative(total_derivative(e, Axis::x), Axis::y) != total_derivative(total_derivative(e, Axis::y), Axis::x))
      ++fails;
  }
  clf::testing::ExprGen g3(2026, 2);
  for (int i = 0; i < 200; ++i, ++cases) {
    Expr e = g3() * g3();
    if (normalize(normalize(e)) != normalize(e) || parse(to_plain(e)) != e) ++fails;
  }
  o.require(fails == 0, std::to_string(fails) + " failures");
  o.note << cases << " random expressions, " << fails << " failures";
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion(1, "adjoint exactness", adjoint_exactness);
  criterion(2, "self-adjointness families", family_suite);
  criterion(3, "translation vectors (3D)", theorem_translations);
  criterion(4, "translation vectors (source)", theorem_source);
  criterion(5, "divergence identities", divergence_identities);
  criterion(6, "numeric balance", [&](Outcome& o) {
    numeric_balance(o);
    const double total = seconds_since(t0);
    o.require(total < 300.0, "suite time " + std::to_string(total) + " s");
  });
  criterion(7, "property suites", property_suites);
  std::printf("total %.1fs, %d failed\n", seconds_since(t0), failures);
  return failures == 0 ? 0 : 1;
}
