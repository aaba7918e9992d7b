#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clforge/conslaw.hpp"
#include "clforge/euler.hpp"
#include "clforge/format.hpp"
#include "clforge/numlab.hpp"
#include "clforge/oracle.hpp"
#include "clforge/report.hpp"
#include "clforge/selfadjoint.hpp"

namespace fs = std::filesystem;
using namespace clf;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kInputError = 2;

struct Options {
  std::string format = "plain";
  std::uint64_t seed = 1;
  int samples = 1000;
  std::string out;
  std::string ansatz = "auto";
};

struct Output {
  std::string plain;
  std::string latex;
  nlohmann::json result;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

void emit(const Options& opt, const RunManifest& m, const Output& o) {
  const std::string json = report_json(m, o.result);
  switch (format_from_string(opt.format)) {
    case OutputFormat::Plain: std::cout << o.plain; break;
    case OutputFormat::Latex: std::cout << (o.latex.empty() ? o.plain : o.latex); break;
    case OutputFormat::Json: std::cout << json; break;
  }
  if (!opt.out.empty()) {
    fs::create_directories(opt.out);
    write_text(fs::path(opt.out) / "report.json", json);
  }
}

RunManifest manifest(const std::string& command, const Options& opt) {
  RunManifest m;
  m.command = command;
  m.options = {{"format", opt.format}, {"seed", opt.seed}, {"samples", opt.samples}, {"ansatz", opt.ansatz}};
  m.timestamp = utc_timestamp();
  return m;
}

DifferentialEquation read_equation(const std::string& path, RunManifest& m) {
  m.add_input(path);
  m.equation_text = read_file(path);
  DifferentialEquation eq = parse_equation_file(m.equation_text);
  if (eq.name.empty()) eq.name = fs::path(path).stem().string();
  return eq;
}

nlohmann::json vector_json(const ConservedVector& cv, const DifferentialEquation& eq) {
  nlohmann::json j = vector_to_json(cv);
  j["latex"] = nlohmann::json::array();
  for (const Expr& c : cv.components) j["latex"].push_back(to_latex(c));
  j["trivial"] = is_trivial(cv, eq);
  j["trail"] = cv.trail;
  return j;
}

std::string describe_vector(const ConservedVector& cv, const DifferentialEquation& eq) {
  std::ostringstream os;
  os << cv.label << (is_trivial(cv, eq) ? "  [trivial]" : "") << "\n" << render_plain(cv);
  os << "  mu  = " << (cv.mu ? to_plain(*cv.mu) : std::string("(none)")) << "\n";
  return os.str();
}

nlohmann::json substitution_json(const Substitution& s) {
  nlohmann::json j;
  j["family"] = s.family;
  j["phi"] = to_plain(s.phi);
  j["phi_latex"] = to_latex(s.phi);
  j["params"] = nlohmann::json::array();
  for (const Atom& a : s.params) j["params"].push_back(to_plain(a));
  j["constraints"] = nlohmann::json::array();
  for (const auto& c : s.constraints) j["constraints"].push_back(c.describe());
  j["bindings"] = nlohmann::json::object();
  for (const auto& [a, e] : s.bindings) j["bindings"][a.name] = to_plain(e);
  return j;
}

int cmd_adjoint(const std::string& path, const Options& opt) {
  RunManifest m = manifest("adjoint", opt);
  const DifferentialEquation eq = read_equation(path, m);
  const DifferentialEquation adj = adjoint_equation(eq);
  Output o;
  o.result = {{"equation", to_plain(eq.F)},
              {"adjoint", to_plain(adj.F)},
              {"adjoint_latex", to_latex(adj.F)},
              {"adjoint_tree", to_json(adj.F)},
              {"convention", eq.convention}};
  o.plain = "F  = " + to_plain(eq.F) + " = 0\nF* = " + to_plain(adj.F) + " = 0\n";
  o.latex = "F^* = " + to_latex(adj.F) + " = 0\n";
  emit(opt, m, o);
  return kOk;
}

int cmd_selfadjoint(const std::string& path, const Options& opt) {
  RunManifest m = manifest("selfadjoint", opt);
  const DifferentialEquation eq = read_equation(path, m);
  const DeterminingSystem sys = determining_system(eq);
  Output o;
  o.result["system_tag"] = tag_name(sys.tag);
  o.result["determining_system"] = nlohmann::json::array();
  for (const Expr& c : sys.constraints) o.result["determining_system"].push_back(to_plain(c));
  try {
    const Substitution s = solve_substitution(sys, ansatz_from_string(opt.ansatz));
    const Expr lambda = verify_substitution(eq, s);
    o.result["self_adjoint"] = true;
    o.result["substitution"] = substitution_json(s);
    o.result["lambda"] = to_plain(lambda);
    std::ostringstream os;
    os << "nonlinearly self-adjoint (" << s.family << " family)\n";
    os << "  phi    = " << to_plain(s.phi) << "\n";
    std::string ps;
    for (const Atom& a : s.params) ps += (ps.empty() ? "" : ", ") + to_plain(a);
    os << "  params = " << ps << " (" << s.params.size() << ")\n";
    for (const auto& c : s.constraints) os << "  where  " << c.describe() << "\n";
    for (const auto& [a, e] : s.bindings) os << "  with   " << a.name << " = " << to_plain(e) << "\n";
    os << "  lambda = " << to_plain(lambda) << "\n";
    o.plain = os.str();
    o.latex = "\\varphi = " + to_latex(s.phi) + ",\\qquad \\lambda = " + to_latex(lambda) + "\n";
  } catch (const InconsistentSystemError& e) {
    o.result["self_adjoint"] = false;
    o.result["reason"] = e.what();
    o.plain = std::string("not nonlinearly self-adjoint (phi = 0 forced)\n  ") + e.what() + "\n";
  }
  emit(opt, m, o);
  return kOk;
}

int cmd_conslaws(const std::string& path, const std::string& symmetry, const std::string& fold, const Options& opt) {
  RunManifest m = manifest("conslaws", opt);
  m.options["symmetry"] = symmetry;
  m.options["fold"] = fold;
  const DifferentialEquation eq = read_equation(path, m);
  FoldPolicy policy = FoldPolicy::Auto;
  if (fold == "always") {
    policy = FoldPolicy::Always;
  } else if (fold == "never") {
    policy = FoldPolicy::Never;
  } else if (fold != "auto") {
    throw std::invalid_argument("unknown fold policy '" + fold + "' (auto, always, never)");
  }
  const auto gens = parse_generators(symmetry, eq);
  const ConservationStudy st = conservation_study(eq, gens, ansatz_from_string(opt.ansatz), policy);
  Output o;
  o.result["substitution"] = substitution_json(st.substitution);
  o.result["families"] = nlohmann::json::array();
  std::ostringstream os, tex;
  os << "v = " << to_plain(st.substitution.phi) << "\n\n";
  for (std::size_t i = 0; i < gens.size(); ++i) {
    o.result["families"].push_back({{"generator", gens[i].name},
                                    {"raw", vector_json(st.raw[i], eq)},
                                    {"reduced", vector_json(st.reduced[i], eq)}});
    os << describe_vector(st.raw[i], eq) << describe_vector(st.reduced[i], eq);
    for (const auto& t : st.reduced[i].trail) os << "    " << t << "\n";
    os << "\n";
  }
  o.result["basis"] = nlohmann::json::array();
  for (const auto& b : st.basis) {
    o.result["basis"].push_back(vector_json(b, eq));
    tex << "% " << b.label << "\n" << render_latex(b);
    if (b.mu) tex << "% mu = " << to_plain(*b.mu) << "\n";
  }
  o.result["rank"] = st.rank;
  if (st.basis.empty()) {
    os << "all conserved vectors trivial\n";
    tex << "% all conserved vectors trivial\n";
  } else {
    os << st.basis.size() << " nontrivial conserved vectors (rank " << st.rank << ")\n\n";
    for (const auto& b : st.basis) os << describe_vector(b, eq);
  }
  o.plain = os.str();
  o.latex = tex.str();
  emit(opt, m, o);
  if (!opt.out.empty()) {
    write_text(fs::path(opt.out) / "families.json", vectors_to_json(st.reduced, eq.name).dump(2) + "\n");
    write_text(fs::path(opt.out) / "basis.json", vectors_to_json(st.basis, eq.name).dump(2) + "\n");
  }
  return kOk;
}

int cmd_verify(const std::string& eq_path, const std::string& vec_path, const std::string& mode,
               const std::string& config_path, double tolerance, const Options& opt) {
  RunManifest m = manifest("verify", opt);
  m.options["mode"] = mode;
  m.options["tolerance"] = tolerance;
  const DifferentialEquation eq = read_equation(eq_path, m);
  m.add_input(vec_path);
  const std::vector<ConservedVector> vectors = load_vectors(vec_path, eq.symbols);
  Output o;
  o.result["mode"] = mode;
  o.result["vectors"] = nlohmann::json::array();
  std::ostringstream os;
  bool ok = true;
  if (mode == "symbolic" || mode == "oracle") {
    OracleOptions oo;
    oo.seed = opt.seed;
    oo.samples = opt.samples;
    oo.tolerance = tolerance;
    for (const ConservedVector& cv : vectors) {
      const DifferentialEquation eqb = cv.substitution ? bind_equation(eq, *cv.substitution) : eq;
      nlohmann::json r{{"label", cv.label}};
      bool pass = true;
      if (mode == "symbolic") {
        try {
          const Expr mu = divergence_residual(cv, eqb);
          r["mu"] = to_plain(mu);
          os << cv.label << ": Div C = (" << to_plain(mu) << ") F";
          if (cv.mu && !(mu - *cv.mu).is_zero()) {
            pass = false;
            r["expected_mu"] = to_plain(*cv.mu);
            os << "  [expected mu = " << to_plain(*cv.mu) << "]";
          }
          os << "\n";
        } catch (const DivergenceFailure& e) {
          pass = false;
          r["error"] = e.what();
          r["residual"] = to_plain(e.residual());
          os << cv.label << ": FAILED, " << e.what() << "\n  residual " << to_plain(e.residual()) << "\n";
        }
      } else {
        const OracleReport jet = vector_jet_oracle(cv, eq, oo);
        const OracleReport series = series_oracle(cv, eq, oo);
        r["jet"] = jet.to_json();
        r["series"] = series.to_json();
        pass = jet.passed() && series.passed();
        os << cv.label << ": jet max |Div C| = " << jet.max_residual << " (sample " << jet.worst_sample
           << "), series max = " << series.max_residual << " (sample " << series.worst_sample << ") over "
           << jet.samples << " samples" << (pass ? "" : "  FAILED") << "\n";
      }
      r["passed"] = pass;
      ok = ok && pass;
      o.result["vectors"].push_back(r);
    }
  } else if (mode == "numeric") {
    if (config_path.empty()) throw std::invalid_argument("numeric verification needs --config");
    m.add_input(config_path);
    const SimulationConfig cfg = load_config(config_path);
    std::vector<ConservedVector> concrete;
    for (const auto& cv : vectors) concrete.push_back(cv.v_form ? eliminate_v(cv) : cv);
    for (std::size_t i = 0; i < concrete.size(); ++i)
      if (concrete[i].label.empty()) concrete[i].label = "vector " + std::to_string(i + 1);
    const int levels = std::max(3, cfg.study_levels);
    const ConvergenceReport rep = convergence_study(cfg, levels, concrete, cfg.study_mode);
    o.result["study"] = rep.to_json();
    for (const auto& cv : concrete) {
      const auto& ratios = rep.balance_ratios.at(cv.label);
      const double finest = rep.levels.back().balance.at(cv.label);
      bool pass = finest < 1e-12;
      if (!pass) {
        pass = true;
        for (double r : ratios) pass = pass && r >= 3.5;
      }
      os << cv.label << ": max cumulative residual";
      for (const auto& l : rep.levels) os << " " << l.balance.at(cv.label);
      os << ", ratios";
      for (double r : ratios) os << " " << r;
      os << (pass ? "" : "  FAILED") << "\n";
      o.result["vectors"].push_back({{"label", cv.label}, {"passed", pass}});
      ok = ok && pass;
    }
  } else {
    throw std::invalid_argument("unknown mode '" + mode + "' (symbolic, oracle, numeric)");
  }
  o.result["passed"] = ok;
  os << (ok ? "all vectors verified\n" : "verification FAILED\n");
  o.plain = os.str();
  emit(opt, m, o);
  return ok ? kOk : kFailed;
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& extra_vectors, bool serial,
                 const Options& opt) {
  RunManifest m = manifest("simulate", opt);
  m.options["serial"] = serial;
  m.add_input(config_path);
  const SimulationConfig cfg = load_config(config_path);
  SymbolTable symbols = SymbolTable::standard();
  for (const auto& [k, v] : cfg.params) symbols.declare_param(k);
  std::vector<std::string> paths;
  for (const auto& v : cfg.vectors) paths.push_back((fs::path(config_path).parent_path() / v).string());
  paths.insert(paths.end(), extra_vectors.begin(), extra_vectors.end());
  std::vector<ConservedVector> vectors;
  for (const auto& p : paths) {
    m.add_input(p);
    for (auto& cv : load_vectors(p, symbols)) {
      if (cv.v_form) cv = eliminate_v(cv);
      if (cv.label.empty()) cv.label = "vector " + std::to_string(vectors.size() + 1);
      vectors.push_back(cv);
    }
  }
  std::vector<BalanceMonitor> monitors;
  for (const auto& cv : vectors) monitors.emplace_back(cfg, cv);
  const bool write = !opt.out.empty();
  if (write) fs::create_directories(opt.out);
  int written = 0;
  const Trajectory tr = solve(
      cfg,
      [&](const SimulationState& s) {
        for (auto& mon : monitors) mon.observe(s);
        if (write && cfg.snapshot_every > 0 && s.step % cfg.snapshot_every == 0) {
          std::ostringstream name;
          name << "snap_" << std::setw(6) << std::setfill('0') << s.step << ".bin";
          write_snapshot((fs::path(opt.out) / name.str()).string(), cfg, s);
          ++written;
        }
      },
      !serial);
  Output o;
  double umin = tr.final_state.u.front(), umax = umin;
  for (double x : tr.final_state.u) {
    umin = std::min(umin, x);
    umax = std::max(umax, x);
  }
  o.result["run"] = {{"steps", tr.steps}, {"final_time", tr.final_state.t}, {"min_dt", tr.min_dt},
                     {"max_dt", tr.max_dt}, {"u_min", umin}, {"u_max", umax}, {"snapshots", written}};
  o.result["config"] = cfg.to_json();
  o.result["balance"] = nlohmann::json::array();
  std::ostringstream os;
  os << "ran " << tr.steps << " steps to t = " << tr.final_state.t << " (dt in [" << tr.min_dt << ", " << tr.max_dt
     << "]), u in [" << umin << ", " << umax << "]\n";
  for (std::size_t i = 0; i < monitors.size(); ++i) {
    const BalanceReport& r = monitors[i].report();
    o.result["balance"].push_back(r.to_json());
    os << r.label << ": max |r| = " << r.max_residual << ", max |cumulative| = " << r.max_cumulative << "\n";
    if (write) write_text(fs::path(opt.out) / ("balance_" + std::to_string(i + 1) + ".csv"), r.to_csv());
  }
  if (cfg.study_levels >= 3) {
    const ConvergenceReport rep = convergence_study(cfg, cfg.study_levels, vectors, cfg.study_mode);
    o.result["study"] = rep.to_json();
    os << "study (" << rep.mode << "):\n";
    for (const auto& l : rep.levels) {
      os << "  n =";
      for (int a = 0; a < cfg.dims; ++a) os << " " << l.n[static_cast<std::size_t>(a)];
      os << "  dt = " << l.dt << "  error = " << l.error;
      for (const auto& [k, v] : l.balance) os << "  [" << k << "] " << v;
      os << "\n";
    }
    os << "  solution orders:";
    for (double x : rep.solution_orders) os << " " << x;
    os << "\n";
    for (const auto& [k, v] : rep.balance_orders) {
      os << "  balance orders [" << k << "]:";
      for (double x : v) os << " " << x;
      os << "\n";
    }
  }
  if (write) write_snapshot((fs::path(opt.out) / "final.bin").string(), cfg, tr.final_state);
  o.plain = os.str();
  emit(opt, m, o);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conservation laws of anisotropic nonlinear heat equations"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"plain", "latex", "json"}));
  app.add_option("--seed", opt.seed, "Oracle seed");
  app.add_option("--samples", opt.samples, "Oracle samples")->check(CLI::PositiveNumber);
  app.add_option("--out", opt.out, "Directory for report.json and artifacts");
  app.add_option("--ansatz", opt.ansatz, "Substitution ansatz")
      ->check(CLI::IsMember({"poly", "trig", "exp", "constrained", "auto"}));

  std::string eq_path, vec_path, mode = "symbolic", config_path, symmetry = "all", fold = "auto";
  double tolerance = 1e-10;
  bool serial = false;
  std::vector<std::string> extra_vectors;

  auto* adjoint = app.add_subcommand("adjoint", "Adjoint equation F*");
  adjoint->add_option("equation", eq_path, "Equation file")->required();
  auto* selfadj = app.add_subcommand("selfadjoint", "Nonlinear self-adjointness substitution");
  selfadj->add_option("equation", eq_path, "Equation file")->required();
  auto* conslaws = app.add_subcommand("conslaws", "Conserved vectors from translation symmetries");
  conslaws->add_option("equation", eq_path, "Equation file")->required();
  conslaws->add_option("--symmetry", symmetry, "Generators, e.g. X2,X3 or all");
  conslaws->add_option("--fold", fold, "Antiderivative folds: auto, always, never");
  auto* verify = app.add_subcommand("verify", "Check conserved vectors");
  verify->add_option("equation", eq_path, "Equation file")->required();
  verify->add_option("vectors", vec_path, "Vector file")->required();
  verify->add_option("--mode", mode, "symbolic, oracle or numeric")
      ->check(CLI::IsMember({"symbolic", "oracle", "numeric"}));
  verify->add_option("--config", config_path, "Simulation config for numeric mode");
  verify->add_option("--tolerance", tolerance, "Oracle tolerance");
  auto* simulate = app.add_subcommand("simulate", "Run the finite-difference solver with balance checks");
  simulate->add_option("config", config_path, "Simulation config")->required();
  simulate->add_option("--vectors", extra_vectors, "Additional vector files");
  simulate->add_flag("--serial", serial, "Use the serial reference kernel");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*adjoint) return cmd_adjoint(eq_path, opt);
    if (*selfadj) return cmd_selfadjoint(eq_path, opt);
    if (*conslaws) return cmd_conslaws(eq_path, symmetry, fold, opt);
    if (*verify) return cmd_verify(eq_path, vec_path, mode, config_path, tolerance, opt);
    if (*simulate) return cmd_simulate(config_path, extra_vectors, serial, opt);
  } catch (const VerificationFailure& e) {
    std::cerr << "verification failed: " << e.what() << "\n  residual " << to_plain(e.residual()) << "\n";
    return kFailed;
  } catch (const DivergenceFailure& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kFailed;
  } catch (const OutsideAnsatzError& e) {
    std::cerr << "outside ansatz: " << e.what() << "\n";
    return kFailed;
  } catch (const SimulationAbort& e) {
    std::cerr << "simulation aborted: " << e.what() << "\n";
    return kFailed;
  } catch (const ParseError& e) {
    std::cerr << "parse error at position " << e.position() << ": " << e.what() << "\n";
    return kInputError;
  } catch (const EquationFileError& e) {
    std::cerr << "equation file: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const MissingAssignment& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kInputError;
}
