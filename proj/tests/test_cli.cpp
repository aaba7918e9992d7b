#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

std::string data(const std::string& rel) { return std::string(CLFORGE_DATA_DIR) + "/" + rel; }

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("clforge_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Run run(const std::string& args) {
  static int counter = 0;
  const fs::path log = fs::temp_directory_path() / ("clforge_cli_out_" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(CLFORGE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
  fs::remove(log);
  return r;
}

nlohmann::json without_timestamp(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  j["manifest"].erase("timestamp");
  return j;
}

}  // namespace

TEST(Cli, AdjointPlain) {
  auto r = run("adjoint " + data("equations/anisotropic3d.eq"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("f(u)*v_xx + g(u)*v_yy + h(u)*v_zz + v_t"), std::string::npos) << r.out;
}

TEST(Cli, AdjointLinearHeat) {
  auto r = run("adjoint " + data("equations/linear_heat.eq"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("k*v_yy + v_t"), std::string::npos) << r.out;
}

TEST(Cli, AdjointLatexAndJson) {
  auto tex = run("--format latex adjoint " + data("equations/anisotropic3d.eq"));
  EXPECT_EQ(tex.code, 0);
  EXPECT_NE(tex.out.find("v_{xx}"), std::string::npos);
  auto js = run("--format json adjoint " + data("equations/anisotropic3d.eq"));
  EXPECT_EQ(js.code, 0);
  auto j = nlohmann::json::parse(js.out);
  EXPECT_EQ(j["manifest"]["command"], "adjoint");
}

TEST(Cli, MalformedEquationIsInputError) {
  auto r = run("adjoint " + data("equations/malformed.eq"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("line 3"), std::string::npos) << r.out;
  EXPECT_EQ(run("adjoint /nonexistent/file.eq").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST(Cli, SelfAdjointFamilies) {
  auto r = run("selfadjoint " + data("equations/anisotropic3d.eq"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("a1*x*y*z + a2*x*y + a3*x*z + a4*y*z + a5*x + a6*y + a7*z + a8"), std::string::npos);
  auto t = run("selfadjoint " + data("equations/source2d_omega.eq"));
  EXPECT_NE(t.out.find("trig family"), std::string::npos) << t.out;
}

TEST(Cli, ArbitrarySourceIsNotSelfAdjoint) {
  auto r = run("selfadjoint " + data("equations/source2d.eq"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("not nonlinearly self-adjoint (phi = 0 forced)"), std::string::npos) << r.out;
}

TEST(Cli, OutsideAnsatzIsReported) {
  auto r = run("selfadjoint " + data("equations/source2d_linked.eq"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("outside ansatz"), std::string::npos);
  EXPECT_EQ(run("--ansatz trig selfadjoint " + data("equations/source2d_linked.eq")).code, 0);
}

TEST(Cli, ConslawsTenVectorsAndArtifacts) {
  auto dir = scratch("conslaws");
  auto r = run("--out " + dir.string() + " conslaws " + data("equations/anisotropic3d.eq"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("10 nontrivial conserved vectors (rank 10)"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  auto basis = nlohmann::json::parse(slurp(dir / "basis.json"));
  EXPECT_EQ(basis["vectors"].size(), 10u);
  EXPECT_TRUE(fs::exists(dir / "families.json"));
}

TEST(Cli, TimeTranslationOnlyIsTrivial) {
  auto r = run("conslaws --symmetry X1 " + data("equations/anisotropic3d.eq"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("all conserved vectors trivial"), std::string::npos) << r.out;
}

TEST(Cli, OmegaSourceBasis) {
  auto r = run("conslaws --symmetry X2 " + data("equations/source2d_omega.eq"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("4 nontrivial conserved vectors (rank 4)"), std::string::npos) << r.out;
}

TEST(Cli, ReportsAreDeterministic) {
  auto a = scratch("det_a"), b = scratch("det_b");
  const std::string eq = data("equations/source2d_omega.eq");
  ASSERT_EQ(run("--out " + a.string() + " conslaws " + eq).code, 0);
  ASSERT_EQ(run("--out " + b.string() + " conslaws " + eq).code, 0);
  EXPECT_EQ(without_timestamp(slurp(a / "report.json")), without_timestamp(slurp(b / "report.json")));
  EXPECT_EQ(slurp(a / "basis.json"), slurp(b / "basis.json"));
}

TEST(Cli, VerifySymbolicFamily) {
  auto dir = scratch("families");
  ASSERT_EQ(run("--out " + dir.string() + " conslaws " + data("equations/anisotropic3d.eq")).code, 0);
  auto r = run("verify " + data("equations/anisotropic3d.eq") + " " + (dir / "families.json").string() +
               " --mode symbolic");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Div C = (v_x) F"), std::string::npos) << r.out;
}

TEST(Cli, VerifyOracleOmega) {
  auto r = run("--seed 1 --samples 1000 verify " + data("equations/source2d_omega.eq") + " " +
               data("vectors/omega_cos.json") + " --mode oracle");
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, OracleIsDeterministicUnderSeed) {
  const std::string args = "--format json --seed 7 --samples 200 verify " + data("equations/anisotropic3d.eq") + " " +
                           data("vectors/mass_3d_flipped.json") + " --mode oracle";
  auto a = run(args), b = run(args);
  EXPECT_EQ(a.code, 1);
  EXPECT_EQ(without_timestamp(a.out), without_timestamp(b.out));
}

TEST(Cli, CorruptedVectorFails) {
  auto sym = run("verify " + data("equations/anisotropic3d.eq") + " " + data("vectors/mass_3d_flipped.json") +
                 " --mode symbolic");
  EXPECT_EQ(sym.code, 1);
  auto orc = run("verify " + data("equations/anisotropic3d.eq") + " " + data("vectors/mass_3d_flipped.json") +
                 " --mode oracle");
  EXPECT_EQ(orc.code, 1);
  EXPECT_NE(orc.out.find("max"), std::string::npos) << orc.out;
  EXPECT_NE(orc.out.find("sample"), std::string::npos) << orc.out;
}

TEST(Cli, VerifyNumeric) {
  auto dir = scratch("numeric");
  auto cfg = nlohmann::json::parse(slurp(data("configs/demo2d.json")));
  cfg["n"] = {16, 16};
  cfg.erase("vectors");
  std::ofstream(dir / "small.json") << cfg.dump(2);
  const std::string eq = data("equations/source2d.eq");
  auto good = run("verify " + eq + " " + data("vectors/moment_y_2d.json") + " --mode numeric --config " +
                  (dir / "small.json").string());
  EXPECT_EQ(good.code, 0) << good.out;
  auto bad = run("verify " + eq + " " + data("vectors/moment_y_2d_flipped.json") + " --mode numeric --config " +
                 (dir / "small.json").string());
  EXPECT_EQ(bad.code, 1) << bad.out;
}

TEST(Cli, SimulateWritesArtifacts) {
  auto dir = scratch("simulate");
  auto cfg = nlohmann::json::parse(slurp(data("configs/demo2d.json")));
  cfg["n"] = {16, 16};
  cfg["snapshot_every"] = 10;
  cfg.erase("study");
  cfg["vectors"] = {data("vectors/mass_2d.json")};
  std::ofstream(dir / "run.json") << cfg.dump(2);
  auto r = run("--out " + (dir / "out").string() + " simulate " + (dir / "run.json").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "balance_1.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "final.bin"));
  EXPECT_TRUE(fs::exists(dir / "out" / "snap_000000.bin"));
  auto rep = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  EXPECT_EQ(rep["result"]["balance"][0]["label"], "mass");
}

TEST(Cli, SimulateStudyOrders) {
  auto r = run("--format json simulate " + data("configs/study_levels4.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["result"]["study"]["solution_orders"].size(), 3u);
}

TEST(Cli, SimulateRejectsLarge3D) {
  auto r = run("simulate " + data("configs/invalid3d.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("limited to 64"), std::string::npos) << r.out;
}
