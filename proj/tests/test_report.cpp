#include <gtest/gtest.h>

#include "clforge/format.hpp"
#include "clforge/report.hpp"

#include "reference_vectors.hpp"

using namespace clf;

namespace {

std::string data(const std::string& rel) { return std::string(CLFORGE_DATA_DIR) + "/" + rel; }

}  // namespace

TEST(VectorFile, RoundTripPlainVector) {
  auto vs = load_vectors(data("vectors/translations_3d.json"));
  ASSERT_EQ(vs.size(), 10u);
  auto again = vectors_from_json(vectors_to_json(vs, "x"));
  ASSERT_EQ(again.size(), vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    EXPECT_EQ(again[i].components, vs[i].components);
    EXPECT_EQ(again[i].axes, vs[i].axes);
    EXPECT_EQ(again[i].label, vs[i].label);
  }
}

TEST(VectorFile, RoundTripVFormFamily) {
  auto eq = load_equation(data("equations/constant_g3d.eq"));
  auto s = solve_substitution(determining_system(eq));
  auto cv = reduce_vector(conserved_vector(eq, SymmetryGenerator::translation(Axis::x), s), eq);
  cv.mu = divergence_residual(cv, eq);
  auto back = vector_from_json(vector_to_json(cv), eq.symbols);
  EXPECT_TRUE(back.v_form);
  EXPECT_EQ(back.components, cv.components);
  ASSERT_TRUE(back.substitution);
  EXPECT_EQ(back.substitution->phi, s.phi);
  EXPECT_EQ(back.substitution->constraints.size(), 4u);
  EXPECT_EQ(back.mu, cv.mu);
  EXPECT_EQ(divergence_residual(back, eq), *cv.mu);
}

TEST(VectorFile, Rejections) {
  nlohmann::json bad = {{"vectors", {{{"axes", "txy"}, {"components", {"u", "u_x"}}}}}};
  EXPECT_THROW(vectors_from_json(bad), std::invalid_argument);
  bad = {{"vectors", {{{"axes", "xy"}, {"components", {"u", "u_x"}}}}}};
  EXPECT_THROW(vectors_from_json(bad), std::invalid_argument);
  bad = {{"vectors", {{{"axes", "tx"}, {"components", {"v", "u_x"}}}}}};
  EXPECT_THROW(vectors_from_json(bad), std::invalid_argument);
  EXPECT_THROW(vectors_from_json(nlohmann::json::object()), std::invalid_argument);
  EXPECT_THROW(load_vectors(data("configs/missing.json")), std::invalid_argument);
}

TEST(Render, PlainAndLatex) {
  auto cv = clf::testing::make_vector(clf::testing::translation_vectors_3d()[0]);
  EXPECT_EQ(render_plain(cv), "  C^t = -u\n  C^x = f(u)*u_x\n  C^y = g(u)*u_y\n  C^z = h(u)*u_z\n");
  const std::string tex = render_latex(cv);
  EXPECT_EQ(tex.rfind("\\begin{align*}", 0), 0u);
  EXPECT_NE(tex.find("C^4 &= h(u)"), std::string::npos);
  EXPECT_NE(tex.find("\\end{align*}"), std::string::npos);
}

TEST(Manifest, Sha256) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, DeterministicApartFromTimestamp) {
  auto make = [&](const std::string& ts) {
    RunManifest m;
    m.command = "conslaws";
    m.options = {{"ansatz", "auto"}, {"seed", 1}};
    m.equation_text = read_file(data("equations/anisotropic3d.eq"));
    m.add_input(data("equations/anisotropic3d.eq"));
    m.timestamp = ts;
    return report_json(m, {{"rank", 10}});
  };
  EXPECT_EQ(make("2024-01-01T00:00:00Z"), make("2024-01-01T00:00:00Z"));
  auto a = nlohmann::json::parse(make("a"));
  auto b = nlohmann::json::parse(make("b"));
  a["manifest"].erase("timestamp");
  b["manifest"].erase("timestamp");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a["manifest"]["tool"], "clforge");
  EXPECT_EQ(a["manifest"]["inputs"][0]["sha256"].get<std::string>().size(), 64u);
}

TEST(Format, Names) {
  EXPECT_EQ(format_from_string("latex"), OutputFormat::Latex);
  EXPECT_THROW(format_from_string("html"), std::invalid_argument);
  EXPECT_EQ(utc_timestamp().size(), 20u);
}
