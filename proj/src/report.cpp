#include "clforge/report.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

#include "clforge/format.hpp"

namespace clf {

OutputFormat format_from_string(const std::string& s) {
  if (s == "plain") return OutputFormat::Plain;
  if (s == "latex") return OutputFormat::Latex;
  if (s == "json") return OutputFormat::Json;
  throw std::invalid_argument("unknown format '" + s + "' (plain, latex, json)");
}

namespace {

std::string axes_string(const std::vector<Axis>& axes) {
  std::string s;
  for (Axis a : axes) s += axis_char(a);
  return s;
}

std::vector<Axis> axes_from_string(const std::string& s) {
  std::vector<Axis> out;
  for (char c : s) {
    auto a = axis_from_char(c);
    if (!a) throw std::invalid_argument("bad axis '" + std::string(1, c) + "' in \"" + s + "\"");
    out.push_back(*a);
  }
  if (out.empty() || out.front() != Axis::t) throw std::invalid_argument("axes must start with t");
  return out;
}

}  // namespace

nlohmann::json vector_to_json(const ConservedVector& cv) {
  nlohmann::json j;
  j["label"] = cv.label;
  j["axes"] = axes_string(cv.axes);
  j["components"] = nlohmann::json::array();
  for (const Expr& e : cv.components) j["components"].push_back(to_plain(e));
  if (cv.mu) j["mu"] = to_plain(*cv.mu);
  if (cv.substitution) {
    const Substitution& s = *cv.substitution;
    nlohmann::json sj;
    sj["phi"] = to_plain(s.phi);
    sj["bindings"] = nlohmann::json::object();
    for (const auto& [a, e] : s.bindings) sj["bindings"][a.name] = to_plain(e);
    sj["constraints"] = nlohmann::json::array();
    for (const SymbolConstraint& c : s.constraints)
      sj["constraints"].push_back({{"name", c.name}, {"space", std::string(1, axis_char(c.space))}, {"K", to_plain(c.K)}});
    j["substitution"] = sj;
  }
  return j;
}

ConservedVector vector_from_json(const nlohmann::json& j, const SymbolTable& symbols) {
  ConservedVector cv;
  try {
    cv.label = j.value("label", std::string());
    cv.axes = axes_from_string(j.at("axes").get<std::string>());
    const auto comps = j.at("components").get<std::vector<std::string>>();
    if (comps.size() != cv.axes.size())
      throw std::invalid_argument("vector '" + cv.label + "' has " + std::to_string(comps.size()) + " components for " +
                                  std::to_string(cv.axes.size()) + " axes");
    for (const std::string& c : comps) cv.components.push_back(parse(c, symbols));
    if (j.contains("mu")) cv.mu = parse(j.at("mu").get<std::string>(), symbols);
    if (j.contains("substitution")) {
      const auto& sj = j.at("substitution");
      std::vector<SymbolConstraint> cons;
      if (sj.contains("constraints"))
        for (const auto& c : sj.at("constraints")) {
          SymbolConstraint sc;
          sc.name = c.at("name").get<std::string>();
          const auto sp = c.at("space").get<std::string>();
          auto ax = sp.size() == 1 ? axis_from_char(sp[0]) : std::nullopt;
          if (!ax) throw std::invalid_argument("bad constraint space '" + sp + "'");
          sc.space = *ax;
          sc.K = parse(c.at("K").get<std::string>(), symbols);
          cons.push_back(sc);
        }
      Substitution s = make_substitution(parse(sj.at("phi").get<std::string>(), symbols), cons);
      if (sj.contains("bindings"))
        for (const auto& [k, v] : sj.at("bindings").items())
          s.bindings[Atom::param(k)] = parse(v.get<std::string>(), symbols);
      cv.substitution = s;
    }
    for (const Expr& c : cv.components)
      for (const Atom& a : c.atoms())
        if (a.is_v_jet()) cv.v_form = true;
    if (cv.v_form) {
      if (!cv.substitution) throw std::invalid_argument("vector '" + cv.label + "' mentions v but has no substitution");
      cv.rules = vjet_rules(*cv.substitution, cv.axes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("vector file: ") + e.what());
  }
  return cv;
}

nlohmann::json vectors_to_json(const std::vector<ConservedVector>& vs, const std::string& equation) {
  nlohmann::json j;
  if (!equation.empty()) j["equation"] = equation;
  j["vectors"] = nlohmann::json::array();
  for (const auto& v : vs) j["vectors"].push_back(vector_to_json(v));
  return j;
}

std::vector<ConservedVector> vectors_from_json(const nlohmann::json& j, const SymbolTable& symbols) {
  std::vector<ConservedVector> out;
  if (!j.contains("vectors") || !j.at("vectors").is_array()) throw std::invalid_argument("vector file needs a \"vectors\" array");
  for (const auto& v : j.at("vectors")) out.push_back(vector_from_json(v, symbols));
  return out;
}

std::vector<ConservedVector> load_vectors(const std::string& path, const SymbolTable& symbols) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
  }
  return vectors_from_json(j, symbols);
}

std::string render_plain(const ConservedVector& cv) {
  std::ostringstream os;
  for (std::size_t i = 0; i < cv.axes.size(); ++i)
    os << "  C^" << axis_char(cv.axes[i]) << " = " << to_plain(cv.components[i]) << "\n";
  return os.str();
}

std::string render_latex(const ConservedVector& cv) {
  std::ostringstream os;
  os << "\\begin{align*}\n";
  for (std::size_t i = 0; i < cv.axes.size(); ++i) {
    os << "  C^" << i + 1 << " &= " << to_latex(cv.components[i]);
    os << (i + 1 < cv.axes.size() ? ",\\\\\n" : ".\n");
  }
  os << "\\end{align*}\n";
  return os.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void RunManifest::add_input(const std::string& path) { inputs.emplace_back(path, sha256_hex(read_file(path))); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["tool"] = "clforge";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["options"] = options;
  j["equation_text"] = equation_text;
  j["inputs"] = nlohmann::json::array();
  for (const auto& [p, h] : inputs) j["inputs"].push_back({{"path", p}, {"sha256", h}});
  j["timestamp"] = timestamp;
  return j;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string report_json(const RunManifest& m, const nlohmann::json& result) {
  nlohmann::json j;
  j["manifest"] = m.to_json();
  j["result"] = result;
  return j.dump(2) + "\n";
}

}  // namespace clf
