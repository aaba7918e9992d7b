#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "clforge/conslaw.hpp"

namespace clf {

inline constexpr const char* kToolVersion = "0.3.0";

enum class OutputFormat { Plain, Latex, Json };
OutputFormat format_from_string(const std::string& s);

/// Vector file:
///
///   { "equation": "anisotropic 3D",
///     "vectors": [ { "label": "...", "axes": "txyz",
///                    "components": ["-u", "f(u)*u_x", ...],
///                    "mu": "1",
///                    "substitution": { "phi": "...", "bindings": {"r": "omega^2"},
///                                      "constraints": [{"name": "alpha", "space": "y", "K": "k"}] } } ] }
///
/// Components may keep v; the substitution then says what v stands for.
nlohmann::json vector_to_json(const ConservedVector& cv);
ConservedVector vector_from_json(const nlohmann::json& j, const SymbolTable& symbols = SymbolTable::standard());
nlohmann::json vectors_to_json(const std::vector<ConservedVector>& vs, const std::string& equation = {});
std::vector<ConservedVector> vectors_from_json(const nlohmann::json& j,
                                               const SymbolTable& symbols = SymbolTable::standard());
std::vector<ConservedVector> load_vectors(const std::string& path,
                                          const SymbolTable& symbols = SymbolTable::standard());

/// "C^t = ..." per line.
std::string render_plain(const ConservedVector& cv);
/// align* block with one component per line.
std::string render_latex(const ConservedVector& cv);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::string& path);

/// Provenance embedded in every report.
struct RunManifest {
  std::string command;
  nlohmann::json options = nlohmann::json::object();
  std::string equation_text;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::string timestamp;

  void add_input(const std::string& path);
  nlohmann::json to_json() const;
};

std::string utc_timestamp();

/// {"manifest": ..., "result": ...} dumped with sorted keys.
std::string report_json(const RunManifest& m, const nlohmann::json& result);

}  // namespace clf
