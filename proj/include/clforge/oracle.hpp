#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include <json.hpp>

#include "clforge/conslaw.hpp"
#include "clforge/evaluate.hpp"

namespace clf {

/// Worker count for parallel loops: CONSLAW_FORGE_THREADS when set, else the
/// OpenMP default.
int thread_cap();

struct OracleOptions {
  std::uint64_t seed = 1;
  int samples = 1000;
  double tolerance = 1e-10;
};

struct OracleReport {
  std::string method;
  int samples = 0;
  double max_residual = 0.0;
  int worst_sample = -1;
  double tolerance = 0.0;
  bool passed() const { return max_residual < tolerance; }
  nlohmann::json to_json() const;
};

/// Random numeric models for every symbol an expression can mention:
/// coordinates, parameters, jets of u, function symbols (respecting declared
/// relations) and constrained symbols (solving their constraints).
class SampleModel {
 public:
  SampleModel(const DifferentialEquation& eq, const std::optional<Substitution>& s);

  /// Deterministic point for (seed, sample index).
  JetPoint draw(std::uint64_t seed, int sample, const std::set<Atom>& atoms) const;

 private:
  const DifferentialEquation& eq_;
  std::optional<Substitution> s_;
};

/// max |e| over random jet points; `e` must be free of t-jets of u.
OracleReport jet_oracle(const Expr& e, const DifferentialEquation& eq, const std::optional<Substitution>& s,
                        const OracleOptions& opt);

/// Div C evaluated at random jets with v replaced and u_t eliminated.
OracleReport vector_jet_oracle(const ConservedVector& cv, const DifferentialEquation& eq, const OracleOptions& opt);

/// Independent check: builds a truncated series solution of the equation by
/// Picard iteration on the solved form, evaluates the components on it and
/// reads the divergence at the expansion point. Uses no symbolic differentiation.
OracleReport series_oracle(const ConservedVector& cv, const DifferentialEquation& eq, const OracleOptions& opt);

/// F*|_{v=phi} - lambda F at random jets with u_t eliminated.
OracleReport selfadjoint_oracle(const DifferentialEquation& eq, const Substitution& s, const OracleOptions& opt);

}  // namespace clf
