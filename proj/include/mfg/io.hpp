#pragma once

#include "mfg/coupling.hpp"
#include "mfg/hamiltonian.hpp"
#include "mfg/report.hpp"
#include "mfg/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mfg {

enum class ProblemKind { p1, p2, multipop_br, multipop_potential, multipop_potential_constrained };

std::string to_string(ProblemKind k);

struct RunConfig
{
  ProblemKind problem = ProblemKind::p1;
  GridSpec grid;
  std::vector<HamiltonianModel> hamiltonians;  // one per population
  CouplingSpec coupling;
  std::optional<CoeffExpr> kappa;
  std::vector<double> alpha;
  SolverParams solver;
  int uniqueness_trials = 0;  // 0 skips the probe
  std::uint64_t seed = 0;
  nlohmann::json source;      // the parsed document, echoed into metadata

  bool multipop() const { return problem != ProblemKind::p1 && problem != ProblemKind::p2; }
};

/**
 * Parses and validates a run configuration. Errors are ConfigError with the
 * message prefixed by "line N: <json path>: " when the offending key can be
 * located in `text`.
 */
RunConfig parse_config(const std::string& text);
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// 1-based line of the value at a JSON path ("/a/0/b") in text, 0 if absent.
int locate_line(const std::string& text, const std::string& pointer);

// CSV fields: header "i,j,x,y,value" (or "vx,vy"), rows ordered by j then i,
// values with 17 significant digits.
void write_field_csv(const std::filesystem::path& path, const ConstraintOperator& op, const Field& f);
void write_vector_csv(const std::filesystem::path& path, const ConstraintOperator& op, const VectorField& w);
/// Throws ArtifactError when missing, truncated or inconsistent with op.
Field read_field_csv(const std::filesystem::path& path, const ConstraintOperator& op);
VectorField read_vector_csv(const std::filesystem::path& path, const ConstraintOperator& op);

/// Grayscale binary PPM (P6), min black, max white, one pixel per node,
/// row j = 0 at the bottom.
void write_heatmap(const std::filesystem::path& path, const ConstraintOperator& op, const Field& f);

nlohmann::json to_json(const ResidualReport& r);
nlohmann::json to_json(const CoeffExpr& c);

} // namespace mfg
