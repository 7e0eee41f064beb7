#pragma once

#include "mfg/io.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

namespace mfg {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions
{
  std::filesystem::path out;
  bool heatmaps = false;
  bool diagnostics = false;
  std::optional<std::uint64_t> seed;  // overrides the config seed
};

struct RunOutcome
{
  bool converged = false;
  bool certified = false;  // converged and every population's report passes
  double wall_seconds = 0.0;
  std::vector<ResidualReport> reports;
};

/// Certification context of every population, given the final densities.
std::vector<ProblemContext> problem_contexts(const RunConfig& cfg, const OperatorPtr& op, const std::vector<Field>& m);

/// Solves, certifies and writes all artifacts into opts.out.
RunOutcome run(const RunConfig& cfg, const RunOptions& opts, std::ostream& log);

enum class VerifyStatus { match = 0, mismatch = 1, malformed = 2 };

/// Reloads a results directory, re-certifies and compares with the stored reports.
VerifyStatus verify_results(const std::filesystem::path& dir, std::ostream& log);

} // namespace mfg
