#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mfg {

struct PropertyCase
{
  std::string name;
  int samples = 0;
  double tol = 0.0;
  bool pass = false;
  double worst = 0.0;    // largest violation measure seen (compare with tol)
  std::string witness;   // input that produced `worst`
};

/// Every property suite, sorted by name. Deterministic for a given seed.
std::vector<PropertyCase> run_all(std::uint64_t seed);

/// Observed L2 error of the manufactured Fokker-Planck solution m = 1 + cos(pi x)
/// on an N x N grid of the unit square.
double manufactured_fp_error(int N);

std::string format_text(const std::vector<PropertyCase>& cases);
nlohmann::json to_json(const std::vector<PropertyCase>& cases);

} // namespace mfg
