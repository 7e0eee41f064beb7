#include "mfg/error.hpp"
#include "mfg/fpcheck.hpp"
#include "mfg/run.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

enum Exit { kOk = 0, kFailed = 1, kConfig = 2, kNotConverged = 3 };

void apply_thread_cap()
{
  char const* env = std::getenv("MFG_THREADS");
  if (!env) { return; }
  int const n = std::atoi(env);
  if (n < 1) {
    std::cerr << "ignoring MFG_THREADS=" << env << " (expected a positive integer)\n";
    return;
  }
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int cmd_solve(const std::string& config, const mfg::RunOptions& opts)
{
  mfg::RunConfig cfg;
  try {
    cfg = mfg::load_config(config);
  } catch (const mfg::ConfigError& e) {
    std::cerr << config << ": " << e.what() << '\n';
    return kConfig;
  }
  try {
    auto const out = mfg::run(cfg, opts, std::cout);
    return out.certified ? kOk : kNotConverged;
  } catch (const mfg::ConfigError& e) {
    std::cerr << config << ": " << e.what() << '\n';
    return kConfig;
  } catch (const mfg::InfeasibleKappa& e) {
    std::cerr << config << ": infeasible kappa: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "solve failed: " << e.what() << '\n';
    return kFailed;
  }
}

int cmd_selftest(std::uint64_t seed, const std::string& json_path)
{
  auto const t0 = std::chrono::steady_clock::now();
  auto const cases = mfg::run_all(seed);
  double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << mfg::format_text(cases) << "elapsed " << secs << " s\n";
  bool ok = true;
  for (auto const& c : cases) { ok = ok && c.pass; }
  if (!json_path.empty()) {
    nlohmann::json j = {{"seed", seed}, {"elapsed_s", secs}, {"pass", ok}, {"cases", mfg::to_json(cases)}};
    std::ofstream os(json_path);
    if (!os) {
      std::cerr << "cannot write " << json_path << '\n';
      return kFailed;
    }
    os << j.dump(2) << '\n';
  }
  return ok ? kOk : kFailed;
}

} // namespace

int main(int argc, char** argv)
{
  apply_thread_cap();
  CLI::App app{"Stationary second-order mean field game solver"};
  app.require_subcommand(1);

  auto* solve = app.add_subcommand("solve", "solve the problem described by a JSON config");
  std::string config;
  mfg::RunOptions opts;
  std::uint64_t seed = 0;
  solve->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  solve->add_option("--out", opts.out, "results directory")->required();
  solve->add_flag("--emit-heatmaps", opts.heatmaps, "write PPM heatmaps of m, u (and p)");
  solve->add_flag("--diagnostics", opts.diagnostics, "record iterations.csv");
  auto* seed_opt = solve->add_option("--seed", seed, "seed for randomised probes");

  auto* verify = app.add_subcommand("verify", "re-certify a results directory against its stored report");
  std::string dir;
  verify->add_option("dir", dir, "results directory")->required();

  auto* selftest = app.add_subcommand("selftest", "run the property-test battery");
  std::uint64_t test_seed = 20240607;
  std::string json_path;
  selftest->add_option("--seed", test_seed, "random seed");
  selftest->add_option("--json", json_path, "also write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int const rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  if (solve->parsed()) {
    if (seed_opt->count() > 0) { opts.seed = seed; }
    return cmd_solve(config, opts);
  }
  if (verify->parsed()) { return static_cast<int>(mfg::verify_results(dir, std::cout)); }
  return cmd_selftest(test_seed, json_path);
}
