// One line per acceptance criterion; exit status is the number of failures.
#include "mfg/fpcheck.hpp"
#include "mfg/multipop.hpp"
#include "mfg/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace mfg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Shipped
{
  RunConfig cfg;
  RunOutcome outcome;
  json meta;
  fs::path dir;
};

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail)
{
  failures += pass ? 0 : 1;
  std::printf("criterion %2d %s  %s: %s\n", id, pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::map<std::string, Shipped> run_shipped(const fs::path& root)
{
  std::map<std::string, Shipped> out;
  std::vector<fs::path> files;
  for (auto const& e : fs::directory_iterator(MFG_CONFIG_DIR)) {
    if (e.path().extension() == ".json") { files.push_back(e.path()); }
  }
  std::sort(files.begin(), files.end());
  for (auto const& f : files) {
    Shipped s;
    s.cfg = load_config(f);
    s.dir = root / f.stem();
    RunOptions opts;
    opts.out = s.dir;
    std::ostringstream log;
    s.outcome = run(s.cfg, opts, log);
    std::ifstream is(s.dir / "metadata.json");
    s.meta = json::parse(is);
    std::printf("  ran %-36s %s in %.1f s\n", f.filename().c_str(), s.outcome.certified ? "certified" : "NOT certified",
                s.outcome.wall_seconds);
    out.emplace(f.stem().string(), std::move(s));
  }
  return out;
}

const ResidualReport& rep(const Shipped& s, int i = 0) { return s.outcome.reports.at(i); }

} // namespace

int main()
{
  fs::path const root = fs::temp_directory_path() / ("mfg_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(root);
  auto const shipped = run_shipped(root);
  auto const& trivial = shipped.at("trivial");
  auto const& linear = shipped.at("linear");
  auto const& congestion = shipped.at("congestion");
  auto const& symmetric = shipped.at("two_population_symmetric");

  {
    auto const op = build_operators(trivial.cfg.grid);
    Field const m = read_field_csv(trivial.dir / "m.csv", *op), u = read_field_csv(trivial.dir / "u.csv", *op);
    VectorField const w = read_vector_csv(trivial.dir / "w.csv", *op);
    double const em = (m.array() - 1.0).abs().maxCoeff(), ew = w.cwiseAbs().maxCoeff(), eu = u.cwiseAbs().maxCoeff();
    double const lam = std::abs(trivial.meta["lambdas"][0].get<double>());
    int const iters = trivial.meta["iterations"].get<int>();
    bool const ok = trivial.cfg.grid.nodes_x() == 33 && em <= 1e-6 && ew <= 1e-6 && eu <= 1e-6 && lam <= 1e-6 && iters <= 10000 &&
                    trivial.outcome.wall_seconds < 30.0;
    report(1, ok, "trivial equilibrium 33x33",
           fmt("|m-1| %.1e, |w| %.1e, |u| %.1e, |lambda| %.1e", em, ew, eu, lam) +
               fmt(", %g iterations, %.2f s", iters, trivial.outcome.wall_seconds));
  }
  {
    auto const& r = rep(linear);
    bool const ok = linear.cfg.grid.Nx == 64 && r.kkt_row1 <= 1e-5 && r.fp_residual <= 1e-8 && r.mass_error <= 1e-10 &&
                    r.drift_residual <= 1e-5 && r.min_density >= 1e-8 && linear.outcome.wall_seconds < 300.0;
    report(2, ok, "KKT certificate f=z 65x65",
           fmt("kkt %.1e, fp %.1e, mass %.1e, drift %.1e", r.kkt_row1, r.fp_residual, r.mass_error, r.drift_residual) +
               fmt(", min m %.3f, %.1f s", r.min_density, linear.outcome.wall_seconds));
  }
  {
    auto const& a = rep(linear).apriori_w_bound;
    report(3, a.strict, "a priori momentum bound (strict)", fmt("|w|_3^3 = %.4e < %.4e", a.lhs, a.rhs));
  }
  {
    auto const& r = rep(congestion);
    auto const op = build_operators(congestion.cfg.grid);
    Field const m = read_field_csv(congestion.dir / "m.csv", *op), p = read_field_csv(congestion.dir / "p.csv", *op);
    Field const kappa = sample_nodes(*congestion.cfg.kappa, *op);
    double worst_gap = 0.0;
    int active = 0;
    for (int k = 0; k < op->size(); ++k) {
      if (p[k] > 1e-6 * p.maxCoeff()) {
        ++active;
        worst_gap = std::max(worst_gap, kappa[k] - m[k]);
      }
    }
    bool const ok = congestion.outcome.converged && p.minCoeff() >= -1e-10 && r.complementarity <= 1e-6 &&
                    worst_gap <= 1e-5 && active > 0;
    report(4, ok, "density constraint certificate",
           fmt("min p %.1e, complementarity %.1e, max kappa-m on support %.1e", p.minCoeff(), r.complementarity,
               worst_gap) +
               fmt(", %g active nodes", active));
  }
  {
    auto const& u = linear.meta["uniqueness"];
    bool const ok = u["trials"].get<int>() >= 3 && u["all_converged"].get<bool>() && u["m_spread"].get<double>() <= 1e-5;
    report(5, ok, "uniqueness probe, 3 starts",
           fmt("max pairwise |m-m'| %.1e over %g trials", u["m_spread"].get<double>(), u["trials"].get<int>()));
  }
  {
    double worst = 0.0;
    bool ok = true;
    for (auto const& [name, s] : shipped) {
      for (auto const& p : s.meta["populations"]) {
        if (!p["converged"].get<bool>()) { continue; }
        if (p["forward_fp_gap"].is_null()) {
          ok = false;
          continue;
        }
        worst = std::max(worst, p["forward_fp_gap"].get<double>());
      }
      ok = ok && s.outcome.converged;
    }
    report(6, ok && worst <= 1e-4, "forward Fokker-Planck cross-check",
           fmt("max |m_forward - m| %.1e over %g shipped configs", worst, static_cast<double>(shipped.size())));
  }
  {
    auto const op = build_operators(symmetric.cfg.grid);
    Field const m1 = read_field_csv(symmetric.dir / "m_1.csv", *op), m2 = read_field_csv(symmetric.dir / "m_2.csv", *op);
    double const d = (m1 - m2).cwiseAbs().maxCoeff();
    report(7, symmetric.outcome.converged && d <= 1e-6, "two-population symmetry", fmt("|m1-m2| %.1e", d));
  }
  {
    auto const& cfg = shipped.at("two_population_potential").cfg;
    auto const op = build_operators(cfg.grid);
    MultiPopSpec spec;
    spec.hamiltonians = cfg.hamiltonians;
    spec.coupling = cfg.coupling;
    auto const br = solve_best_response(spec, op, cfg.solver);
    auto const pot = solve_potential(spec, op, cfg.solver);
    double d = 0.0;
    for (int i = 0; i < spec.populations(); ++i) {
      d = std::max(d, (br.populations[i].m - pot.populations[i].m).cwiseAbs().maxCoeff());
    }
    report(8, br.converged && pot.converged && d <= 1e-4, "potential vs best response",
           fmt("max_i |m_i^pot - m_i^br| %.1e, %g outer sweeps", d, br.fixed_point.outer_iterations));
  }
  {
    auto const t0 = std::chrono::steady_clock::now();
    auto const cases = run_all(20240607);
    double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    int passed = 0;
    std::string failed;
    for (auto const& c : cases) {
      passed += c.pass ? 1 : 0;
      if (!c.pass) { failed += " " + c.name; }
    }
    bool const ok = passed == static_cast<int>(cases.size()) && secs < 60.0;
    report(9, ok, "convex-analysis selftest",
           fmt("%g/%g properties in %.1f s", passed, static_cast<double>(cases.size()), secs) + failed);
  }
  {
    double const e16 = manufactured_fp_error(16), e32 = manufactured_fp_error(32), e64 = manufactured_fp_error(64);
    double const o1 = std::log2(e16 / e32), o2 = std::log2(e32 / e64);
    report(10, std::min(o1, o2) >= 1.9, "manufactured Fokker-Planck order",
           fmt("L2 errors %.2e %.2e %.2e, orders %.3f", e16, e32, e64, o1) + fmt(" %.3f", o2));
  }
  {
    double worst = 1e300;
    for (auto const& [name, s] : shipped) {
      if (!s.outcome.converged) { continue; }
      for (auto const& r : s.outcome.reports) { worst = std::min(worst, r.min_density); }
    }
    report(11, worst >= 1e-8, "positivity on shipped configs", fmt("min_i m_i %.3e", worst));
  }

  fs::remove_all(root);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
