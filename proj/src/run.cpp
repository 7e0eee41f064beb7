#include "mfg/run.hpp"

#include "mfg/error.hpp"
#include "mfg/multipop.hpp"
#include "mfg/verify.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mfg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string suffix(const RunConfig& cfg, const std::string& stem, int i)
{
  return cfg.multipop() ? stem + "_" + std::to_string(i + 1) + ".csv" : stem + ".csv";
}

MultiPopSpec multipop_spec(const RunConfig& cfg, const ConstraintOperator& op)
{
  MultiPopSpec spec;
  spec.hamiltonians = cfg.hamiltonians;
  spec.coupling = cfg.coupling;
  if (cfg.kappa) { spec.kappa = sample_nodes(*cfg.kappa, op); }
  spec.alpha = cfg.alpha;
  return spec;
}

void write_json(const fs::path& path, const json& j)
{
  std::ofstream os(path);
  if (!os) { throw Error("cannot write " + path.string()); }
  os << j.dump(2) << '\n';
}

// Relative comparison used by verify; stored doubles round-trip exactly.
bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

void compare(const json& stored, const json& fresh, const std::string& path, std::vector<std::string>& diffs)
{
  if (stored.is_object()) {
    for (auto const& [k, v] : fresh.items()) {
      if (!stored.contains(k)) {
        diffs.push_back(path + "/" + k + " missing");
        continue;
      }
      compare(stored.at(k), v, path + "/" + k, diffs);
    }
    return;
  }
  if (fresh.is_number() && stored.is_number()) {
    if (!close(fresh.get<double>(), stored.get<double>())) {
      std::ostringstream os;
      os.precision(17);
      os << path << ": stored " << stored.get<double>() << ", recomputed " << fresh.get<double>();
      diffs.push_back(os.str());
    }
    return;
  }
  if (stored != fresh) { diffs.push_back(path + ": stored " + stored.dump() + ", recomputed " + fresh.dump()); }
}

} // namespace

std::vector<ProblemContext> problem_contexts(const RunConfig& cfg, const OperatorPtr& op, const std::vector<Field>& m)
{
  std::vector<ProblemContext> out;
  int const N = static_cast<int>(cfg.hamiltonians.size());
  std::optional<Field> kappa;
  if (cfg.kappa) { kappa = sample_nodes(*cfg.kappa, *op); }
  std::optional<Field> load;
  if (cfg.problem == ProblemKind::multipop_potential_constrained) {
    load = Field::Zero(op->size());
    for (int i = 0; i < N; ++i) { *load += cfg.alpha[i] * m[i]; }
  }
  for (int i = 0; i < N; ++i) {
    ProblemContext ctx;
    ctx.op = op;
    ctx.hamiltonian = cfg.hamiltonians[i];
    ctx.coupling = cfg.multipop() ? freeze_population(cfg.coupling, op, m, i) : make_coupling(cfg.coupling, op);
    ctx.kappa = kappa;
    ctx.load = load;
    ctx.p_scale = load ? cfg.alpha[i] : 1.0;
    ctx.eps_m = cfg.solver.eps_m;
    out.push_back(std::move(ctx));
  }
  return out;
}

RunOutcome run(const RunConfig& cfg, const RunOptions& opts, std::ostream& log)
{
  auto const t0 = std::chrono::steady_clock::now();
  auto const op = build_operators(cfg.grid);
  SolverParams params = cfg.solver;
  params.record_history = opts.diagnostics;
  std::uint64_t const seed = opts.seed.value_or(cfg.seed);
  int const N = static_cast<int>(cfg.hamiltonians.size());

  std::vector<SolveResult> pops;
  std::optional<Field> p;
  json extra = json::object();
  switch (cfg.problem) {
  case ProblemKind::p1:
  case ProblemKind::p2: {
    auto const coupling = make_coupling(cfg.coupling, op);
    if (cfg.kappa) {
      Field const kappa = sample_nodes(*cfg.kappa, *op);
      pops.push_back(solve_p2(cfg.hamiltonians[0], coupling, op, kappa, params));
      p = pops[0].p;
    } else {
      pops.push_back(solve_p1(cfg.hamiltonians[0], coupling, op, params));
    }
    if (cfg.uniqueness_trials > 0) {
      std::optional<Field> kappa;
      if (cfg.kappa) { kappa = sample_nodes(*cfg.kappa, *op); }
      auto const u = uniqueness_probe(cfg.hamiltonians[0], coupling, op, kappa, params, cfg.uniqueness_trials, seed);
      extra["uniqueness"] = {{"trials", u.trials},           {"m_spread", u.m_spread},
                             {"u_spread", u.u_spread},       {"lambda_spread", u.lambda_spread},
                             {"threshold", u.threshold},     {"report_only", u.report_only},
                             {"all_converged", u.all_converged}, {"pass", u.pass}};
    }
    break;
  }
  case ProblemKind::multipop_br:
  case ProblemKind::multipop_potential:
  case ProblemKind::multipop_potential_constrained: {
    auto const spec = multipop_spec(cfg, *op);
    auto res = cfg.problem == ProblemKind::multipop_br ? solve_best_response(spec, op, params)
                                                       : solve_potential(spec, op, params);
    pops = std::move(res.populations);
    p = res.p;
    extra["fixed_point"] = {{"history", res.fixed_point.history},
                            {"outer_iterations", res.fixed_point.outer_iterations},
                            {"converged", res.fixed_point.converged}};
    if (spec.kappa) { extra["reference_point_strict"] = res.reference_point_strict; }
    break;
  }
  }

  std::vector<Field> ms;
  for (auto const& r : pops) { ms.push_back(r.m); }
  auto const ctxs = problem_contexts(cfg, op, ms);

  RunOutcome out;
  out.converged = true;
  json populations = json::array();
  json lambdas = json::array();
  for (int i = 0; i < N; ++i) {
    auto const& r = pops[i];
    FieldSet fields = r.fields();
    fields.p = p;
    out.reports.push_back(certify(fields, ctxs[i]));
    out.converged = out.converged && r.converged;
    json fwd = nullptr;
    try {
      fwd = (forward_fp_check(cfg.hamiltonians[i], *op, r.u) - r.m).cwiseAbs().maxCoeff();
    } catch (const FixedPointStalled& e) {
      log << "population " << i + 1 << ": " << e.what() << '\n';
    }
    lambdas.push_back(r.lambda);
    populations.push_back({{"lambda", r.lambda},
                           {"iterations", r.iterations},
                           {"converged", r.converged},
                           {"objective", r.objective},
                           {"step_condition", r.step_condition},
                           {"forward_fp_gap", fwd},
                           {"report", to_json(out.reports.back())}});
  }
  out.certified = out.converged;
  for (auto const& rep : out.reports) { out.certified = out.certified && rep.pass; }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(opts.out);
  for (int i = 0; i < N; ++i) {
    write_field_csv(opts.out / suffix(cfg, "m", i), *op, pops[i].m);
    write_field_csv(opts.out / suffix(cfg, "u", i), *op, pops[i].u);
    write_vector_csv(opts.out / suffix(cfg, "w", i), *op, pops[i].w);
    if (opts.heatmaps) {
      std::string const stem = cfg.multipop() ? "_" + std::to_string(i + 1) : "";
      write_heatmap(opts.out / ("m" + stem + ".ppm"), *op, pops[i].m);
      write_heatmap(opts.out / ("u" + stem + ".ppm"), *op, pops[i].u);
    }
  }
  if (p) {
    write_field_csv(opts.out / "p.csv", *op, *p);
    if (opts.heatmaps) { write_heatmap(opts.out / "p.ppm", *op, *p); }
  }
  write_json(opts.out / "lambdas.json", lambdas);
  if (opts.diagnostics) {
    std::ofstream os(opts.out / "iterations.csv");
    os << "population,iteration,objective,pde_residual,kkt_residual\n";
    os.precision(17);
    for (int i = 0; i < N; ++i) {
      for (auto const& h : pops[i].history) {
        os << i + 1 << ',' << h.iteration << ',' << h.objective << ',' << h.pde_residual << ',' << h.kkt_residual
           << '\n';
      }
    }
  }

  json meta;
  meta["version"] = kVersion;
  meta["problem"] = to_string(cfg.problem);
  meta["converged"] = out.converged;
  meta["certified"] = out.certified;
  meta["wall_time_s"] = out.wall_seconds;
  meta["iterations"] = pops[0].iterations;
  meta["objective"] = pops[0].objective;
  meta["lambdas"] = lambdas;
  meta["populations"] = populations;
  meta["report"] = populations[0]["report"];
  if (p) { meta["p_max"] = p->maxCoeff(); }
  meta["seed"] = seed;
  meta.update(extra);
  meta["config"] = cfg.source;
  write_json(opts.out / "metadata.json", meta);

  log << to_string(cfg.problem) << ": " << (out.certified ? "certified" : out.converged ? "not certified" : "not converged")
      << " in " << pops[0].iterations << " iterations, " << out.wall_seconds << " s\n";
  for (int i = 0; i < N; ++i) {
    auto const& rep = out.reports[i];
    log << "  population " << i + 1 << ": lambda " << pops[i].lambda << ", kkt_row1 " << rep.kkt_row1
        << ", min_density " << rep.min_density;
    for (auto const& f : rep.failures) { log << ", FAIL " << f; }
    log << '\n';
  }
  return out;
}

VerifyStatus verify_results(const fs::path& dir, std::ostream& log)
{
  try {
    std::ifstream is(dir / "metadata.json");
    if (!is) { throw ArtifactError("missing metadata.json"); }
    json meta;
    try {
      meta = json::parse(is);
    } catch (const json::exception& e) {
      throw ArtifactError(std::string("metadata.json: ") + e.what());
    }
    if (!meta.contains("config") || !meta.contains("populations") || !meta["populations"].is_array()) {
      throw ArtifactError("metadata.json lacks config or populations");
    }
    RunConfig const cfg = parse_config(meta["config"]);
    auto const op = build_operators(cfg.grid);
    int const N = static_cast<int>(cfg.hamiltonians.size());
    if (static_cast<int>(meta["populations"].size()) != N) { throw ArtifactError("population count mismatch"); }

    std::vector<FieldSet> fields(N);
    std::vector<Field> ms;
    std::optional<Field> p;
    if (cfg.kappa) { p = read_field_csv(dir / "p.csv", *op); }
    for (int i = 0; i < N; ++i) {
      fields[i].m = read_field_csv(dir / suffix(cfg, "m", i), *op);
      fields[i].u = read_field_csv(dir / suffix(cfg, "u", i), *op);
      fields[i].w = read_vector_csv(dir / suffix(cfg, "w", i), *op);
      auto const& lam = meta["populations"][i]["lambda"];
      if (!lam.is_number()) { throw ArtifactError("population lambda missing"); }
      fields[i].lambda = lam.get<double>();
      fields[i].p = p;
      ms.push_back(fields[i].m);
    }
    auto const ctxs = problem_contexts(cfg, op, ms);
    std::vector<std::string> diffs;
    for (int i = 0; i < N; ++i) {
      json const fresh = to_json(certify(fields[i], ctxs[i]));
      compare(meta["populations"][i]["report"], fresh, "/populations/" + std::to_string(i) + "/report", diffs);
    }
    for (auto const& d : diffs) { log << "mismatch " << d << '\n'; }
    log << (diffs.empty() ? "verified: stored reports reproduced\n" : "verification failed\n");
    return diffs.empty() ? VerifyStatus::match : VerifyStatus::mismatch;
  } catch (const ArtifactError& e) {
    log << "malformed results: " << e.what() << '\n';
  } catch (const ConfigError& e) {
    log << "malformed results: stored config: " << e.what() << '\n';
  }
  return VerifyStatus::malformed;
}

} // namespace mfg
