#include "mfg/io.hpp"

#include "mfg/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace mfg {

using nlohmann::json;

std::string to_string(ProblemKind k)
{
  switch (k) {
  case ProblemKind::p1: return "p1";
  case ProblemKind::p2: return "p2";
  case ProblemKind::multipop_br: return "multipop_br";
  case ProblemKind::multipop_potential: return "multipop_potential";
  case ProblemKind::multipop_potential_constrained: return "multipop_potential_constrained";
  }
  return "p1";
}

namespace {

// Minimal JSON walker that only tracks positions; input is already known to parse.
struct Scanner
{
  const std::string& s;
  std::size_t i = 0;
  int line = 1;

  void ws()
  {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) {
      if (s[i] == '\n') { ++line; }
      ++i;
    }
  }

  std::string str()
  {
    std::string out;
    ++i;
    while (i < s.size() && s[i] != '"') {
      if (s[i] == '\\' && i + 1 < s.size()) { ++i; }
      out += s[i++];
    }
    ++i;
    return out;
  }

  void skip()
  {
    ws();
    if (i >= s.size()) { return; }
    char const c = s[i];
    if (c == '"') {
      str();
    } else if (c == '{' || c == '[') {
      char const close = c == '{' ? '}' : ']';
      ++i;
      ws();
      if (i < s.size() && s[i] == close) {
        ++i;
        return;
      }
      while (i < s.size()) {
        ws();
        if (c == '{') {
          str();
          ws();
          ++i;  // ':'
        }
        skip();
        ws();
        if (i < s.size() && s[i] == ',') {
          ++i;
          continue;
        }
        ++i;  // close
        return;
      }
    } else {
      while (i < s.size() && s[i] != ',' && s[i] != '}' && s[i] != ']' && s[i] != '\n' && s[i] != ' ') { ++i; }
    }
  }

  bool find(const std::vector<std::string>& parts, std::size_t depth)
  {
    ws();
    if (depth == parts.size()) { return true; }
    if (i >= s.size()) { return false; }
    char const c = s[i];
    if (c != '{' && c != '[') { return false; }
    char const close = c == '{' ? '}' : ']';
    ++i;
    int index = 0;
    while (true) {
      ws();
      if (i >= s.size() || s[i] == close) { return false; }
      bool match = false;
      if (c == '{') {
        match = str() == parts[depth];
        ws();
        ++i;  // ':'
      } else {
        match = std::to_string(index) == parts[depth];
      }
      if (match) { return find(parts, depth + 1); }
      skip();
      ws();
      if (i < s.size() && s[i] == ',') { ++i; }
      ++index;
    }
  }
};

std::vector<std::string> split_pointer(const std::string& pointer)
{
  std::vector<std::string> parts;
  std::string cur;
  for (std::size_t k = 1; k <= pointer.size(); ++k) {
    if (k == pointer.size() || pointer[k] == '/') {
      if (!cur.empty()) { parts.push_back(cur); }
      cur.clear();
    } else {
      cur += pointer[k];
    }
  }
  return parts;
}

class Reader
{
public:
  Reader(const json& j, std::string path, const std::string* text) : j_(j), path_(std::move(path)), text_(text)
  {
    if (!j_.is_object()) { fail("expected an object"); }
  }

  [[noreturn]] void fail(const std::string& msg, const std::string& key = "") const
  {
    std::string const where = key.empty() ? (path_.empty() ? "/" : path_) : path_ + "/" + key;
    std::ostringstream os;
    int const line = text_ ? locate_line(*text_, where) : 0;
    if (line > 0) { os << "line " << line << ": "; }
    os << where << ": " << msg;
    throw ConfigError(os.str());
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key)
  {
    if (!j_.contains(key)) { fail("missing required key \"" + key + "\""); }
    seen_.insert(key);
    return j_.at(key);
  }

  Reader child(const std::string& key) { return Reader(at(key), path_ + "/" + key, text_); }
  std::string path(const std::string& key) const { return path_ + "/" + key; }
  const std::string* text() const { return text_; }

  double number(const std::string& key)
  {
    auto const& v = at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) { fail("expected a finite number", key); }
    return v.get<double>();
  }

  double number(const std::string& key, double def) { return has(key) ? number(key) : def; }

  double positive(const std::string& key, double def)
  {
    double const v = number(key, def);
    if (!(v > 0.0)) { fail("must be positive", key); }
    return v;
  }

  double nonnegative(const std::string& key, double def)
  {
    double const v = number(key, def);
    if (!(v >= 0.0)) { fail("must be nonnegative", key); }
    return v;
  }

  std::int64_t integer(const std::string& key, std::int64_t def, std::int64_t lo, std::int64_t hi)
  {
    if (!has(key)) { return def; }
    auto const& v = at(key);
    if (!v.is_number_integer()) { fail("expected an integer", key); }
    auto const x = v.get<std::int64_t>();
    if (x < lo || x > hi) {
      std::ostringstream os;
      os << "must lie in [" << lo << ", " << hi << "], got " << x;
      fail(os.str(), key);
    }
    return x;
  }

  bool boolean(const std::string& key, bool def)
  {
    if (!has(key)) { return def; }
    auto const& v = at(key);
    if (!v.is_boolean()) { fail("expected true or false", key); }
    return v.get<bool>();
  }

  std::string string(const std::string& key)
  {
    auto const& v = at(key);
    if (!v.is_string()) { fail("expected a string", key); }
    return v.get<std::string>();
  }

  CoeffExpr coeff(const std::string& key, CoeffExpr def)
  {
    if (!has(key)) { return def; }
    auto const& v = at(key);
    if (v.is_number()) {
      if (!std::isfinite(v.get<double>())) { fail("expected a finite number", key); }
      return CoeffExpr::constant(v.get<double>());
    }
    Reader r = child(key);
    CoeffExpr c;
    c.a0 = r.number("a0", 0.0);
    c.a1 = r.number("a1", 0.0);
    c.a2 = r.number("a2", 0.0);
    r.finish();
    return c;
  }

  void finish() const
  {
    for (auto const& [k, v] : j_.items()) {
      if (!seen_.count(k)) { fail("unknown key \"" + k + "\"", k); }
    }
  }

private:
  const json& j_;
  std::string path_;
  const std::string* text_;
  std::set<std::string> seen_;
};

HamiltonianModel read_hamiltonian(Reader r)
{
  double const qprime = r.number("qprime", 1.5);
  if (!(qprime > 1.0 && qprime < 2.0)) {
    std::ostringstream os;
    os << "q' must lie in (1,2) so that the conjugate exponent q = q'/(q'-1) exceeds the dimension d = 2 (q > d); got "
       << qprime;
    r.fail(os.str(), "qprime");
  }
  CoeffExpr const b = r.coeff("b", CoeffExpr::constant(1.0));
  CoeffExpr const c = r.coeff("c", CoeffExpr::constant(0.0));
  if (!(b.min_value() > 0.0)) { r.fail("b must be positive everywhere", "b"); }
  auto h = make_hamiltonian(qprime, b, c);
  if (r.has("C1")) { h.C1 = r.positive("C1", 1.0); }
  if (r.has("C2")) { h.C2 = r.nonnegative("C2", 0.0); }
  r.finish();
  return h;
}

CouplingSpec read_coupling(Reader r)
{
  CouplingSpec spec;
  try {
    spec.kind = coupling_kind_from_string(r.string("kind"));
  } catch (const ConfigError& e) {
    r.fail(e.what(), "kind");
  }
  if (r.has("law")) {
    Reader l = r.child("law");
    std::string const form = l.has("form") ? l.string("form") : "none";
    if (form == "none") {
      spec.law.form = LocalLaw::Form::none;
    } else if (form == "linear") {
      spec.law.form = LocalLaw::Form::linear;
    } else if (form == "pow") {
      spec.law.form = LocalLaw::Form::pow;
    } else {
      l.fail("form must be none, linear or pow", "form");
    }
    spec.law.slope = l.number("slope", 1.0);
    spec.law.r = l.positive("r", 1.0);
    spec.law.sign = l.number("sign", 1.0);
    if (spec.law.sign != 1.0 && spec.law.sign != -1.0) { l.fail("sign must be 1 or -1", "sign"); }
    spec.law.offset = l.coeff("offset", CoeffExpr{});
    l.finish();
  }
  spec.dirichlet_weight = r.nonnegative("dirichlet_weight", 0.0);
  spec.kernel_radius = r.positive("kernel_radius", 0.1);
  if (r.has("kernel_shift")) {
    auto const& v = r.at("kernel_shift");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      r.fail("expected [x, y]", "kernel_shift");
    }
    spec.kernel_shift_x = v[0].get<double>();
    spec.kernel_shift_y = v[1].get<double>();
  }
  spec.nonlocal_weight = r.nonnegative("nonlocal_weight", 1.0);
  spec.nonlocal_grad_weight = r.nonnegative("nonlocal_grad_weight", 0.0);
  spec.lipschitz_hint = r.nonnegative("lipschitz_hint", 0.0);
  if (r.has("matrix")) {
    auto const& v = r.at("matrix");
    if (!v.is_array()) { r.fail("expected an array of rows", "matrix"); }
    for (auto const& row : v) {
      if (!row.is_array()) { r.fail("expected an array of rows", "matrix"); }
      std::vector<double> vals;
      for (auto const& x : row) {
        if (!x.is_number()) { r.fail("entries must be numbers", "matrix"); }
        vals.push_back(x.get<double>());
      }
      spec.matrix.push_back(std::move(vals));
    }
  }
  if (r.has("offsets")) {
    auto const& v = r.at("offsets");
    if (!v.is_array()) { r.fail("expected an array", "offsets"); }
    for (std::size_t k = 0; k < v.size(); ++k) {
      json wrap = {{"v", v[k]}};
      Reader w(wrap, r.path("offsets") + "/" + std::to_string(k), r.text());
      spec.offsets.push_back(w.coeff("v", CoeffExpr{}));
    }
  }
  r.finish();
  return spec;
}

SolverParams read_solver(Reader r)
{
  SolverParams p;
  constexpr std::int64_t kBig = std::numeric_limits<int>::max();
  p.max_iters = static_cast<int>(r.integer("max_iters", p.max_iters, 1, kBig));
  p.tau = r.nonnegative("tau", p.tau);
  p.dual_fraction = r.number("dual_fraction", p.dual_fraction);
  p.relaxation = r.number("relaxation", p.relaxation);
  p.tol_pde = r.positive("tol_pde", p.tol_pde);
  p.tol_kkt = r.positive("tol_kkt", p.tol_kkt);
  p.tol_change = r.positive("tol_change", p.tol_change);
  p.eps_m = r.nonnegative("eps_m", p.eps_m);
  p.damping = r.number("damping", p.damping);
  p.max_outer = static_cast<int>(r.integer("max_outer", p.max_outer, 1, kBig));
  p.check_every = static_cast<int>(r.integer("check_every", p.check_every, 1, kBig));
  p.restart = r.boolean("restart", p.restart);
  p.newton = r.boolean("newton", p.newton);
  p.newton_start = r.positive("newton_start", p.newton_start);
  p.newton_tol = r.positive("newton_tol", p.newton_tol);
  p.max_backtracks = static_cast<int>(r.integer("max_backtracks", p.max_backtracks, 0, 1000));
  r.finish();
  try {
    p.validate();
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  return p;
}

RunConfig parse_with_text(const json& doc, const std::string* text)
{
  Reader r(doc, "", text);
  RunConfig cfg;
  cfg.source = doc;
  std::string const kind = r.string("problem");
  bool known = false;
  for (auto k : {ProblemKind::p1, ProblemKind::p2, ProblemKind::multipop_br, ProblemKind::multipop_potential,
                 ProblemKind::multipop_potential_constrained}) {
    if (to_string(k) == kind) {
      cfg.problem = k;
      known = true;
    }
  }
  if (!known) {
    r.fail("problem must be one of p1, p2, multipop_br, multipop_potential, multipop_potential_constrained",
           "problem");
  }

  {
    Reader g = r.child("grid");
    cfg.grid.Lx = g.positive("Lx", 1.0);
    cfg.grid.Ly = g.positive("Ly", 1.0);
    cfg.grid.Nx = static_cast<int>(g.integer("Nx", 32, 2, 1024));
    cfg.grid.Ny = static_cast<int>(g.integer("Ny", 32, 2, 1024));
    g.finish();
  }

  if (cfg.multipop()) {
    auto const& arr = r.at("hamiltonians");
    if (!arr.is_array() || arr.size() < 2) { r.fail("expected an array of at least 2 Hamiltonians", "hamiltonians"); }
    for (std::size_t k = 0; k < arr.size(); ++k) {
      cfg.hamiltonians.push_back(read_hamiltonian(Reader(arr[k], r.path("hamiltonians") + "/" + std::to_string(k), text)));
    }
  } else {
    cfg.hamiltonians.push_back(read_hamiltonian(r.child("hamiltonian")));
  }

  cfg.coupling = read_coupling(r.child("coupling"));
  int const N = static_cast<int>(cfg.hamiltonians.size());
  if (cfg.multipop()) {
    if (cfg.coupling.kind != CouplingKind::multipop_potential) {
      r.fail("multipopulation problems need kind multipop_potential", "coupling");
    }
    if (static_cast<int>(cfg.coupling.matrix.size()) != N) {
      r.fail("matrix must have one row per population", "coupling");
    }
    for (auto const& row : cfg.coupling.matrix) {
      if (static_cast<int>(row.size()) != N) { r.fail("matrix must be square", "coupling"); }
    }
    if (static_cast<int>(cfg.coupling.offsets.size()) > N) { r.fail("more offsets than populations", "coupling"); }
  } else if (cfg.coupling.kind == CouplingKind::multipop_potential) {
    r.fail("multipop_potential needs a multipopulation problem", "coupling");
  }

  bool const needs_kappa = cfg.problem == ProblemKind::p2 || cfg.problem == ProblemKind::multipop_potential_constrained;
  if (needs_kappa) {
    if (!r.has("kappa")) { r.fail("missing required key \"kappa\""); }
    cfg.kappa = r.coeff("kappa", CoeffExpr{});
    if (!(cfg.kappa->min_value() > 0.0)) { r.fail("kappa must be positive everywhere", "kappa"); }
  } else if (r.has("kappa")) {
    r.fail("kappa only applies to p2 and multipop_potential_constrained", "kappa");
  }
  if (cfg.problem == ProblemKind::multipop_potential_constrained) {
    auto const& v = r.at("alpha");
    if (!v.is_array() || static_cast<int>(v.size()) != N) { r.fail("expected one weight per population", "alpha"); }
    for (auto const& x : v) {
      if (!x.is_number() || !(x.get<double>() >= 0.0)) { r.fail("weights must be nonnegative numbers", "alpha"); }
      cfg.alpha.push_back(x.get<double>());
    }
  } else if (r.has("alpha")) {
    r.fail("alpha only applies to multipop_potential_constrained", "alpha");
  }

  if (r.has("solver")) { cfg.solver = read_solver(r.child("solver")); }
  cfg.uniqueness_trials = static_cast<int>(r.integer("uniqueness_trials", 0, 0, 20));
  if (cfg.uniqueness_trials == 1) { r.fail("needs 0 (off) or at least 2 trials", "uniqueness_trials"); }
  if (r.has("seed")) {
    auto const& v = r.at("seed");
    if (!v.is_number_unsigned()) { r.fail("expected a nonnegative integer", "seed"); }
    cfg.seed = v.get<std::uint64_t>();
  }
  r.finish();
  return cfg;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out)
{
  std::ofstream os(path, mode);
  if (!os) { throw Error("cannot write " + path.string()); }
  return os;
}

std::string g17(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& path, const ConstraintOperator& op,
                                          const std::string& header, std::size_t columns)
{
  std::ifstream is(path);
  if (!is) { throw ArtifactError("missing " + path.filename().string()); }
  std::string line;
  if (!std::getline(is, line) || line != header) {
    throw ArtifactError(path.filename().string() + ": expected header \"" + header + "\"");
  }
  std::vector<std::vector<double>> rows;
  int const nx = op.grid().nodes_x();
  while (std::getline(is, line)) {
    if (line.empty()) { continue; }
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      double const v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw ArtifactError(path.filename().string() + ": malformed value \"" + cell + "\"");
      }
      vals.push_back(v);
    }
    if (vals.size() != columns) { throw ArtifactError(path.filename().string() + ": wrong number of columns"); }
    int const k = static_cast<int>(rows.size());
    if (vals[0] != k % nx || vals[1] != k / nx) {
      throw ArtifactError(path.filename().string() + ": rows out of order at line " + std::to_string(k + 2));
    }
    rows.push_back(std::move(vals));
  }
  if (static_cast<int>(rows.size()) != op.size()) {
    throw ArtifactError(path.filename().string() + ": expected " + std::to_string(op.size()) + " rows");
  }
  return rows;
}

} // namespace

int locate_line(const std::string& text, const std::string& pointer)
{
  Scanner sc{text};
  return sc.find(split_pointer(pointer), 0) ? sc.line : 0;
}

RunConfig parse_config(const std::string& text)
{
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    int const line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + std::min(e.byte, text.size()), '\n'));
    std::ostringstream os;
    os << "line " << line << ": invalid JSON: " << e.what();
    throw ConfigError(os.str());
  }
  return parse_with_text(doc, &text);
}

RunConfig parse_config(const json& doc) { return parse_with_text(doc, nullptr); }

RunConfig load_config(const std::filesystem::path& path)
{
  std::ifstream is(path);
  if (!is) { throw ConfigError("cannot read config " + path.string()); }
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

void write_field_csv(const std::filesystem::path& path, const ConstraintOperator& op, const Field& f)
{
  auto os = open_out(path);
  os << "i,j,x,y,value\n";
  int const nx = op.grid().nodes_x();
  for (int k = 0; k < op.size(); ++k) {
    Point const p = op.node(k);
    os << k % nx << ',' << k / nx << ',' << g17(p.x) << ',' << g17(p.y) << ',' << g17(f[k]) << '\n';
  }
}

void write_vector_csv(const std::filesystem::path& path, const ConstraintOperator& op, const VectorField& w)
{
  auto os = open_out(path);
  os << "i,j,x,y,vx,vy\n";
  int const nx = op.grid().nodes_x();
  for (int k = 0; k < op.size(); ++k) {
    Point const p = op.node(k);
    os << k % nx << ',' << k / nx << ',' << g17(p.x) << ',' << g17(p.y) << ',' << g17(w(k, 0)) << ','
       << g17(w(k, 1)) << '\n';
  }
}

Field read_field_csv(const std::filesystem::path& path, const ConstraintOperator& op)
{
  auto const rows = read_csv(path, op, "i,j,x,y,value", 5);
  Field f(op.size());
  for (int k = 0; k < op.size(); ++k) { f[k] = rows[k][4]; }
  return f;
}

VectorField read_vector_csv(const std::filesystem::path& path, const ConstraintOperator& op)
{
  auto const rows = read_csv(path, op, "i,j,x,y,vx,vy", 6);
  VectorField w(op.size(), 2);
  for (int k = 0; k < op.size(); ++k) {
    w(k, 0) = rows[k][4];
    w(k, 1) = rows[k][5];
  }
  return w;
}

void write_heatmap(const std::filesystem::path& path, const ConstraintOperator& op, const Field& f)
{
  int const nx = op.grid().nodes_x();
  int const ny = op.grid().nodes_y();
  double const lo = f.minCoeff();
  double const span = f.maxCoeff() - lo;
  auto os = open_out(path, std::ios::out | std::ios::binary);
  os << "P6\n" << nx << ' ' << ny << "\n255\n";
  for (int j = ny - 1; j >= 0; --j) {
    for (int i = 0; i < nx; ++i) {
      double const t = span > 0.0 ? (f[op.index(i, j)] - lo) / span : 0.0;
      auto const v = static_cast<unsigned char>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
      os.put(static_cast<char>(v)).put(static_cast<char>(v)).put(static_cast<char>(v));
    }
  }
}

json to_json(const CoeffExpr& c) { return {{"a0", c.a0}, {"a1", c.a1}, {"a2", c.a2}}; }

json to_json(const ResidualReport& r)
{
  json j;
  j["kkt_row1"] = r.kkt_row1;
  j["fp_residual"] = r.fp_residual;
  j["mass_error"] = r.mass_error;
  j["drift_residual"] = r.drift_residual;
  j["min_density"] = r.min_density;
  j["max_density"] = r.max_density;
  j["density_ratio"] = r.density_ratio;
  j["complementarity"] = r.complementarity;
  j["support_violation"] = r.support_violation;
  j["p_min"] = r.p_min;
  j["constrained"] = r.constrained;
  j["apriori_w_bound"] = {{"applicable", r.apriori_w_bound.applicable},
                          {"lhs", r.apriori_w_bound.lhs},
                          {"rhs", r.apriori_w_bound.rhs},
                          {"pass", r.apriori_w_bound.pass},
                          {"strict", r.apriori_w_bound.strict}};
  j["duality_gap"] = r.duality_gap ? json(*r.duality_gap) : json(nullptr);
  j["hypotheses_verified"] = r.hypotheses_verified;
  j["pass"] = r.pass;
  j["failures"] = r.failures;
  return j;
}

} // namespace mfg
