#include "mfg/coupling.hpp"

#include "mfg/error.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/Eigenvalues>

#include <limits>
#include <random>

namespace mfg {

std::string to_string(CouplingKind k)
{
  switch (k) {
  case CouplingKind::zero: return "zero";
  case CouplingKind::local_primitive: return "local_primitive";
  case CouplingKind::gradient_dependent: return "gradient_dependent";
  case CouplingKind::nonlocal_convolution: return "nonlocal_convolution";
  case CouplingKind::multipop_potential: return "multipop_potential";
  }
  return "zero";
}

CouplingKind coupling_kind_from_string(const std::string& s)
{
  for (auto k : {CouplingKind::zero, CouplingKind::local_primitive, CouplingKind::gradient_dependent,
                 CouplingKind::nonlocal_convolution, CouplingKind::multipop_potential}) {
    if (to_string(k) == s) { return k; }
  }
  throw ConfigError("unknown coupling kind \"" + s + "\"");
}

double LocalLaw::f(double z, double v) const
{
  switch (form) {
  case Form::none: return v;
  case Form::linear: return slope * z + v;
  case Form::pow: return sign * std::pow(std::abs(z), r) + v;
  }
  return v;
}

double LocalLaw::df(double z) const
{
  switch (form) {
  case Form::none: return 0.0;
  case Form::linear: return slope;
  case Form::pow: return z == 0.0 && r < 1.0 ? 0.0 : sign * r * std::pow(std::abs(z), r - 1.0) * (z < 0.0 ? -1.0 : 1.0);
  }
  return 0.0;
}

double LocalLaw::primitive(double z, double v) const
{
  switch (form) {
  case Form::none: return v * z;
  case Form::linear: return 0.5 * slope * z * z + v * z;
  case Form::pow: return sign * z * std::pow(std::abs(z), r) / (r + 1.0) + v * z;
  }
  return v * z;
}

bool LocalLaw::nondecreasing() const
{
  switch (form) {
  case Form::none: return true;
  case Form::linear: return slope >= 0.0;
  case Form::pow: return sign >= 0.0;
  }
  return true;
}

namespace {

// min over z >= 0 of primitive(z) + v z; nullopt when unbounded below.
std::optional<double> primitive_min(const LocalLaw& law, double v)
{
  switch (law.form) {
  case LocalLaw::Form::none: return v >= 0.0 ? std::optional<double>(0.0) : std::nullopt;
  case LocalLaw::Form::linear:
    if (law.slope > 0.0) { return v >= 0.0 ? 0.0 : -v * v / (2.0 * law.slope); }
    if (law.slope == 0.0 && v >= 0.0) { return 0.0; }
    return std::nullopt;
  case LocalLaw::Form::pow:
    if (law.sign > 0.0) {
      if (v >= 0.0) { return 0.0; }
      double const a = law.sign;
      double const z = std::pow(-v / a, 1.0 / law.r);
      return law.primitive(z, v);
    }
    if (law.sign == 0.0 && v >= 0.0) { return 0.0; }
    return std::nullopt;
  }
  return std::nullopt;
}

double law_lipschitz(const LocalLaw& law, const Field& m)
{
  switch (law.form) {
  case LocalLaw::Form::none: return 0.0;
  case LocalLaw::Form::linear: return std::abs(law.slope);
  case LocalLaw::Form::pow: {
    double const mmax = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    if (law.r >= 1.0) { return std::abs(law.sign) * law.r * std::pow(mmax + 1.0, law.r - 1.0); }
    return std::abs(law.sign);
  }
  }
  return 0.0;
}

class ZeroCoupling final : public Coupling
{
public:
  explicit ZeroCoupling(OperatorPtr op)
    : op_(std::move(op))
  {}
  double value(const Field&) const override { return 0.0; }
  Field derivative(const Field& m) const override { return Field::Zero(m.size()); }
  SpMat jacobian(const Field& m) const override { return SpMat(m.size(), m.size()); }
  double lipschitz(const Field&) const override { return 0.0; }
  std::optional<double> lower_bound() const override { return 0.0; }
  bool convex() const override { return true; }
  CouplingKind kind() const override { return CouplingKind::zero; }

private:
  OperatorPtr op_;
};

class LocalCoupling : public Coupling
{
public:
  LocalCoupling(LocalLaw law, Field offset, OperatorPtr op)
    : law_(std::move(law))
    , offset_(std::move(offset))
    , op_(std::move(op))
  {}

  double value(const Field& m) const override
  {
    double s = 0.0;
    for (int k = 0; k < m.size(); ++k) { s += op_->weights()[k] * law_.primitive(m[k], offset_[k]); }
    return s;
  }

  Field derivative(const Field& m) const override
  {
    Field g(m.size());
    for (int k = 0; k < m.size(); ++k) { g[k] = law_.f(m[k], offset_[k]); }
    return g;
  }

  SpMat jacobian(const Field& m) const override
  {
    Field d(m.size());
    for (int k = 0; k < m.size(); ++k) { d[k] = law_.df(m[k]); }
    return diagonal(d);
  }

  double lipschitz(const Field& m) const override { return law_lipschitz(law_, m); }

  std::optional<double> lower_bound() const override
  {
    double s = 0.0;
    for (int k = 0; k < offset_.size(); ++k) {
      auto const v = primitive_min(law_, offset_[k]);
      if (!v) { return std::nullopt; }
      s += op_->weights()[k] * *v;
    }
    return s;
  }

  bool convex() const override { return law_.nondecreasing(); }
  CouplingKind kind() const override { return CouplingKind::local_primitive; }

protected:
  LocalLaw law_;
  Field offset_;
  OperatorPtr op_;
};

// Power iteration for the largest eigenvalue of a self-adjoint (in the lumped
// inner product) linear map.
template <typename Apply>
double power_iteration(const ConstraintOperator& op, Apply apply, int iters = 60)
{
  Field v = Field::Ones(op.size());
  for (int k = 0; k < v.size(); ++k) { v[k] += 0.37 * std::sin(1.3 * k); }
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    double const nv = std::sqrt(op.dot(v, v));
    if (nv == 0.0) { return 0.0; }
    v /= nv;
    Field const Av = apply(v);
    lam = std::sqrt(op.dot(Av, Av));
    v = Av;
  }
  return lam;
}

class DirichletCoupling final : public LocalCoupling
{
public:
  DirichletCoupling(LocalLaw law, Field offset, double mu, OperatorPtr op)
    : LocalCoupling(std::move(law), std::move(offset), std::move(op))
    , mu_(mu)
  {
    Field const winv = op_->weights().cwiseInverse();
    stiff_bound_ = std::abs(mu_) * power_iteration(*op_, [&](const Field& v) -> Field {
                     return winv.cwiseProduct(op_->apply_A(v));
                   }) * 1.05;
  }

  double value(const Field& m) const override { return LocalCoupling::value(m) + 0.5 * mu_ * m.dot(op_->apply_A(m)); }

  Field derivative(const Field& m) const override
  {
    return LocalCoupling::derivative(m) + mu_ * op_->apply_A(m).cwiseQuotient(op_->weights());
  }

  SpMat jacobian(const Field& m) const override
  {
    SpMat const J = LocalCoupling::jacobian(m);
    return J + SpMat(mu_ * op_->weights().cwiseInverse().asDiagonal() * op_->stiffness());
  }

  double lipschitz(const Field& m) const override { return LocalCoupling::lipschitz(m) + stiff_bound_; }

  std::optional<double> lower_bound() const override
  {
    if (mu_ < 0.0) { return std::nullopt; }
    return LocalCoupling::lower_bound();
  }

  bool convex() const override { return mu_ >= 0.0 && LocalCoupling::convex(); }
  bool hypotheses_verified() const override { return mu_ >= 0.0; }
  CouplingKind kind() const override { return CouplingKind::gradient_dependent; }

private:
  double mu_;
  double stiff_bound_ = 0.0;
};

/*
 * F_h(m) = sum_{i in E} omega_i [ mu0/2 (rho*m)_i^2 + mu1/2 |(rho*grad m)_i|^2 ]
 *
 * The kernel is a shifted bump sampled on the grid, normalised to unit
 * discrete mass; E are the nodes whose stencil stays inside the rectangle.
 */
class NonlocalCoupling final : public Coupling
{
public:
  NonlocalCoupling(const CouplingSpec& spec, OperatorPtr op)
    : op_(std::move(op))
    , mu0_(spec.nonlocal_weight)
    , mu1_(spec.nonlocal_grad_weight)
  {
    auto const& g = op_->grid();
    double const hx = g.hx(), hy = g.hy(), eps = spec.kernel_radius;
    double const sx = spec.kernel_shift_x, sy = spec.kernel_shift_y;
    if (!(eps > 0.0)) { throw ConfigError("nonlocal kernel radius must be positive"); }
    int const rx = static_cast<int>(std::ceil((eps + std::abs(sx)) / hx));
    int const ry = static_cast<int>(std::ceil((eps + std::abs(sy)) / hy));

    struct Tap { int di, dj; double w; };
    std::vector<Tap> taps;
    double mass = 0.0;
    for (int dj = -ry; dj <= ry; ++dj) {
      for (int di = -rx; di <= rx; ++di) {
        double const zx = di * hx - sx, zy = dj * hy - sy;
        double const v = 1.0 - (zx * zx + zy * zy) / (eps * eps);
        if (v > 0.0) {
          taps.push_back({di, dj, v});
          mass += v * hx * hy;
        }
      }
    }
    if (taps.empty()) { throw ConfigError("nonlocal kernel radius is below the grid resolution"); }

    std::vector<Eigen::Triplet<double>> t;
    eroded_ = Field::Zero(op_->size());
    for (int j = ry; j <= g.Ny - ry; ++j) {
      for (int i = rx; i <= g.Nx - rx; ++i) {
        int const k = op_->index(i, j);
        eroded_[k] = op_->weights()[k];
        // (rho * m)(x_k) = sum rho(y) m(x_k - y) hx hy
        for (auto const& tp : taps) { t.emplace_back(k, op_->index(i - tp.di, j - tp.dj), tp.w / mass * hx * hy); }
      }
    }
    if (eroded_.sum() == 0.0) { throw ConfigError("nonlocal kernel radius leaves no interior nodes"); }
    conv_.resize(op_->size(), op_->size());
    conv_.setFromTriplets(t.begin(), t.end());

    lip_ = power_iteration(*op_, [&](const Field& v) -> Field { return derivative(v); }) * 1.05;
  }

  double value(const Field& m) const override
  {
    Field const s0 = conv_ * m;
    double v = 0.5 * mu0_ * eroded_.dot(s0.cwiseProduct(s0));
    if (mu1_ != 0.0) {
      Field const s1 = conv_ * (op_->grad_x() * m), s2 = conv_ * (op_->grad_y() * m);
      v += 0.5 * mu1_ * eroded_.dot(s1.cwiseProduct(s1) + s2.cwiseProduct(s2));
    }
    return v;
  }

  // Transposed kernel: g = W^{-1} C^T W_E (mu0 s0) + gradient terms.
  Field derivative(const Field& m) const override
  {
    Field const s0 = conv_ * m;
    Field r = conv_.transpose() * (mu0_ * eroded_.cwiseProduct(s0));
    if (mu1_ != 0.0) {
      Field const s1 = conv_ * (op_->grad_x() * m), s2 = conv_ * (op_->grad_y() * m);
      r += op_->grad_x().transpose() * (conv_.transpose() * (mu1_ * eroded_.cwiseProduct(s1)));
      r += op_->grad_y().transpose() * (conv_.transpose() * (mu1_ * eroded_.cwiseProduct(s2)));
    }
    return r.cwiseQuotient(op_->weights());
  }

  SpMat jacobian(const Field&) const override
  {
    SpMat const E = diagonal(eroded_);
    SpMat const Ct = conv_.transpose();
    SpMat J = mu0_ * (Ct * E * conv_);
    if (mu1_ != 0.0) {
      SpMat const Cx = conv_ * op_->grad_x(), Cy = conv_ * op_->grad_y();
      J += mu1_ * (SpMat(Cx.transpose()) * E * Cx + SpMat(Cy.transpose()) * E * Cy);
    }
    return op_->weights().cwiseInverse().asDiagonal() * J;
  }

  double lipschitz(const Field&) const override { return lip_; }

  std::optional<double> lower_bound() const override
  {
    if (mu0_ < 0.0 || mu1_ < 0.0) { return std::nullopt; }
    return 0.0;
  }

  bool convex() const override { return mu0_ >= 0.0 && mu1_ >= 0.0; }
  bool hypotheses_verified() const override { return mu1_ >= 0.0; }
  CouplingKind kind() const override { return CouplingKind::nonlocal_convolution; }

private:
  OperatorPtr op_;
  double mu0_, mu1_;
  SpMat conv_;
  Field eroded_;  // omega on E, 0 elsewhere
  double lip_ = 0.0;
};

class HintedCoupling final : public Coupling
{
public:
  HintedCoupling(CouplingPtr inner, double hint)
    : inner_(std::move(inner))
    , hint_(hint)
  {}
  double value(const Field& m) const override { return inner_->value(m); }
  Field derivative(const Field& m) const override { return inner_->derivative(m); }
  SpMat jacobian(const Field& m) const override { return inner_->jacobian(m); }
  double lipschitz(const Field&) const override { return hint_; }
  std::optional<double> lower_bound() const override { return inner_->lower_bound(); }
  bool convex() const override { return inner_->convex(); }
  bool hypotheses_verified() const override { return inner_->hypotheses_verified(); }
  CouplingKind kind() const override { return inner_->kind(); }

private:
  CouplingPtr inner_;
  double hint_;
};

} // namespace

CouplingPtr make_local_coupling(const LocalLaw& law, Field offset, OperatorPtr op)
{
  return std::make_shared<LocalCoupling>(law, std::move(offset), std::move(op));
}

CouplingPtr make_coupling(const CouplingSpec& spec, OperatorPtr op)
{
  CouplingPtr c;
  switch (spec.kind) {
  case CouplingKind::zero: c = std::make_shared<ZeroCoupling>(op); break;
  case CouplingKind::local_primitive:
    c = std::make_shared<LocalCoupling>(spec.law, sample_nodes(spec.law.offset, *op), op);
    break;
  case CouplingKind::gradient_dependent:
    c = std::make_shared<DirichletCoupling>(spec.law, sample_nodes(spec.law.offset, *op), spec.dirichlet_weight, op);
    break;
  case CouplingKind::nonlocal_convolution: c = std::make_shared<NonlocalCoupling>(spec, op); break;
  case CouplingKind::multipop_potential:
    throw ConfigError("multipop_potential couplings act on several populations; use make_quadratic_potential");
  }
  if (spec.lipschitz_hint > 0.0) { c = std::make_shared<HintedCoupling>(c, spec.lipschitz_hint); }
  return c;
}

double coupling_value(const Coupling& c, const Field& m) { return c.value(m); }
Field coupling_derivative(const Coupling& c, const Field& m) { return c.derivative(m); }

AdmissibilityReport check_admissibility(const CouplingSpec& spec, const ConstraintOperator& op, double R)
{
  if (!(R > 0.0)) { throw std::invalid_argument("check_admissibility: R must be positive"); }
  AdmissibilityReport rep;
  constexpr int kSamples = 201;
  Field const v = sample_nodes(spec.law.offset, op);

  bool first = true;
  for (int k = 0; k < v.size(); ++k) {
    double prev_f = 0.0, prev_F5 = 0.0;
    for (int s = 0; s < kSamples; ++s) {
      double const z = R * s / (kSamples - 1);
      double const F = spec.law.primitive(z, v[k]);
      double const f = spec.law.f(z, v[k]);
      if (first || F < rep.min_primitive) { rep.min_primitive = F; }
      first = false;
      rep.max_abs_f = std::max(rep.max_abs_f, std::abs(f));
      if (s > 0 && f < prev_f - 1e-12 * (1.0 + std::abs(prev_f))) { rep.monotone = false; }
      prev_f = f;
    }
    // Trend of the primitive on [5R, 10R]: a decreasing tail means no global
    // lower bound is plausible.
    for (int s = 0; s < kSamples; ++s) {
      double const z = 5.0 * R + 5.0 * R * s / (kSamples - 1);
      double const F = spec.law.primitive(z, v[k]);
      if (s > 0 && F < prev_F5 - 1e-12 * (1.0 + std::abs(prev_F5))) { rep.global_lower_bound = false; }
      prev_F5 = F;
    }
  }

  switch (spec.kind) {
  case CouplingKind::gradient_dependent:
    rep.convex_in_gradient = spec.dirichlet_weight >= 0.0;
    break;
  case CouplingKind::nonlocal_convolution:
    rep.convex_in_gradient = spec.nonlocal_grad_weight >= 0.0;
    break;
  case CouplingKind::multipop_potential:
    for (std::size_t i = 0; i < spec.matrix.size(); ++i) {
      if (spec.matrix[i][i] < 0.0) { rep.monotone = false; }
    }
    break;
  default: break;
  }
  if (!rep.convex_in_gradient) { rep.note = "existence hypotheses unverified"; }
  return rep;
}

namespace {

class SingleJoint final : public JointCoupling
{
public:
  explicit SingleJoint(CouplingPtr c)
    : c_(std::move(c))
  {}
  int populations() const override { return 1; }
  double value(const std::vector<Field>& m) const override { return c_->value(m[0]); }
  std::vector<Field> derivative(const std::vector<Field>& m) const override { return {c_->derivative(m[0])}; }
  SpMat jacobian(const std::vector<Field>& m) const override { return c_->jacobian(m[0]); }
  double lipschitz(const std::vector<Field>& m) const override { return c_->lipschitz(m[0]); }
  bool convex() const override { return c_->convex(); }

private:
  CouplingPtr c_;
};

class QuadraticPotential final : public JointCoupling
{
public:
  QuadraticPotential(const CouplingSpec& spec, OperatorPtr op)
    : op_(std::move(op))
  {
    int const n = static_cast<int>(spec.matrix.size());
    if (n < 1) { throw ConfigError("multipop coupling matrix is empty"); }
    Q_.resize(n, n);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(spec.matrix[i].size()) != n) { throw ConfigError("multipop coupling matrix must be square"); }
      for (int j = 0; j < n; ++j) { Q_(i, j) = spec.matrix[i][j]; }
    }
    for (int i = 0; i < n; ++i) {
      offsets_.push_back(i < static_cast<int>(spec.offsets.size()) ? sample_nodes(spec.offsets[i], *op_)
                                                                    : Field::Zero(op_->size()));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Q_ + Q_.transpose()));
    lip_ = es.eigenvalues().cwiseAbs().maxCoeff();
    convex_ = es.eigenvalues().minCoeff() >= 0.0;
  }

  int populations() const override { return static_cast<int>(Q_.rows()); }

  double value(const std::vector<Field>& m) const override
  {
    int const n = populations();
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) { s += 0.5 * Q_(i, j) * op_->dot(m[i], m[j]); }
      s += op_->dot(offsets_[i], m[i]);
    }
    return s;
  }

  std::vector<Field> derivative(const std::vector<Field>& m) const override
  {
    int const n = populations();
    std::vector<Field> g(n);
    for (int i = 0; i < n; ++i) {
      g[i] = offsets_[i];
      for (int j = 0; j < n; ++j) { g[i] += Q_(i, j) * m[j]; }
    }
    return g;
  }

  SpMat jacobian(const std::vector<Field>&) const override
  {
    int const N = populations(), n = op_->size();
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        if (Q_(i, j) == 0.0) { continue; }
        for (int k = 0; k < n; ++k) { t.emplace_back(i * n + k, j * n + k, Q_(i, j)); }
      }
    }
    SpMat J(N * n, N * n);
    J.setFromTriplets(t.begin(), t.end());
    return J;
  }

  double lipschitz(const std::vector<Field>&) const override { return lip_; }
  bool convex() const override { return convex_; }

private:
  OperatorPtr op_;
  Eigen::MatrixXd Q_;
  std::vector<Field> offsets_;
  double lip_ = 0.0;
  bool convex_ = true;
};

} // namespace

JointCouplingPtr make_joint(CouplingPtr single) { return std::make_shared<SingleJoint>(std::move(single)); }

JointCouplingPtr make_quadratic_potential(const CouplingSpec& spec, OperatorPtr op)
{
  return std::make_shared<QuadraticPotential>(spec, std::move(op));
}

CouplingPtr freeze_population(const CouplingSpec& spec, OperatorPtr op, const std::vector<Field>& m, int i)
{
  int const n = static_cast<int>(spec.matrix.size());
  if (i < 0 || i >= n || static_cast<int>(m.size()) != n) { throw std::invalid_argument("freeze_population: bad index"); }
  Field offset = i < static_cast<int>(spec.offsets.size()) ? sample_nodes(spec.offsets[i], *op) : Field::Zero(op->size());
  for (int j = 0; j < n; ++j) {
    if (j != i) { offset += spec.matrix[i][j] * m[j]; }
  }
  LocalLaw law;
  law.form = LocalLaw::Form::linear;
  law.slope = spec.matrix[i][i];
  return make_local_coupling(law, std::move(offset), std::move(op));
}

double potential_mismatch(const CouplingSpec& spec, const ConstraintOperator& op, std::uint64_t seed)
{
  int const n = static_cast<int>(spec.matrix.size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uz(0.0, 3.0);
  std::uniform_int_distribution<int> node(0, op.size() - 1);
  auto F = [&](const std::vector<double>& z, double const* v) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) { s += 0.5 * spec.matrix[i][j] * z[i] * z[j]; }
      s += v[i] * z[i];
    }
    return s;
  };
  double worst = 0.0;
  double const h = 1e-5;
  for (int s = 0; s < 50; ++s) {
    Point const x = op.node(node(rng));
    std::vector<double> z(n), v(n);
    for (int i = 0; i < n; ++i) {
      z[i] = uz(rng);
      v[i] = i < static_cast<int>(spec.offsets.size()) ? spec.offsets[i](x) : 0.0;
    }
    for (int i = 0; i < n; ++i) {
      double fi = v[i];
      for (int j = 0; j < n; ++j) { fi += spec.matrix[i][j] * z[j]; }
      auto zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      double const fd = (F(zp, v.data()) - F(zm, v.data())) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - fi));
    }
  }
  return worst;
}

} // namespace mfg
