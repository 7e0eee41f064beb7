#include "mfg/discretization.hpp"

#include "mfg/error.hpp"
#include "mfg/kinetic.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace mfg {

void GridSpec::validate() const
{
  if (!(Lx > 0.0) || !(Ly > 0.0)) { throw ConfigError("grid lengths Lx, Ly must be positive"); }
  if (Nx < 1 || Ny < 1) { throw ConfigError("grid needs at least one cell per direction"); }
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Local node (a, b): x offset a, y offset b.
std::array<std::array<double, 4>, 4> element_stiffness(double hx, double hy)
{
  double const kx[2][2] = {{1.0 / hx, -1.0 / hx}, {-1.0 / hx, 1.0 / hx}};
  double const ky[2][2] = {{1.0 / hy, -1.0 / hy}, {-1.0 / hy, 1.0 / hy}};
  double const mx[2][2] = {{hx / 3.0, hx / 6.0}, {hx / 6.0, hx / 3.0}};
  double const my[2][2] = {{hy / 3.0, hy / 6.0}, {hy / 6.0, hy / 3.0}};
  std::array<std::array<double, 4>, 4> K{};
  for (int r = 0; r < 4; ++r) {
    for (int s = 0; s < 4; ++s) {
      int const a = r % 2, b = r / 2, a2 = s % 2, b2 = s / 2;
      K[r][s] = kx[a][a2] * my[b][b2] + mx[a][a2] * ky[b][b2];
    }
  }
  return K;
}

} // namespace

SpMat diagonal(const Field& d)
{
  SpMat D(d.size(), d.size());
  D.reserve(Eigen::VectorXi::Ones(d.size()));
  for (int k = 0; k < d.size(); ++k) { D.insert(k, k) = d[k]; }
  return D;
}

ConstraintOperator::ConstraintOperator(const GridSpec& grid)
  : grid_(grid)
  , n_(grid.node_count())
  , area_(grid.area())
{
  grid_.validate();
  double const hx = grid_.hx(), hy = grid_.hy();

  omega_ = Field::Zero(n_);
  Triplets ta;
  auto const K = element_stiffness(hx, hy);
  for (int cj = 0; cj < grid_.Ny; ++cj) {
    for (int ci = 0; ci < grid_.Nx; ++ci) {
      int const ids[4] = {index(ci, cj), index(ci + 1, cj), index(ci, cj + 1), index(ci + 1, cj + 1)};
      for (int r = 0; r < 4; ++r) {
        omega_[ids[r]] += 0.25 * hx * hy;
        for (int s = 0; s < 4; ++s) { ta.emplace_back(ids[r], ids[s], K[r][s]); }
      }
    }
  }
  A_.resize(n_, n_);
  A_.setFromTriplets(ta.begin(), ta.end());

  Triplets tx, ty;
  for (int j = 0; j <= grid_.Ny; ++j) {
    for (int i = 0; i <= grid_.Nx; ++i) {
      int const k = index(i, j);
      std::vector<std::pair<int, int>> cells;
      for (int ci = i - 1; ci <= i; ++ci) {
        for (int cj = j - 1; cj <= j; ++cj) {
          if (ci >= 0 && ci < grid_.Nx && cj >= 0 && cj < grid_.Ny) { cells.emplace_back(ci, cj); }
        }
      }
      double const wgt = 1.0 / static_cast<double>(cells.size());
      for (auto [ci, cj] : cells) {
        double const sx = wgt / (2.0 * hx), sy = wgt / (2.0 * hy);
        tx.emplace_back(k, index(ci + 1, cj), sx);
        tx.emplace_back(k, index(ci, cj), -sx);
        tx.emplace_back(k, index(ci + 1, cj + 1), sx);
        tx.emplace_back(k, index(ci, cj + 1), -sx);
        ty.emplace_back(k, index(ci, cj + 1), sy);
        ty.emplace_back(k, index(ci, cj), -sy);
        ty.emplace_back(k, index(ci + 1, cj + 1), sy);
        ty.emplace_back(k, index(ci + 1, cj), -sy);
      }
    }
  }
  Gx_.resize(n_, n_);
  Gy_.resize(n_, n_);
  Gx_.setFromTriplets(tx.begin(), tx.end());
  Gy_.setFromTriplets(ty.begin(), ty.end());

  // A is singular on constants only; drop the last node to get an SPD block.
  SpMat const reduced = A_.topLeftCorner(n_ - 1, n_ - 1);
  grounded_.compute(reduced);
  if (grounded_.info() != Eigen::Success) { throw LinearSolveFailure("stiffness factorization failed"); }
}

Point ConstraintOperator::node(int k) const
{
  int const nx = grid_.nodes_x();
  return {(k % nx) * grid_.hx(), (k / nx) * grid_.hy()};
}

Field ConstraintOperator::apply_B(const VectorField& w) const
{
  Field const wx = omega_.cwiseProduct(w.col(0));
  Field const wy = omega_.cwiseProduct(w.col(1));
  return -(Gx_.transpose() * wx + Gy_.transpose() * wy);
}

VectorField ConstraintOperator::apply_Bt(const Field& y) const
{
  VectorField out(n_, 2);
  out.col(0) = -omega_.cwiseProduct(Gx_ * y);
  out.col(1) = -omega_.cwiseProduct(Gy_ * y);
  return out;
}

VectorField ConstraintOperator::gradient(const Field& u) const
{
  VectorField out(n_, 2);
  out.col(0) = Gx_ * u;
  out.col(1) = Gy_ * u;
  return out;
}

Field ConstraintOperator::solve_stiffness(const Field& r) const
{
  Field x = Field::Zero(n_);
  x.head(n_ - 1) = grounded_.solve(r.head(n_ - 1));
  if (grounded_.info() != Eigen::Success) { throw LinearSolveFailure("stiffness solve failed"); }
  x.array() -= x.mean();
  return x;
}

Field ConstraintOperator::solve_normal(const Field& r) const
{
  std::call_once(normal_once_, [this] {
    SpMat const Winv = diagonal(omega_.cwiseInverse());
    SpMat const W = diagonal(omega_);
    SpMat M = A_ * Winv * A_;
    M += SpMat(Gx_.transpose() * W * Gx_);
    M += SpMat(Gy_.transpose() * W * Gy_);
    SpMat const reduced = M.topLeftCorner(n_ - 1, n_ - 1);
    normal_ = std::make_unique<Eigen::SimplicialLDLT<SpMat>>(reduced);
    if (normal_->info() != Eigen::Success) { throw LinearSolveFailure("normal-operator factorization failed"); }
  });
  Field x = Field::Zero(n_);
  x.head(n_ - 1) = normal_->solve(r.head(n_ - 1));
  x.array() -= x.mean();
  return x;
}

OperatorPtr build_operators(const GridSpec& grid) { return std::make_shared<const ConstraintOperator>(grid); }

Field solve_fp_linear(const ConstraintOperator& op, const VectorField& w)
{
  Field const rhs = -op.apply_B(w);
  Field m = op.solve_stiffness(rhs);
  m.array() += (1.0 - op.integral(m)) / op.area();
  return m;
}

VectorField nodal_gradient(const ConstraintOperator& op, const Field& u) { return op.gradient(u); }

Norms norms(const ConstraintOperator& op, const Field& f, double q)
{
  Norms n;
  Field const af = f.cwiseAbs();
  n.Linf = af.size() ? af.maxCoeff() : 0.0;
  double const fq = op.weights().dot(af.array().pow(q).matrix());
  VectorField const g = op.gradient(f);
  Field const gn = g.rowwise().norm();
  double const gq = op.weights().dot(gn.array().pow(q).matrix());
  n.Lq = std::pow(fq, 1.0 / q);
  n.W1q = std::pow(fq + gq, 1.0 / q);
  return n;
}

Norms norms(const ConstraintOperator& op, const VectorField& w, double q)
{
  Norms n;
  Field const wn = w.rowwise().norm();
  n.Linf = wn.size() ? wn.maxCoeff() : 0.0;
  n.Lq = std::pow(op.weights().dot(wn.array().pow(q).matrix()), 1.0 / q);
  return n;
}

std::vector<LocalH> sample_nodes(const HamiltonianModel& model, const ConstraintOperator& op)
{
  std::vector<LocalH> out(op.size());
  for (int k = 0; k < op.size(); ++k) { out[k] = model.at(op.node(k)); }
  return out;
}

Field sample_nodes(const CoeffExpr& expr, const ConstraintOperator& op)
{
  Field out(op.size());
  for (int k = 0; k < op.size(); ++k) { out[k] = expr(op.node(k)); }
  return out;
}

double Bq_total(const std::vector<LocalH>& h, const ConstraintOperator& op, const Field& m, const VectorField& w)
{
  double total = 0.0;
  for (int k = 0; k < op.size(); ++k) {
    double const v = bq_value(h[k], m[k], Vec2(w(k, 0), w(k, 1)));
    if (v == kInf) { return kInf; }
    total += op.weights()[k] * v;
  }
  return total;
}

double Bq_total(const HamiltonianModel& model, const ConstraintOperator& op, const Field& m, const VectorField& w)
{
  return Bq_total(sample_nodes(model, op), op, m, w);
}

} // namespace mfg
