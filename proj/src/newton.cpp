#include "mfg/solver.hpp"

#include <Eigen/LU>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace mfg::detail {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Hessian of H* at eta; continuous at the origin because q > 2.
Eigen::Matrix2d hess_hstar(const LocalH& h, const Vec2& eta)
{
  double const r = eta.norm();
  if (r == 0.0) { return Eigen::Matrix2d::Zero(); }
  double const s = std::pow(h.b, 1.0 - h.q) * std::pow(r, h.q - 2.0);
  Vec2 const e = eta / r;
  return s * (Eigen::Matrix2d::Identity() + (h.q - 2.0) * e * e.transpose());
}

// Appends M at (r0, c0), skipping rows at or beyond row_end.
void add_block(Triplets& t, const SpMat& M, int r0, int c0, int row_end = -1)
{
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      if (row_end >= 0 && it.row() >= row_end) { continue; }
      t.emplace_back(r0 + static_cast<int>(it.row()), c0 + static_cast<int>(it.col()), it.value());
    }
  }
}

struct Layout
{
  int n, N;
  bool bound;
  int block() const { return 4 * n + 1; }
  int m(int k) const { return k * block(); }
  int u(int k) const { return m(k) + n; }
  int vx(int k) const { return m(k) + 2 * n; }
  int vy(int k) const { return m(k) + 3 * n; }
  int lambda(int k) const { return m(k) + 4 * n; }
  int p() const { return N * block(); }
  int size() const { return N * block() + (bound ? n : 0); }
};

/*
 * Unknowns per population: m, u, v = grad H(G u) and lambda; shared p.
 *   FP    : W^{-1} (A m + G^T W (m v)); the last row is replaced by u = 0 at the last node
 *   HJB   : W^{-1} A u + <v, G u> - H*(v) + lambda - alpha p - g(m)
 *   v     : G u - grad H*(v)
 *   mass  : <omega, m> - 1
 *   bound : min(p, kappa - sum alpha m)
 * Carrying v keeps every row C^1: grad H is only Holder at the origin, grad H*
 * is C^1 there since q > 2. HJB equals the original row once the v rows hold.
 */
struct System
{
  const ConstraintOperator& op;
  const std::vector<std::vector<LocalH>>& h;
  const JointCoupling& coupling;
  const std::optional<SharedBound>& bound;
  Layout lay;

  std::vector<Field> densities(const Field& x) const
  {
    std::vector<Field> m(lay.N);
    for (int k = 0; k < lay.N; ++k) { m[k] = x.segment(lay.m(k), lay.n); }
    return m;
  }

  Field residual(const Field& x, SpMat* jac) const
  {
    int const n = lay.n, N = lay.N;
    auto const m = densities(x);
    Field const& omega = op.weights();
    Field const winv = omega.cwiseInverse();
    SpMat const& Gx = op.grad_x();
    SpMat const& Gy = op.grad_y();
    auto const g = coupling.derivative(m);
    Field F = Field::Zero(lay.size());
    Triplets t;

    for (int k = 0; k < N; ++k) {
      Field const u = x.segment(lay.u(k), n);
      Field const vx = x.segment(lay.vx(k), n);
      Field const vy = x.segment(lay.vy(k), n);
      double const lam = x[lay.lambda(k)];
      Field const gx = Gx * u, gy = Gy * u;
      Field hs(n), ex(n), ey(n), d00(n), d01(n), d11(n);
      for (int i = 0; i < n; ++i) {
        Vec2 const v(vx[i], vy[i]);
        Vec2 const gs = grad_hstar(h[k][i], v);
        hs[i] = hstar_value(h[k][i], v);
        ex[i] = gx[i] - gs.x();
        ey[i] = gy[i] - gs.y();
        if (jac) {
          Eigen::Matrix2d const D = hess_hstar(h[k][i], v);
          d00[i] = D(0, 0);
          d01[i] = D(0, 1);
          d11[i] = D(1, 1);
        }
      }
      Field const& mk = m[k];
      Field const fp = winv.cwiseProduct(op.apply_A(mk) + Gx.transpose() * omega.cwiseProduct(mk.cwiseProduct(vx)) +
                                         Gy.transpose() * omega.cwiseProduct(mk.cwiseProduct(vy)));
      F.segment(lay.m(k), n - 1) = fp.head(n - 1);
      F[lay.m(k) + n - 1] = u[n - 1];
      Field hjb = winv.cwiseProduct(op.apply_A(u)) + vx.cwiseProduct(gx) + vy.cwiseProduct(gy) - hs - g[k];
      hjb.array() += lam;
      if (lay.bound) { hjb -= bound->alpha[k] * x.segment(lay.p(), n); }
      F.segment(lay.u(k), n) = hjb;
      F.segment(lay.vx(k), n) = ex;
      F.segment(lay.vy(k), n) = ey;
      F[lay.lambda(k)] = omega.dot(mk) - 1.0;

      if (jac) {
        SpMat const Winv = diagonal(winv);
        SpMat const WGxt = Winv * SpMat(Gx.transpose()) * diagonal(omega);
        SpMat const WGyt = Winv * SpMat(Gy.transpose()) * diagonal(omega);
        SpMat const fm = Winv * op.stiffness() + WGxt * diagonal(vx) + WGyt * diagonal(vy);
        add_block(t, fm, lay.m(k), lay.m(k), n - 1);
        add_block(t, SpMat(WGxt * diagonal(mk)), lay.m(k), lay.vx(k), n - 1);
        add_block(t, SpMat(WGyt * diagonal(mk)), lay.m(k), lay.vy(k), n - 1);
        t.emplace_back(lay.m(k) + n - 1, lay.u(k) + n - 1, 1.0);

        SpMat const hu = Winv * op.stiffness() + diagonal(vx) * Gx + diagonal(vy) * Gy;
        add_block(t, hu, lay.u(k), lay.u(k));
        add_block(t, diagonal(ex), lay.u(k), lay.vx(k));
        add_block(t, diagonal(ey), lay.u(k), lay.vy(k));
        if (lay.bound) {
          for (int i = 0; i < n; ++i) { t.emplace_back(lay.u(k) + i, lay.p() + i, -bound->alpha[k]); }
        }

        add_block(t, Gx, lay.vx(k), lay.u(k));
        add_block(t, Gy, lay.vy(k), lay.u(k));
        for (int i = 0; i < n; ++i) {
          t.emplace_back(lay.vx(k) + i, lay.vx(k) + i, -d00[i]);
          t.emplace_back(lay.vx(k) + i, lay.vy(k) + i, -d01[i]);
          t.emplace_back(lay.vy(k) + i, lay.vx(k) + i, -d01[i]);
          t.emplace_back(lay.vy(k) + i, lay.vy(k) + i, -d11[i]);
        }

        // The lambda column and the mass row are dense; only their first
        // entries are stored, the rest enters through a low-rank correction.
        t.emplace_back(lay.lambda(k), lay.m(k), omega[0]);
        t.emplace_back(lay.u(k), lay.lambda(k), 1.0);
      }
    }

    if (jac) {
      SpMat const J = coupling.jacobian(m);
      for (int c = 0; c < J.outerSize(); ++c) {
        for (SpMat::InnerIterator it(J, c); it; ++it) {
          int const kr = static_cast<int>(it.row()) / n, ir = static_cast<int>(it.row()) % n;
          int const kc = static_cast<int>(it.col()) / n, ic = static_cast<int>(it.col()) % n;
          t.emplace_back(lay.u(kr) + ir, lay.m(kc) + ic, -it.value());
        }
      }
    }

    if (lay.bound) {
      Field load = Field::Zero(n);
      for (int k = 0; k < N; ++k) { load += bound->alpha[k] * m[k]; }
      for (int i = 0; i < n; ++i) {
        double const p = x[lay.p() + i];
        double const slack = bound->kappa[i] - load[i];
        bool const active = p > slack;
        F[lay.p() + i] = active ? slack : p;
        // Both branches are stored so the sparsity pattern never changes.
        if (jac) {
          for (int k = 0; k < N; ++k) { t.emplace_back(lay.p() + i, lay.m(k) + i, active ? -bound->alpha[k] : 0.0); }
          t.emplace_back(lay.p() + i, lay.p() + i, active ? 0.0 : 1.0);
        }
      }
    }

    if (jac) {
      jac->resize(lay.size(), lay.size());
      jac->setFromTriplets(t.begin(), t.end());
      jac->makeCompressed();
    }
    return F;
  }
};

} // namespace

NewtonOutcome newton_polish(const ConstraintOperator& op, const std::vector<std::vector<LocalH>>& h,
                            const JointCoupling& coupling, const std::optional<SharedBound>& bound,
                            std::vector<FieldSet>& fields, double tol, int max_iter)
{
  int const N = static_cast<int>(fields.size());
  int const n = op.size();
  System sys{op, h, coupling, bound, {n, N, bound.has_value()}};
  Layout const& lay = sys.lay;

  Field x(lay.size());
  for (int k = 0; k < N; ++k) {
    x.segment(lay.m(k), n) = fields[k].m;
    Field u = fields[k].u;
    u.array() -= u[n - 1];
    x.segment(lay.u(k), n) = u;
    VectorField const du = op.gradient(u);
    for (int i = 0; i < n; ++i) {
      Vec2 const v = grad_h(h[k][i], Vec2(du(i, 0), du(i, 1)));
      x[lay.vx(k) + i] = v.x();
      x[lay.vy(k) + i] = v.y();
    }
    x[lay.lambda(k)] = fields[k].lambda;
  }
  if (lay.bound) { x.segment(lay.p(), n) = fields[0].p ? *fields[0].p : Field::Zero(n); }

  // J = J_s + U V^T; U V^T restores the dense lambda columns and mass rows.
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(lay.size(), 2 * N);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(lay.size(), 2 * N);
  for (int k = 0; k < N; ++k) {
    for (int i = 1; i < n; ++i) {
      U(lay.u(k) + i, 2 * k) = 1.0;
      V(lay.m(k) + i, 2 * k + 1) = op.weights()[i];
    }
    V(lay.lambda(k), 2 * k) = 1.0;
    U(lay.lambda(k), 2 * k + 1) = 1.0;
  }

  NewtonOutcome out;
  SpMat J;
  Field F = sys.residual(x, &J);
  out.residual = F.cwiseAbs().maxCoeff();
  Eigen::SparseLU<SpMat> lu;
  lu.analyzePattern(J);
  std::vector<double> recent;
  for (out.iterations = 0; out.iterations < max_iter && out.residual > tol; ++out.iterations) {
    lu.factorize(J);
    if (lu.info() != Eigen::Success) { return out; }
    Field const y = lu.solve(-F);
    Eigen::MatrixXd const Z = lu.solve(U);
    Eigen::MatrixXd const S = Eigen::MatrixXd::Identity(U.cols(), U.cols()) + V.transpose() * Z;
    Field const dx = y - Z * S.partialPivLu().solve(V.transpose() * y);
    if (!dx.allFinite()) { return out; }

    // Nonmonotone backtracking on the residual norm, keeping densities
    // positive; the reference is the worst of the recent merits so that
    // active-set switches are not blocked by the kink of min(.,.).
    recent.push_back(F.squaredNorm());
    if (recent.size() > 5) { recent.erase(recent.begin()); }
    double const phi = *std::max_element(recent.begin(), recent.end());
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30 && !accepted; ++ls) {
      Field const trial = x + step * dx;
      bool positive = true;
      for (int k = 0; k < N && positive; ++k) { positive = trial.segment(lay.m(k), n).minCoeff() > 0.0; }
      if (positive) {
        Field const Ft = sys.residual(trial, nullptr);
        if (Ft.squaredNorm() <= (1.0 - 1e-4 * step) * phi) {
          x = trial;
          accepted = true;
        }
      }
      step *= 0.5;
    }
    if (!accepted) { return out; }
    F = sys.residual(x, &J);
    out.residual = F.cwiseAbs().maxCoeff();
  }
  if (out.residual > tol) { return out; }

  auto const m = sys.densities(x);
  for (int k = 0; k < N; ++k) {
    VectorField w(n, 2);
    w.col(0) = -m[k].cwiseProduct(x.segment(lay.vx(k), n));
    w.col(1) = -m[k].cwiseProduct(x.segment(lay.vy(k), n));
    fields[k].m = m[k];
    fields[k].w = std::move(w);
    fields[k].u = x.segment(lay.u(k), n);
    fields[k].u.array() -= op.weighted_mean(fields[k].u);
    fields[k].lambda = x[lay.lambda(k)];
    if (lay.bound) { fields[k].p = x.segment(lay.p(), n); }
  }
  out.converged = true;
  return out;
}

} // namespace mfg::detail
