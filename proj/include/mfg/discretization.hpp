#pragma once

#include "mfg/hamiltonian.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <memory>
#include <mutex>
#include <vector>

namespace mfg {

using Field = Eigen::VectorXd;
using VectorField = Eigen::MatrixX2d;
using SpMat = Eigen::SparseMatrix<double>;

/// Uniform rectangle [0,Lx]x[0,Ly] split into Nx x Ny bilinear cells.
struct GridSpec
{
  double Lx = 1.0;
  double Ly = 1.0;
  int Nx = 32;
  int Ny = 32;

  double hx() const { return Lx / Nx; }
  double hy() const { return Ly / Ny; }
  int nodes_x() const { return Nx + 1; }
  int nodes_y() const { return Ny + 1; }
  int node_count() const { return (Nx + 1) * (Ny + 1); }
  double area() const { return Lx * Ly; }
  void validate() const;
};

/**
 * Q1 operators with natural (no-flux) boundary conditions.
 *
 *   A      stiffness, <Am, phi> = int grad m . grad phi
 *   G      nodal gradient: cell-centre Q1 gradients averaged over the cells
 *          touching each node
 *   B      -G^T W (per component), so <Bw, phi> = -sum_i omega_i w_i . (G phi)_i
 *   omega  lumped mass (quadrature weights), sum = |Omega|
 *
 * Nodes are numbered row-major: k = j (Nx+1) + i.
 */
class ConstraintOperator
{
public:
  explicit ConstraintOperator(const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }
  int size() const { return n_; }
  int index(int i, int j) const { return j * grid_.nodes_x() + i; }
  Point node(int k) const;

  const Field& weights() const { return omega_; }
  double area() const { return area_; }
  const SpMat& stiffness() const { return A_; }
  const SpMat& grad_x() const { return Gx_; }
  const SpMat& grad_y() const { return Gy_; }

  Field apply_A(const Field& m) const { return A_ * m; }
  Field apply_B(const VectorField& w) const;
  /// B^T y as a nodal vector field.
  VectorField apply_Bt(const Field& y) const;
  VectorField gradient(const Field& u) const;

  /// <f, g>_omega.
  double dot(const Field& f, const Field& g) const { return (omega_.array() * f.array() * g.array()).sum(); }
  double integral(const Field& f) const { return omega_.dot(f); }
  double weighted_mean(const Field& f) const { return integral(f) / area_; }

  /// Solve A x = r for r with zero plain sum; returns the solution with zero plain sum.
  Field solve_stiffness(const Field& r) const;

  /// Solve (A W^{-1} A + B W^{-1} B^T) y = r, r with zero plain sum. This is
  /// K W^{-1} K^T for the Fokker-Planck rows; factored on first use.
  Field solve_normal(const Field& r) const;

private:
  GridSpec grid_;
  int n_;
  double area_;
  Field omega_;
  SpMat A_, Gx_, Gy_;
  Eigen::SimplicialLDLT<SpMat> grounded_;
  mutable std::once_flag normal_once_;
  mutable std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> normal_;
};

using OperatorPtr = std::shared_ptr<const ConstraintOperator>;

OperatorPtr build_operators(const GridSpec& grid);

/// Sparse diagonal matrix with entries d.
SpMat diagonal(const Field& d);

/// Unique m with A m = -B w and <omega, m> = 1.
Field solve_fp_linear(const ConstraintOperator& op, const VectorField& w);

VectorField nodal_gradient(const ConstraintOperator& op, const Field& u);

struct Norms
{
  double Lq = 0.0;
  double Linf = 0.0;
  double W1q = 0.0;
};

Norms norms(const ConstraintOperator& op, const Field& f, double q);
/// Lumped L^q and max norms of |w|; W1q is left at 0.
Norms norms(const ConstraintOperator& op, const VectorField& w, double q);

/// Hamiltonian coefficients sampled at every node.
std::vector<LocalH> sample_nodes(const HamiltonianModel& model, const ConstraintOperator& op);
Field sample_nodes(const CoeffExpr& expr, const ConstraintOperator& op);

/// Lumped integral of b_q; +inf when any node is infeasible.
double Bq_total(const std::vector<LocalH>& h, const ConstraintOperator& op, const Field& m, const VectorField& w);
double Bq_total(const HamiltonianModel& model, const ConstraintOperator& op, const Field& m, const VectorField& w);

} // namespace mfg
