#pragma once

#include "mfg/discretization.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mfg {

enum class CouplingKind { zero, local_primitive, gradient_dependent, nonlocal_convolution, multipop_potential };

std::string to_string(CouplingKind k);
CouplingKind coupling_kind_from_string(const std::string& s);

/// Local law f(x, z) = sign |z|^r (pow) or slope z (linear), plus V(x).
struct LocalLaw
{
  enum class Form { none, linear, pow };
  Form form = Form::none;
  double r = 1.0;
  double sign = 1.0;
  double slope = 1.0;
  CoeffExpr offset;

  double f(double z, double v) const;
  /// d f / d z.
  double df(double z) const;
  /// int_0^z f(x, z') dz' at a point where V(x) = v.
  double primitive(double z, double v) const;
  bool nondecreasing() const;
};

struct CouplingSpec
{
  CouplingKind kind = CouplingKind::zero;
  LocalLaw law;

  double dirichlet_weight = 0.0;  // gradient_dependent: (mu/2) |grad m|^2

  // nonlocal_convolution: (mu0/2)(rho*m)^2 + (mu1/2)|rho*grad m|^2 on Omega_eps
  double kernel_radius = 0.1;
  double kernel_shift_x = 0.0;
  double kernel_shift_y = 0.0;
  double nonlocal_weight = 1.0;
  double nonlocal_grad_weight = 0.0;

  // multipop_potential: f^i(x, zeta) = sum_j matrix[i][j] zeta_j + offsets[i](x)
  std::vector<std::vector<double>> matrix;
  std::vector<CoeffExpr> offsets;

  double lipschitz_hint = 0.0;  // 0: derive from the coupling
};

/**
 * Discrete coupling functional F_h on nodal densities. derivative() returns
 * the representer g of the Gateaux derivative in the lumped inner product,
 * <g, z>_omega = d/dt F_h(m + t z) at t = 0.
 */
class Coupling
{
public:
  virtual ~Coupling() = default;

  virtual double value(const Field& m) const = 0;
  virtual Field derivative(const Field& m) const = 0;
  /// Jacobian of derivative() at m.
  virtual SpMat jacobian(const Field& m) const = 0;
  /// Estimate of the derivative's Lipschitz constant near m (lumped norm).
  virtual double lipschitz(const Field& m) const = 0;
  /// C_F with F_h(m) >= C_F for every m >= 0, when one exists and is known.
  virtual std::optional<double> lower_bound() const = 0;
  virtual bool convex() const = 0;
  /// False when the integrand is not convex in the gradient slot.
  virtual bool hypotheses_verified() const { return true; }
  virtual CouplingKind kind() const = 0;
};

using CouplingPtr = std::shared_ptr<const Coupling>;

CouplingPtr make_coupling(const CouplingSpec& spec, OperatorPtr op);

/// Local law with a node-dependent additive offset, used to freeze the other
/// populations in a best-response step.
CouplingPtr make_local_coupling(const LocalLaw& law, Field offset, OperatorPtr op);

double coupling_value(const Coupling& c, const Field& m);
Field coupling_derivative(const Coupling& c, const Field& m);

struct AdmissibilityReport
{
  double min_primitive = 0.0;   // over nodes and z in [0,R]
  double max_abs_f = 0.0;       // over nodes and z in [0,R]
  bool monotone = true;         // z -> f(x,z) non-decreasing
  bool global_lower_bound = true;
  bool convex_in_gradient = true;
  std::string note;
};

AdmissibilityReport check_admissibility(const CouplingSpec& spec, const ConstraintOperator& op, double R);

/**
 * Joint coupling over N populations. For N = 1 it wraps a Coupling; for the
 * potential family F(x, zeta) = zeta^T Q zeta / 2 + sum_i V_i zeta_i.
 */
class JointCoupling
{
public:
  virtual ~JointCoupling() = default;
  virtual int populations() const = 0;
  virtual double value(const std::vector<Field>& m) const = 0;
  virtual std::vector<Field> derivative(const std::vector<Field>& m) const = 0;
  /// Jacobian of the stacked derivative, population-major blocks.
  virtual SpMat jacobian(const std::vector<Field>& m) const = 0;
  virtual double lipschitz(const std::vector<Field>& m) const = 0;
  virtual bool convex() const = 0;
};

using JointCouplingPtr = std::shared_ptr<const JointCoupling>;

JointCouplingPtr make_joint(CouplingPtr single);
JointCouplingPtr make_quadratic_potential(const CouplingSpec& spec, OperatorPtr op);

/// Frozen coupling seen by population i when the others are held at m.
CouplingPtr freeze_population(const CouplingSpec& spec, OperatorPtr op, const std::vector<Field>& m, int i);

/// max |d/dz_i F - f^i| over sampled (x, zeta) by centred differences.
double potential_mismatch(const CouplingSpec& spec, const ConstraintOperator& op, std::uint64_t seed = 11);

} // namespace mfg
