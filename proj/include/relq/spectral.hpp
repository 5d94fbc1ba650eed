#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "relq/mdp.hpp"
#include "relq/solvers.hpp"
#include "relq/step_size.hpp"

namespace relq {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

enum class LinearizationKind {
  watkins_unscaled,   // -Pi [I - gamma P S]
  watkins_uniform,    // -[I - gamma P S]
  relative,           // -[I - gamma P S + delta 1 mu^T]
  relative_unscaled,  // -Pi [I - gamma P S + delta 1 mu^T]
};

const char* to_string(LinearizationKind k);

struct LinearizationMatrix {
  Matrix a;
  Vector b;
  LinearizationKind kind = LinearizationKind::watkins_uniform;
  // Smallest per-state gap between best and second best action, when Q* was given.
  double min_margin = 0.0;
  bool unique_policy = true;
  std::vector<std::string> warnings;
};

struct LinearizationInputs {
  std::optional<RelativeQSpec> spec;
  // Stationary pmf of the behavior pair chain; needed by the unscaled kinds.
  std::optional<Vector> pi;
  // Used only for the uniqueness check on the optimal policy.
  std::optional<Vector> q_star;
};

inline constexpr double kMarginTol = 1e-9;

LinearizationMatrix linearization(const MdpModel& mdp, const DeterministicPolicy& optimal,
                                  LinearizationKind kind, const LinearizationInputs& in = {});

struct SpectralSummary {
  std::vector<Complex> eigenvalues;
  // Column k is a unit-norm left eigenvector for eigenvalues[k].
  CMatrix left_eigenvectors;
  int unit_index = 0;
  double rho = 0.0;
  double rho_star = 0.0;
  bool unichain = true;
  double eigenvector_condition = 1.0;
};

SpectralSummary spectral_summary(const Matrix& pair_matrix);

// Eigenvalues with unit-norm left eigenvectors (v^H A = lambda v^H).
struct EigenSystem {
  std::vector<Complex> values;
  CMatrix left;   // columns
  CMatrix right;  // columns
  double condition = 1.0;
};

EigenSystem eigen_system(const Matrix& a);

// Diagonal of the synchronous noise covariance,
// gamma^2 Var(V(X') | x, u) with V(x) = table(x, policy(x)).
struct NoiseCovariance {
  Vector diagonal;
  // Pi * Sigma, the covariance seen by asynchronous learning with a global step.
  std::optional<Vector> scaled_variant;
};

NoiseCovariance noise_covariance(const MdpModel& mdp, const Vector& table,
                                 const DeterministicPolicy& policy,
                                 const std::optional<Vector>& pi = std::nullopt);

enum class NoiseModel { synchronous, async_per_pair, async_global };
const char* to_string(NoiseModel m);

// Diagonal matrix entering the Lyapunov equation for the given sampling pattern:
// Sigma_s, Sigma_s Pi^{-1}, or Pi Sigma_s.
Matrix effective_noise(const NoiseCovariance& noise, NoiseModel model, const Vector& pi);

struct OptimalGains {
  double g_q = 1.0;
  double g_h = 1.0;
  // max Re of eigenvalues of g_q A_q and g_h A_h, when the matrices were supplied.
  std::optional<double> max_re_q;
  std::optional<double> max_re_h;
};

OptimalGains optimal_gains(const SpectralSummary& summary, double gamma);
OptimalGains optimal_gains(const SpectralSummary& summary, double gamma, const Matrix& a_q,
                           const Matrix& a_h);

// Eigenvalues with each cluster (single linkage, radius scaled by |A|_inf)
// replaced by its mean. Defective eigenvalues come back spread by about
// sqrt(eps); the cluster mean is accurate to rounding.
std::vector<Complex> clustered_eigenvalues(const Matrix& a, double radius = 1e-6);
double max_real_eigenvalue(const Matrix& a);

struct EffectiveDynamics {
  LinearizationKind kind;
  NoiseModel noise;
  double g;
};

EffectiveDynamics effective_dynamics(Algorithm algorithm, const StepSizeRule& rule);

struct ConditionChecks {
  bool q1 = false;
  double min_pi = 0.0;
  bool q2 = false;
  double min_margin = 0.0;
  bool q3 = false;
  bool hvar = false;
  double hvar_value = 0.0;
  bool disc_cond = false;
  double disc_value = 0.0;
  bool delta_condition = true;
  double delta_threshold = 0.0;
};

struct ConvergenceDiagnosis {
  double predicted_rate_exponent = 0.0;
  double varrho0 = 0.0;
  bool finite_covariance = false;
  double max_re_ga = 0.0;
  ConditionChecks conditions;
  EffectiveDynamics dynamics{};
  // Left eigenvector of gA for the eigenvalue with largest real part.
  CVector slow_eigenvector;
  std::vector<std::string> warnings;
};

ConvergenceDiagnosis diagnose(const MdpModel& mdp, const RandomizedPolicy& behavior,
                              Algorithm algorithm, const StepSizeRule& rule,
                              const std::optional<RelativeQSpec>& spec = std::nullopt,
                              double tol = kDefaultTol);

// ceil(z^2 sigma^2 / eps^2), z the upper delta_prob/2 normal quantile.
long clt_sample_size(double epsilon, double delta_prob, double sigma2_component);

}  // namespace relq
