#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relq/spectral.hpp"

namespace relq {

enum class LyapunovMethod { automatic, kronecker, schur };

struct LyapunovOptions {
  LyapunovMethod method = LyapunovMethod::automatic;
  // automatic switches from the Kronecker system to Bartels-Stewart above this size.
  int kronecker_max_dim = 30;
  int max_dim = 200;
  bool allow_large = false;
};

struct LyapunovResult {
  Matrix x;
  double residual = 0.0;           // sup-norm
  double relative_residual = 0.0;  // residual / (2 |F| |X| + |Q|)
  std::string method;
};

// Solves F X + X F^T + Q = 0 for X.
LyapunovResult solve_lyapunov(const Matrix& f, const Matrix& q, const LyapunovOptions& options = {});

enum class Verdict { finite, infinite, degenerate };
const char* to_string(Verdict v);

inline constexpr double kNoiseFloor = 1e-12;

struct AsymptoticCovariance {
  Verdict verdict = Verdict::degenerate;
  double gain = 1.0;
  Matrix sigma;  // set when finite
  double residual = 0.0;
  double relative_residual = 0.0;
  std::string method;
  double max_re = 0.0;  // largest real part over eigenvalues of gA
  // Witness for the infinite verdict: eigenvalue of gA and unit left eigenvector.
  Complex witness_lambda{0.0, 0.0};
  CVector witness_vector;
  double witness_noise = 0.0;  // |Sigma_Delta nu|
  std::string reason;
  // gA + I/2 and g^2 Sigma_Delta, kept for the integral representation.
  Matrix f;
  Matrix scaled_noise;

  bool finite() const { return verdict == Verdict::finite; }
  double trace() const;
};

AsymptoticCovariance asymptotic_covariance(const Matrix& a, const Matrix& sigma_delta, double g,
                                           const LyapunovOptions& options = {});

inline constexpr double kDiagonalizableCond = 1e8;

// Closed-form variances on the eigenvectors of A_q and A_h.
struct EigenspaceVariances {
  bool available = false;
  std::string reason;
  double condition_q = 0.0;
  double condition_h = 0.0;
  double g_q = 1.0;
  double g_h = 1.0;

  std::vector<Complex> lambda_q;
  std::vector<Complex> lambda_h;
  CMatrix nu_q;  // unit left eigenvectors, columns
  CMatrix nu_h;
  // Eigen-index with the largest real part, and index of the eigenvalue whose
  // right eigenvector is the constant vector.
  int q_slow = 0, q_one = 0, h_slow = 0, h_one = 0;

  double sigma2_delta_q11 = 0.0, sigma2_delta_h11 = 0.0;
  double sigma2_delta_q_one = 0.0, sigma2_delta_h_one = 0.0;
  double sigma2_q11 = 0.0, sigma2_h11 = 0.0;
  double sigma2_q_one = 0.0, sigma2_h_one = 0.0;

  // sigma^2(i,j) = g^2 nu_i^H Sigma_Delta nu_j / (-1 - g (lambda_i + conj lambda_j)),
  // +inf (real part) where the denominator has non-positive real part.
  CMatrix table_q;
  CMatrix table_h;

  bool cross_checked = false;
  // Max over checked entries of |closed - Lyapunov| / sqrt(sigma2_ii sigma2_jj).
  double cross_check_error = 0.0;
  int cross_check_entries = 0;
};

EigenspaceVariances eigenspace_variances(const Matrix& a_q, const Matrix& a_h, const Matrix& sigma_delta,
                                         double g_q, double g_h, const LyapunovOptions& options = {});
inline EigenspaceVariances eigenspace_variances(const Matrix& a_q, const Matrix& a_h, const Matrix& sigma_delta,
                                                double g, const LyapunovOptions& options = {}) {
  return eigenspace_variances(a_q, a_h, sigma_delta, g, g, options);
}

// Orthonormal basis of the zero-sum subspace, as columns (d x (d-1)).
Matrix zero_sum_basis(int d);

struct SolidarityResult {
  double max_discrepancy = 0.0;
  std::string method;  // "lyapunov" or "integral"
  Matrix q_block;      // B^T Sigma_q B
  Matrix h_block;
  int panels = 0;
};

// Compares B^T Sigma_q B and B^T Sigma_h B on a basis B of zero-sum vectors.
// When either side is infinite, both are evaluated with the integral
// representation g^2 int v^T e^{tF} Sigma_Delta e^{tF^T} w dt.
SolidarityResult subspace_solidarity_check(const AsymptoticCovariance& sigma_q, const AsymptoticCovariance& sigma_h,
                                           const Matrix& basis);

// The integral above for one covariance; rows of the propagated basis are kept
// in the zero-sum subspace at every panel.
Matrix zero_sum_integral(const Matrix& f, const Matrix& scaled_noise, const Matrix& basis, int* panels = nullptr);

}  // namespace relq
