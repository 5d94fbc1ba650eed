#include "relq/covariance.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "relq/error.hpp"

namespace relq {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::finite: return "finite";
    case Verdict::infinite: return "infinite";
    case Verdict::degenerate: return "degenerate";
  }
  return "?";
}

double AsymptoticCovariance::trace() const {
  return finite() ? sigma.trace() : std::numeric_limits<double>::infinity();
}

AsymptoticCovariance asymptotic_covariance(const Matrix& a, const Matrix& sigma_delta, double g,
                                           const LyapunovOptions& options) {
  if (!(g > 0.0) || !std::isfinite(g)) throw ValidationError("gain", "gain g must be positive");
  const Eigen::Index d = a.rows();
  if (a.cols() != d || sigma_delta.rows() != d || sigma_delta.cols() != d)
    throw ValidationError("dimension", "A and Sigma_Delta must be square and of equal size");

  AsymptoticCovariance out;
  out.gain = g;
  out.f = g * a + 0.5 * Matrix::Identity(d, d);
  out.scaled_noise = g * g * sigma_delta;

  const EigenSystem es = eigen_system(g * a);
  out.max_re = -std::numeric_limits<double>::infinity();
  for (const Complex& l : es.values) out.max_re = std::max(out.max_re, l.real());

  // Violating eigenvalues, largest real part first; the witness is the first
  // with noise along its left eigenvector.
  std::vector<int> bad;
  for (std::size_t k = 0; k < es.values.size(); ++k)
    if (es.values[k].real() >= -0.5 - 1e-12) bad.push_back(static_cast<int>(k));
  if (bad.empty()) {
    const LyapunovResult lr = solve_lyapunov(out.f, out.scaled_noise, options);
    out.verdict = Verdict::finite;
    out.sigma = lr.x;
    out.residual = lr.residual;
    out.relative_residual = lr.relative_residual;
    out.method = lr.method;
    return out;
  }
  std::sort(bad.begin(), bad.end(), [&](int i, int j) { return es.values[i].real() > es.values[j].real(); });
  const CMatrix noise = sigma_delta.cast<Complex>();
  for (int k : bad) {
    const CVector nu = es.left.col(k);
    const double w = (noise * nu).norm();
    if (w > kNoiseFloor) {
      out.verdict = Verdict::infinite;
      out.witness_lambda = es.values[k];
      out.witness_vector = nu;
      out.witness_noise = w;
      std::ostringstream os;
      os << "eigenvalue " << es.values[k].real() << (es.values[k].imag() >= 0 ? "+" : "") << es.values[k].imag()
         << "i of gA has real part >= -1/2 and |Sigma_Delta nu| = " << w;
      out.reason = os.str();
      return out;
    }
  }
  out.verdict = Verdict::degenerate;
  out.witness_lambda = es.values[bad.front()];
  out.witness_vector = es.left.col(bad.front());
  out.witness_noise = (noise * out.witness_vector).norm();
  std::ostringstream os;
  os << bad.size() << " eigenvalue(s) of gA have real part >= -1/2 but the noise vanishes along their "
     << "left eigenvectors (|Sigma_Delta nu| <= " << kNoiseFloor << ")";
  out.reason = os.str();
  return out;
}

namespace {

int closest_index(const std::vector<Complex>& values, Complex target) {
  int best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (std::abs(values[k] - target) < std::abs(values[best] - target)) best = static_cast<int>(k);
  return best;
}

int slowest_index(const std::vector<Complex>& values) {
  int best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k].real() > values[best].real()) best = static_cast<int>(k);
  return best;
}

CMatrix closed_form_table(const std::vector<Complex>& lambda, const CMatrix& nu, const Matrix& sigma_delta, double g) {
  const Eigen::Index d = nu.cols();
  const CMatrix sd = nu.adjoint() * sigma_delta.cast<Complex>() * nu;
  CMatrix t(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const Complex den = -1.0 - g * (lambda[i] + std::conj(lambda[j]));
      if (den.real() <= 0.0)
        t(i, j) = Complex(std::numeric_limits<double>::infinity(), 0.0);
      else
        t(i, j) = g * g * sd(i, j) / den;
    }
  return t;
}

// Compares finite table entries with nu^H Sigma nu; returns (max error, count).
std::pair<double, int> compare_table(const CMatrix& table, const CMatrix& nu, const Matrix& sigma,
                                     const std::vector<bool>& use) {
  const CMatrix proj = nu.adjoint() * sigma.cast<Complex>() * nu;
  double worst = 0.0;
  int count = 0;
  const Eigen::Index d = table.rows();
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!use[i] || !use[j]) continue;
      if (!std::isfinite(table(i, j).real()) || !std::isfinite(table(i, i).real()) ||
          !std::isfinite(table(j, j).real()))
        continue;
      const double scale = std::sqrt(std::abs(table(i, i).real() * table(j, j).real()));
      const double err = std::abs(table(i, j) - proj(i, j));
      worst = std::max(worst, scale > 0.0 ? err / scale : err);
      ++count;
    }
  return {worst, count};
}

}  // namespace

EigenspaceVariances eigenspace_variances(const Matrix& a_q, const Matrix& a_h, const Matrix& sigma_delta, double g_q,
                                         double g_h, const LyapunovOptions& options) {
  const Eigen::Index d = a_q.rows();
  if (a_h.rows() != d || sigma_delta.rows() != d) throw ValidationError("dimension", "matrix sizes differ");
  EigenspaceVariances out;
  out.g_q = g_q;
  out.g_h = g_h;
  const EigenSystem eq = eigen_system(a_q);
  const EigenSystem eh = eigen_system(a_h);
  out.condition_q = eq.condition;
  out.condition_h = eh.condition;
  out.lambda_q = eq.values;
  out.lambda_h = eh.values;
  out.nu_q = eq.left;
  out.nu_h = eh.left;
  const Vector ones = Vector::Ones(d);
  out.q_slow = slowest_index(eq.values);
  out.h_slow = slowest_index(eh.values);
  out.q_one = closest_index(eq.values, Complex((a_q * ones).mean(), 0.0));
  out.h_one = closest_index(eh.values, Complex((a_h * ones).mean(), 0.0));

  auto noise_on = [&](const CVector& v) { return (v.adjoint() * sigma_delta.cast<Complex>() * v)(0, 0).real(); };
  out.sigma2_delta_q11 = noise_on(eq.left.col(out.q_slow));
  out.sigma2_delta_h11 = noise_on(eh.left.col(out.h_slow));
  out.sigma2_delta_q_one = noise_on(eq.left.col(out.q_one));
  out.sigma2_delta_h_one = noise_on(eh.left.col(out.h_one));

  const AsymptoticCovariance sq = asymptotic_covariance(a_q, sigma_delta, g_q, options);
  const AsymptoticCovariance sh = asymptotic_covariance(a_h, sigma_delta, g_h, options);

  out.available = eq.condition < kDiagonalizableCond && eh.condition < kDiagonalizableCond;
  if (!out.available) {
    std::ostringstream os;
    os << "closed form unavailable: eigenvector condition numbers " << eq.condition << " (A_q), " << eh.condition
       << " (A_h)";
    out.reason = os.str();
    auto proj = [](const AsymptoticCovariance& s, const CVector& v) {
      return s.finite() ? (v.adjoint() * s.sigma.cast<Complex>() * v)(0, 0).real()
                        : std::numeric_limits<double>::infinity();
    };
    out.sigma2_q11 = proj(sq, eq.left.col(out.q_slow));
    out.sigma2_q_one = proj(sq, eq.left.col(out.q_one));
    out.sigma2_h11 = proj(sh, eh.left.col(out.h_slow));
    out.sigma2_h_one = proj(sh, eh.left.col(out.h_one));
    return out;
  }

  out.table_q = closed_form_table(eq.values, eq.left, sigma_delta, g_q);
  out.table_h = closed_form_table(eh.values, eh.left, sigma_delta, g_h);
  out.sigma2_q11 = out.table_q(out.q_slow, out.q_slow).real();
  out.sigma2_q_one = out.table_q(out.q_one, out.q_one).real();
  out.sigma2_h11 = out.table_h(out.h_slow, out.h_slow).real();
  out.sigma2_h_one = out.table_h(out.h_one, out.h_one).real();

  std::vector<bool> all(static_cast<std::size_t>(d), true);
  if (sh.finite()) {
    auto [e, n] = compare_table(out.table_h, eh.left, sh.sigma, all);
    out.cross_check_error = std::max(out.cross_check_error, e);
    out.cross_check_entries += n;
  }
  if (sq.finite()) {
    auto [e, n] = compare_table(out.table_q, eq.left, sq.sigma, all);
    out.cross_check_error = std::max(out.cross_check_error, e);
    out.cross_check_entries += n;
  } else {
    // Away from the constant direction A_q and A_h share left eigenvectors,
    // so the finite part of table_q is checked against Sigma_h at gain g_q.
    const AsymptoticCovariance sh_q = asymptotic_covariance(a_h, sigma_delta, g_q, options);
    if (sh_q.finite()) {
      std::vector<bool> use = all;
      use[out.q_one] = false;
      auto [e, n] = compare_table(out.table_q, eq.left, sh_q.sigma, use);
      out.cross_check_error = std::max(out.cross_check_error, e);
      out.cross_check_entries += n;
    }
  }
  out.cross_checked = out.cross_check_entries > 0;
  return out;
}

Matrix zero_sum_basis(int d) {
  if (d < 2) throw ValidationError("dimension", "zero-sum subspace needs d >= 2");
  // Helmert contrasts.
  Matrix b = Matrix::Zero(d, d - 1);
  for (int k = 1; k < d; ++k) {
    const double s = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (int i = 0; i < k; ++i) b(i, k - 1) = s;
    b(k, k - 1) = -k * s;
  }
  return b;
}

Matrix zero_sum_integral(const Matrix& f, const Matrix& scaled_noise, const Matrix& basis, int* panels) {
  using Rule = boost::math::quadrature::gauss<double, 20>;
  const Eigen::Index d = f.rows();
  const Matrix proj = Matrix::Identity(d, d) - Matrix::Constant(d, d, 1.0 / static_cast<double>(d));

  // Nodes and weights on [0, 1].
  std::vector<double> nodes, weights;
  const auto& ab = Rule::abscissa();
  const auto& wt = Rule::weights();
  for (std::size_t k = 0; k < ab.size(); ++k) {
    if (ab[k] == 0.0) {
      nodes.push_back(0.5);
      weights.push_back(0.5 * wt[k]);
      continue;
    }
    nodes.push_back(0.5 * (1.0 - ab[k]));
    weights.push_back(0.5 * wt[k]);
    nodes.push_back(0.5 * (1.0 + ab[k]));
    weights.push_back(0.5 * wt[k]);
  }

  const Eigen::VectorXcd ev = f.eigenvalues();
  double radius = 0.0, max_re = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    radius = std::max(radius, std::abs(ev(k)));
    max_re = std::max(max_re, ev(k).real());
  }
  double h = 0.05 / std::max(radius, 1e-3);
  const double growth = 1.5;
  // The unstable constant direction is projected out after each panel; keep
  // its growth within a panel well inside double range.
  const double h_cap = max_re > 0.0 ? 20.0 / max_re : std::numeric_limits<double>::infinity();

  Matrix z = basis.transpose() * proj;  // rows are v^T e^{tF}
  const double z0 = z.norm();
  Matrix total = Matrix::Zero(basis.cols(), basis.cols());
  int k = 0;
  for (; k < 5000; ++k) {
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const Matrix e = (f * (nodes[j] * h)).exp();
      const Matrix zj = z * e * proj;
      total += (weights[j] * h) * (zj * scaled_noise * zj.transpose());
    }
    z = (z * (f * h).exp() * proj).eval();
    h = std::min(h * growth, h_cap);
    if (z.norm() <= 1e-10 * std::max(z0, 1e-300)) break;
    if (!z.allFinite()) throw NumericalError("integral representation diverged on the zero-sum subspace");
  }
  if (k == 5000) throw NumericalError("integral representation did not decay on the zero-sum subspace");
  if (panels) *panels = k + 1;
  return 0.5 * (total + total.transpose());
}

SolidarityResult subspace_solidarity_check(const AsymptoticCovariance& sq, const AsymptoticCovariance& sh,
                                           const Matrix& basis) {
  if (std::abs(sq.gain - sh.gain) > 1e-12 * std::max(1.0, std::abs(sq.gain)))
    throw ValidationError("gain", "solidarity check needs both covariances at the same gain");
  const Eigen::Index d = sq.f.rows();
  if (basis.rows() != d) throw ValidationError("dimension", "basis has the wrong number of rows");
  for (Eigen::Index k = 0; k < basis.cols(); ++k)
    if (std::abs(basis.col(k).sum()) > 1e-12 * std::max(1.0, basis.col(k).norm()))
      throw ValidationError("basis", "basis vectors must sum to zero");

  SolidarityResult out;
  if (sq.finite() && sh.finite()) {
    out.method = "lyapunov";
    out.q_block = basis.transpose() * sq.sigma * basis;
    out.h_block = basis.transpose() * sh.sigma * basis;
  } else {
    out.method = "integral";
    int pq = 0, ph = 0;
    out.q_block = zero_sum_integral(sq.f, sq.scaled_noise, basis, &pq);
    out.h_block = zero_sum_integral(sh.f, sh.scaled_noise, basis, &ph);
    out.panels = std::max(pq, ph);
  }
  out.max_discrepancy = (out.q_block - out.h_block).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace relq
