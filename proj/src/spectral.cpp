#include "relq/spectral.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "relq/error.hpp"

namespace relq {

void StepSizeRule::validate() const {
  if (!(g > 0.0) || !std::isfinite(g)) throw ValidationError("step", "step gain g must be positive");
  if (!(shift >= 0.0) || !std::isfinite(shift))
    throw ValidationError("step", "step shift must be non-negative");
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::watkins_async: return "watkins_async";
    case Algorithm::watkins_sync: return "watkins_sync";
    case Algorithm::relative_async: return "relative_async";
  }
  return "?";
}

const char* to_string(StepSizeRule::Kind k) {
  switch (k) {
    case StepSizeRule::Kind::global_over_n: return "global_over_n";
    case StepSizeRule::Kind::per_pair_count: return "per_pair_count";
    case StepSizeRule::Kind::shifted_global: return "shifted_global";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "watkins_async" || s == "watkins") return Algorithm::watkins_async;
  if (s == "watkins_sync" || s == "sync") return Algorithm::watkins_sync;
  if (s == "relative_async" || s == "relative") return Algorithm::relative_async;
  throw ValidationError("algorithm", "unknown algorithm '" + s + "'");
}

StepSizeRule::Kind parse_step_kind(const std::string& s) {
  if (s == "global_over_n" || s == "global") return StepSizeRule::Kind::global_over_n;
  if (s == "per_pair_count" || s == "per_pair") return StepSizeRule::Kind::per_pair_count;
  if (s == "shifted_global" || s == "shifted") return StepSizeRule::Kind::shifted_global;
  throw ValidationError("step", "unknown step rule '" + s + "'");
}

const char* to_string(LinearizationKind k) {
  switch (k) {
    case LinearizationKind::watkins_unscaled: return "watkins_unscaled";
    case LinearizationKind::watkins_uniform: return "watkins_uniform";
    case LinearizationKind::relative: return "relative";
    case LinearizationKind::relative_unscaled: return "relative_unscaled";
  }
  return "?";
}

const char* to_string(NoiseModel m) {
  switch (m) {
    case NoiseModel::synchronous: return "synchronous";
    case NoiseModel::async_per_pair: return "async_per_pair";
    case NoiseModel::async_global: return "async_global";
  }
  return "?";
}

LinearizationMatrix linearization(const MdpModel& mdp, const DeterministicPolicy& optimal,
                                  LinearizationKind kind, const LinearizationInputs& in) {
  validate_policy(mdp, optimal);
  const int d = mdp.dim();
  const double gamma = mdp.discount();
  const Matrix ps = pair_transition_matrix(mdp, optimal);
  const bool relative = kind == LinearizationKind::relative || kind == LinearizationKind::relative_unscaled;
  const bool unscaled = kind == LinearizationKind::watkins_unscaled || kind == LinearizationKind::relative_unscaled;

  LinearizationMatrix out;
  out.kind = kind;
  Matrix core = Matrix::Identity(d, d) - gamma * ps;
  if (relative) {
    if (!in.spec) throw ValidationError("spec", "relative linearization needs mu and delta");
    in.spec->validate(d, false);
    core += in.spec->delta * Vector::Ones(d) * in.spec->mu.transpose();
  }
  const Vector c = mdp.cost_vector();
  if (unscaled) {
    if (!in.pi || in.pi->size() != d)
      throw ValidationError("pi", "unscaled linearization needs the stationary pmf of the behavior chain");
    out.a = -(in.pi->asDiagonal() * core);
    out.b = -(in.pi->array() * c.array()).matrix();
  } else {
    out.a = -core;
    out.b = -c;
  }

  if (in.q_star) {
    const Vector m = action_margins(*in.q_star, mdp.num_actions());
    out.min_margin = m.minCoeff();
    if (greedy_policy(*in.q_star, mdp.num_actions()).action_of != optimal.action_of)
      out.warnings.push_back("supplied policy is not greedy for the supplied Q*");
    if (out.min_margin < kMarginTol) {
      out.unique_policy = false;
      std::ostringstream os;
      os << "(Q2) optimal policy not unique: action margin " << out.min_margin << " below " << kMarginTol;
      out.warnings.push_back(os.str());
    }
  }
  return out;
}

namespace {

// Pairs each target with the nearest unused candidate.
std::vector<int> greedy_match(const std::vector<Complex>& target, const Eigen::VectorXcd& cand) {
  std::vector<int> match(target.size(), -1);
  std::vector<bool> used(static_cast<std::size_t>(cand.size()), false);
  for (std::size_t k = 0; k < target.size(); ++k) {
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (Eigen::Index j = 0; j < cand.size(); ++j) {
      if (used[j]) continue;
      const double dist = std::abs(cand(j) - target[k]);
      if (dist < best) {
        best = dist;
        arg = static_cast<int>(j);
      }
    }
    match[k] = arg;
    used[arg] = true;
  }
  return match;
}

}  // namespace

EigenSystem eigen_system(const Matrix& a) {
  const Eigen::Index d = a.rows();
  Eigen::EigenSolver<Matrix> right(a, true);
  if (right.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed");
  Eigen::EigenSolver<Matrix> left(a.transpose(), true);
  if (left.info() != Eigen::Success) throw NumericalError("eigen-decomposition of the transpose failed");

  EigenSystem out;
  out.values.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) out.values[k] = right.eigenvalues()(k);
  out.right = right.eigenvectors();
  for (Eigen::Index k = 0; k < d; ++k) out.right.col(k).normalize();

  const std::vector<int> match = greedy_match(out.values, left.eigenvalues());
  out.left.resize(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    // A^T y = mu y gives y^T A = mu y^T, so v = conj(y) satisfies v^H A = mu v^H.
    CVector v = left.eigenvectors().col(match[k]).conjugate();
    out.left.col(k) = v / v.norm();
  }
  Eigen::JacobiSVD<CMatrix> svd(out.right);
  const auto& sv = svd.singularValues();
  out.condition = sv(d - 1) > 0.0 ? sv(0) / sv(d - 1) : std::numeric_limits<double>::infinity();
  return out;
}

SpectralSummary spectral_summary(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ValidationError("pair", "spectral_summary needs a square matrix");
  if (!m.allFinite()) throw NumericalError("matrix has non-finite entries");
  const EigenSystem es = eigen_system(m);
  SpectralSummary s;
  s.eigenvalues = es.values;
  s.left_eigenvectors = es.left;
  s.eigenvector_condition = es.condition;
  const int d = static_cast<int>(m.rows());
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < d; ++k) {
    const double dist = std::abs(es.values[k] - 1.0);
    if (dist < best) {
      best = dist;
      s.unit_index = k;
    }
  }
  s.rho = 0.0;
  s.rho_star = d > 1 ? -std::numeric_limits<double>::infinity() : 0.0;
  for (int k = 0; k < d; ++k) {
    if (k == s.unit_index) continue;
    if (std::abs(es.values[k] - 1.0) < 1e-9) s.unichain = false;
    s.rho = std::max(s.rho, std::abs(es.values[k]));
    s.rho_star = std::max(s.rho_star, es.values[k].real());
  }
  return s;
}

NoiseCovariance noise_covariance(const MdpModel& mdp, const Vector& table, const DeterministicPolicy& policy,
                                 const std::optional<Vector>& pi) {
  validate_policy(mdp, policy);
  if (table.size() != mdp.dim()) throw ValidationError("pair", "table length does not match the MDP");
  const int ns = mdp.num_states();
  Vector v(ns);
  for (int x = 0; x < ns; ++x) v(x) = table(mdp.pair(x, policy.action_of[x]));
  const double g2 = mdp.discount() * mdp.discount();
  NoiseCovariance out;
  out.diagonal.resize(mdp.dim());
  for (int x = 0; x < ns; ++x) {
    for (int u = 0; u < mdp.num_actions(); ++u) {
      const auto row = mdp.transition(u).row(x);
      const double mean = row.dot(v);
      double var = 0.0;
      for (int y = 0; y < ns; ++y) {
        const double dev = v(y) - mean;
        var += row(y) * dev * dev;
      }
      out.diagonal(mdp.pair(x, u)) = g2 * var;
    }
  }
  if (pi) {
    if (pi->size() != mdp.dim()) throw ValidationError("pi", "pi length does not match the MDP");
    out.scaled_variant = (pi->array() * out.diagonal.array()).matrix();
  }
  return out;
}

Matrix effective_noise(const NoiseCovariance& noise, NoiseModel model, const Vector& pi) {
  switch (model) {
    case NoiseModel::synchronous:
      return noise.diagonal.asDiagonal();
    case NoiseModel::async_per_pair: {
      if (pi.size() != noise.diagonal.size()) throw ValidationError("pi", "pi length mismatch");
      if ((pi.array() <= kPositivityFloor).any())
        throw ValidationError("pi", "per-pair noise needs a strictly positive stationary pmf");
      return (noise.diagonal.array() / pi.array()).matrix().asDiagonal();
    }
    case NoiseModel::async_global: {
      if (pi.size() != noise.diagonal.size()) throw ValidationError("pi", "pi length mismatch");
      return (noise.diagonal.array() * pi.array()).matrix().asDiagonal();
    }
  }
  throw Error(ErrorCategory::internal, "unknown noise model");
}

std::vector<Complex> clustered_eigenvalues(const Matrix& a, double radius) {
  const Eigen::VectorXcd ev = a.eigenvalues();
  const int n = static_cast<int>(ev.size());
  const double scale = std::max(1.0, a.cwiseAbs().rowwise().sum().maxCoeff());
  const double r = radius * scale;
  std::vector<int> root(n);
  for (int k = 0; k < n; ++k) root[k] = k;
  auto find = [&](int k) {
    while (root[k] != k) k = root[k] = root[root[k]];
    return k;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(ev(i) - ev(j)) <= r) root[find(i)] = find(j);
  std::vector<Complex> sum(n, Complex(0.0));
  std::vector<int> count(n, 0);
  for (int k = 0; k < n; ++k) {
    sum[find(k)] += ev(k);
    ++count[find(k)];
  }
  std::vector<Complex> out(n);
  for (int k = 0; k < n; ++k) out[k] = sum[find(k)] / static_cast<double>(count[find(k)]);
  return out;
}

double max_real_eigenvalue(const Matrix& a) {
  double m = -std::numeric_limits<double>::infinity();
  for (Complex z : clustered_eigenvalues(a)) m = std::max(m, z.real());
  return m;
}

OptimalGains optimal_gains(const SpectralSummary& summary, double gamma) {
  OptimalGains g;
  g.g_q = 1.0 / (1.0 - gamma);
  g.g_h = 1.0 / (1.0 - gamma * summary.rho_star);
  return g;
}

OptimalGains optimal_gains(const SpectralSummary& summary, double gamma, const Matrix& a_q, const Matrix& a_h) {
  OptimalGains g = optimal_gains(summary, gamma);
  g.max_re_q = g.g_q * max_real_eigenvalue(a_q);
  g.max_re_h = g.g_h * max_real_eigenvalue(a_h);
  return g;
}

EffectiveDynamics effective_dynamics(Algorithm algorithm, const StepSizeRule& rule) {
  const bool per_pair = rule.kind == StepSizeRule::Kind::per_pair_count;
  switch (algorithm) {
    case Algorithm::watkins_sync:
      return {LinearizationKind::watkins_uniform, NoiseModel::synchronous, rule.g};
    case Algorithm::watkins_async:
      return per_pair ? EffectiveDynamics{LinearizationKind::watkins_uniform, NoiseModel::async_per_pair, rule.g}
                      : EffectiveDynamics{LinearizationKind::watkins_unscaled, NoiseModel::async_global, rule.g};
    case Algorithm::relative_async:
      return per_pair ? EffectiveDynamics{LinearizationKind::relative, NoiseModel::async_per_pair, rule.g}
                      : EffectiveDynamics{LinearizationKind::relative_unscaled, NoiseModel::async_global, rule.g};
  }
  throw Error(ErrorCategory::internal, "unknown algorithm");
}

ConvergenceDiagnosis diagnose(const MdpModel& mdp, const RandomizedPolicy& behavior, Algorithm algorithm,
                              const StepSizeRule& rule, const std::optional<RelativeQSpec>& spec, double tol) {
  ConvergenceDiagnosis out;
  auto& cond = out.conditions;
  const int d = mdp.dim();
  const double gamma = mdp.discount();

  const QTable q = solve_q_star(mdp, tol);
  const DeterministicPolicy phi = greedy_policy(q.values, mdp.num_actions());
  cond.min_margin = action_margins(q.values, mdp.num_actions()).minCoeff();
  cond.q2 = cond.min_margin >= kMarginTol;
  if (!cond.q2) out.warnings.push_back("(Q2) optimal policy is not unique");

  std::optional<Vector> pi;
  try {
    const StationaryDistribution sd = stationary_distribution(pair_transition_matrix(mdp, behavior));
    pi = sd.pmf;
    cond.q1 = sd.positive;
    cond.min_pi = sd.pmf.minCoeff();
  } catch (const Error& e) {
    cond.q1 = false;
    out.warnings.push_back(std::string("(Q1) ") + e.what());
  }
  if (pi && !cond.q1) out.warnings.push_back("(Q1) stationary pmf of the behavior chain has a zero entry");

  const SpectralSummary ss = spectral_summary(pair_transition_matrix(mdp, phi));
  cond.q3 = ss.unichain;
  if (!cond.q3) out.warnings.push_back("(Q3) optimal pair chain is not unichain");

  if (pi) {
    // Conditional variance of V*(X') weighted by pi, without the gamma^2 factor.
    Vector v(mdp.num_states());
    for (int x = 0; x < mdp.num_states(); ++x) v(x) = q.values(mdp.pair(x, phi.action_of[x]));
    double hv = 0.0;
    for (int x = 0; x < mdp.num_states(); ++x)
      for (int u = 0; u < mdp.num_actions(); ++u) {
        const auto row = mdp.transition(u).row(x);
        const double mean = row.dot(v);
        for (int y = 0; y < mdp.num_states(); ++y) hv += (*pi)(mdp.pair(x, u)) * row(y) * (v(y) - mean) * (v(y) - mean);
      }
    cond.hvar_value = hv;
    cond.hvar = hv > 1e-12;
    cond.disc_value = (1.0 - gamma) * pi->maxCoeff();
    cond.disc_cond = cond.disc_value < 0.5;
  }

  out.dynamics = effective_dynamics(algorithm, rule);
  LinearizationInputs in;
  in.q_star = q.values;
  in.pi = pi;
  if (algorithm == Algorithm::relative_async) {
    RelativeQSpec s = spec ? *spec : RelativeQSpec::uniform(d, gamma);
    in.spec = s;
    cond.delta_threshold = gamma * (1.0 - ss.rho_star);
    cond.delta_condition = s.delta >= cond.delta_threshold;
    if (!cond.delta_condition) {
      std::ostringstream os;
      os << "delta " << s.delta << " below gamma(1 - rho*) = " << cond.delta_threshold
         << "; the relative eigenvalue test may fail";
      out.warnings.push_back(os.str());
    }
  }
  const bool needs_pi = out.dynamics.kind == LinearizationKind::watkins_unscaled ||
                        out.dynamics.kind == LinearizationKind::relative_unscaled;
  if (needs_pi && !pi) {
    out.predicted_rate_exponent = std::numeric_limits<double>::quiet_NaN();
    out.varrho0 = std::numeric_limits<double>::quiet_NaN();
    out.max_re_ga = std::numeric_limits<double>::quiet_NaN();
    out.warnings.push_back("linearization needs a stationary pmf; rate not predicted");
    return out;
  }
  const LinearizationMatrix lin = linearization(mdp, phi, out.dynamics.kind, in);
  const EigenSystem es = eigen_system(rule.g * lin.a);
  int slow = 0;
  for (std::size_t k = 1; k < es.values.size(); ++k)
    if (es.values[k].real() > es.values[slow].real()) slow = static_cast<int>(k);
  out.max_re_ga = es.values[slow].real();
  out.slow_eigenvector = es.left.col(slow);
  out.varrho0 = -out.max_re_ga;
  out.predicted_rate_exponent = std::min(1.0, 2.0 * out.varrho0);
  out.finite_covariance = out.max_re_ga < -0.5;
  return out;
}

long clt_sample_size(double epsilon, double delta_prob, double sigma2) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon", "epsilon must be positive");
  if (!(delta_prob > 0.0 && delta_prob < 1.0)) throw ValidationError("delta", "delta must be in (0,1)");
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw ValidationError("sigma2", "variance must be non-negative");
  const boost::math::normal_distribution<double> n01;
  const double z = boost::math::quantile(boost::math::complement(n01, delta_prob / 2.0));
  const double n = z * z * sigma2 / (epsilon * epsilon);
  const double r = std::round(n);
  const double c = std::abs(n - r) <= 1e-12 * std::max(1.0, r) ? r : std::ceil(n);
  return std::max(1L, static_cast<long>(c));
}

}  // namespace relq
