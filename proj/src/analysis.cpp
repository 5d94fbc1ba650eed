#include "relq/analysis.hpp"

#include <sstream>

#include "relq/error.hpp"

namespace relq {

AnalysisReport analyze(const MdpModel& mdp, const AnalysisOptions& opt) {
  AnalysisReport r;
  const int d = mdp.dim();
  const double gamma = mdp.discount();
  const RandomizedPolicy behavior = opt.behavior ? *opt.behavior : RandomizedPolicy::uniform(mdp.num_states(), mdp.num_actions());
  r.spec = opt.spec ? *opt.spec : RelativeQSpec::uniform(d, gamma);
  r.noise_model = opt.noise;

  r.q = solve_q_star(mdp, opt.tol);
  r.h = solve_h_star(mdp, r.spec, r.q, opt.tol);
  r.policy = greedy_policy(r.q.values, mdp.num_actions());
  r.pair_matrix = pair_transition_matrix(mdp, r.policy);
  r.spectral = spectral_summary(r.pair_matrix);
  if (!r.spectral.unichain) r.warnings.push_back("(Q3) optimal pair chain is not unichain");

  const Matrix pb = pair_transition_matrix(mdp, behavior);
  try {
    const StationaryDistribution sd = stationary_distribution(pb);
    r.pi = sd.pmf;
    r.pi_positive = sd.positive;
  } catch (const Error& e) {
    // Reducible behavior chain: use the limit of the lazy chain from a uniform start.
    r.warnings.push_back(std::string("(Q1) ") + e.what() + "; using the stationary mix reached from a uniform start");
    const Matrix lazy = 0.5 * (pb + Matrix::Identity(d, d));
    Eigen::RowVectorXd p = Eigen::RowVectorXd::Constant(d, 1.0 / d);
    for (int it = 0; it < 1000000; ++it) {
      const Eigen::RowVectorXd next = p * lazy;
      const double change = (next - p).lpNorm<1>();
      p = next;
      if (change < 1e-15) break;
    }
    r.pi = (p / p.sum()).transpose();
    r.pi_positive = r.pi.minCoeff() > 0.0;
  }
  if (!r.pi_positive) r.warnings.push_back("(Q1) behavior chain has a pair with zero stationary mass");

  LinearizationInputs in;
  in.q_star = r.q.values;
  in.pi = r.pi;
  r.a_q = linearization(mdp, r.policy, LinearizationKind::watkins_uniform, in);
  in.spec = r.spec;
  r.a_h = linearization(mdp, r.policy, LinearizationKind::relative, in);
  for (const auto& w : r.a_q.warnings) r.warnings.push_back(w);

  const double threshold = gamma * (1.0 - r.spectral.rho_star);
  if (r.spec.delta < threshold) {
    std::ostringstream os;
    os << "warning: delta = " << r.spec.delta << " is below gamma(1 - rho*) = " << threshold
       << "; the relative eigenvalue test Re lambda(g_h A_h) <= -1 is not guaranteed";
    r.warnings.push_back(os.str());
  }

  r.noise = noise_covariance(mdp, r.q.values, r.policy, r.pi);
  r.sigma_delta = effective_noise(r.noise, opt.noise, r.pi);
  r.gains = optimal_gains(r.spectral, gamma, r.a_q.a, r.a_h.a);
  r.sigma_q = asymptotic_covariance(r.a_q.a, r.sigma_delta, r.gains.g_q, opt.lyapunov);
  r.sigma_h = asymptotic_covariance(r.a_h.a, r.sigma_delta, r.gains.g_h, opt.lyapunov);
  if (opt.eigenspace) r.eigenspace = eigenspace_variances(r.a_q.a, r.a_h.a, r.sigma_delta, r.gains.g_q, r.gains.g_h, opt.lyapunov);

  r.diagnosis_q = diagnose(mdp, behavior, Algorithm::watkins_async, StepSizeRule::per_pair(r.gains.g_q), std::nullopt, opt.tol);
  r.diagnosis_h = diagnose(mdp, behavior, Algorithm::relative_async, StepSizeRule::per_pair(r.gains.g_h), r.spec, opt.tol);
  return r;
}

}  // namespace relq
