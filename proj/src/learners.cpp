#include "relq/learners.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "relq/error.hpp"
#include "relq/random.hpp"

namespace relq {

namespace {

// Cumulative rows for inverse-CDF sampling. last[r] is the last index with
// positive mass, used when rounding leaves u above the final cumulative value.
struct Sampler {
  std::vector<double> cum;
  std::vector<int> last;
  int width = 0;

  Sampler(const Matrix& rows) : width(static_cast<int>(rows.cols())) {
    const Eigen::Index n = rows.rows();
    cum.resize(static_cast<std::size_t>(n * width));
    last.resize(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) {
      double s = 0.0;
      int lp = 0;
      for (int j = 0; j < width; ++j) {
        s += rows(r, j);
        cum[r * width + j] = s;
        if (rows(r, j) > 0.0) lp = j;
      }
      last[r] = lp;
    }
  }

  int draw(int row, double u) const {
    const double* c = cum.data() + static_cast<std::size_t>(row) * width;
    for (int j = 0; j < width; ++j)
      if (u < c[j]) return j;
    return last[row];
  }
};

void validate_config(const MdpModel& mdp, const LearnerConfig& cfg, Algorithm expected) {
  if (cfg.algorithm != expected) {
    std::ostringstream os;
    os << "config requests " << to_string(cfg.algorithm) << " but " << to_string(expected) << " was called";
    throw ValidationError("algorithm", os.str());
  }
  if (cfg.horizon < 1) throw ValidationError("horizon", "horizon must be at least 1");
  cfg.step.validate();
  if (expected != Algorithm::watkins_sync) {
    validate_policy(mdp, cfg.behavior);
    if (cfg.strict_q1) {
      const StationaryDistribution sd = stationary_distribution(pair_transition_matrix(mdp, cfg.behavior));
      if (!sd.positive) throw ValidationError("policy", "behavior policy violates (Q1): a pair has zero stationary mass");
    }
    if (cfg.initial_state >= mdp.num_states()) throw ValidationError("state", "initial state out of range");
  }
  if (expected == Algorithm::relative_async) {
    if (!cfg.spec) throw ValidationError("spec", "relative learner needs mu and delta");
    cfg.spec->validate(mdp.dim(), false);
  }
  if (cfg.initial_table.size() != 0 && cfg.initial_table.size() != mdp.dim())
    throw ValidationError("pair", "initial table length does not match the MDP");
  long prev = -1;
  for (long c : cfg.checkpoints) {
    if (c <= prev) throw ValidationError("checkpoints", "checkpoints must be strictly increasing");
    if (c < 0 || c > cfg.horizon) throw ValidationError("checkpoints", "checkpoint outside [0, horizon]");
    prev = c;
  }
}

struct Snapshotter {
  const std::vector<long>& grid;
  std::size_t next = 0;
  RunTrace& trace;

  void maybe(long n, const Vector& theta) {
    while (next < grid.size() && grid[next] == n) {
      trace.checkpoints.push_back({n, theta});
      ++next;
    }
  }
};

RunTrace run_async(const MdpModel& mdp, const LearnerConfig& cfg, const StepObserver& observer, bool relative) {
  const int na = mdp.num_actions();
  const int d = mdp.dim();
  const double gamma = mdp.discount();
  const Sampler trans(mdp.pair_to_state());
  const Sampler policy(cfg.behavior.action_pmf);
  const Vector c = mdp.cost_vector();

  Rng policy_rng(cfg.seed, cfg.run_index, Stream::policy);
  Rng trans_rng(cfg.seed, cfg.run_index, Stream::transition);

  Vector theta = cfg.initial_table.size() ? cfg.initial_table : Vector::Zero(d);
  double* th = theta.data();

  std::vector<int> mu_idx;
  std::vector<double> mu_w;
  double delta = 0.0;
  if (relative) {
    delta = cfg.spec->delta;
    for (int i = 0; i < d; ++i)
      if (cfg.spec->mu(i) != 0.0) {
        mu_idx.push_back(i);
        mu_w.push_back(cfg.spec->mu(i));
      }
  }

  RunTrace trace;
  trace.horizon = cfg.horizon;
  trace.visit_counts.assign(d, 0);
  Snapshotter snap{cfg.checkpoints, 0, trace};
  snap.maybe(0, theta);

  int x = cfg.initial_state >= 0 ? cfg.initial_state
                                 : static_cast<int>(trans_rng.below(static_cast<std::uint64_t>(mdp.num_states())));
  for (long n = 1; n <= cfg.horizon; ++n) {
    const int u = policy.draw(x, policy_rng.uniform());
    const int i = x * na + u;
    const int y = trans.draw(i, trans_rng.uniform());
    const long count = ++trace.visit_counts[i];
    const double alpha = step_size(cfg.step, n, count);
    double next_min = th[y * na];
    for (int b = 1; b < na; ++b) next_min = std::min(next_min, th[y * na + b]);
    double td = c(i) + gamma * next_min - th[i];
    if (relative) {
      double m = 0.0;
      for (std::size_t k = 0; k < mu_idx.size(); ++k) m += mu_w[k] * th[mu_idx[k]];
      td -= delta * m;
    }
    th[i] += alpha * td;
    if (observer) observer({n, i, y, count, alpha, td});
    snap.maybe(n, theta);
    x = y;
  }
  trace.final_table = theta;
  return trace;
}

}  // namespace

double step_size(const StepSizeRule& rule, long n, long count) {
  switch (rule.kind) {
    case StepSizeRule::Kind::global_over_n: return rule.g / static_cast<double>(n);
    case StepSizeRule::Kind::per_pair_count: return count > 0 ? rule.g / (static_cast<double>(count) + rule.shift) : 0.0;
    case StepSizeRule::Kind::shifted_global: return rule.g / (static_cast<double>(n) + rule.shift);
  }
  return 0.0;
}

double temporal_difference(const Vector& table, int pair, int next_state, const MdpModel& mdp,
                           const RelativeQSpec* spec) {
  if (table.size() != mdp.dim()) throw ValidationError("pair", "table length does not match the MDP");
  if (pair < 0 || pair >= mdp.dim()) throw ValidationError("pair", "pair index out of range");
  if (next_state < 0 || next_state >= mdp.num_states()) throw ValidationError("state", "next state out of range");
  const int na = mdp.num_actions();
  const double next_min = table.segment(next_state * na, na).minCoeff();
  double td = mdp.cost()(mdp.state_of(pair), mdp.action_of(pair)) + mdp.discount() * next_min - table(pair);
  if (spec) td -= spec->delta * spec->mean(table);
  return td;
}

RunTrace run_watkins_async(const MdpModel& mdp, const LearnerConfig& config, const StepObserver& observer) {
  validate_config(mdp, config, Algorithm::watkins_async);
  return run_async(mdp, config, observer, false);
}

RunTrace run_relative_async(const MdpModel& mdp, const LearnerConfig& config, const StepObserver& observer) {
  validate_config(mdp, config, Algorithm::relative_async);
  return run_async(mdp, config, observer, true);
}

RunTrace run_watkins_sync(const MdpModel& mdp, const LearnerConfig& config, const StepObserver& observer) {
  validate_config(mdp, config, Algorithm::watkins_sync);
  const int na = mdp.num_actions();
  const int d = mdp.dim();
  const double gamma = mdp.discount();
  const Sampler trans(mdp.pair_to_state());
  const Vector c = mdp.cost_vector();
  Rng trans_rng(config.seed, config.run_index, Stream::transition);

  Vector theta = config.initial_table.size() ? config.initial_table : Vector::Zero(d);
  Vector next(d);
  std::vector<int> ys(d);
  RunTrace trace;
  trace.horizon = config.horizon;
  trace.visit_counts.assign(d, 0);
  Snapshotter snap{config.checkpoints, 0, trace};
  snap.maybe(0, theta);
  for (long n = 1; n <= config.horizon; ++n) {
    const double alpha = step_size(config.step, n, n);
    for (int i = 0; i < d; ++i) {
      const int y = trans.draw(i, trans_rng.uniform());
      ys[i] = y;
      double next_min = theta(y * na);
      for (int b = 1; b < na; ++b) next_min = std::min(next_min, theta(y * na + b));
      const double td = c(i) + gamma * next_min - theta(i);
      next(i) = theta(i) + alpha * td;
      ++trace.visit_counts[i];
      if (observer) observer({n, i, y, n, alpha, td});
    }
    theta.swap(next);
    snap.maybe(n, theta);
  }
  trace.final_table = theta;
  return trace;
}

RunTrace run_learner(const MdpModel& mdp, const LearnerConfig& config, const StepObserver& observer) {
  switch (config.algorithm) {
    case Algorithm::watkins_async: return run_watkins_async(mdp, config, observer);
    case Algorithm::watkins_sync: return run_watkins_sync(mdp, config, observer);
    case Algorithm::relative_async: return run_relative_async(mdp, config, observer);
  }
  throw Error(ErrorCategory::internal, "unknown algorithm");
}

}  // namespace relq
