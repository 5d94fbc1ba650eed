#include "relq/solvers.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "relq/error.hpp"

namespace relq {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_dim(const MdpModel& mdp, const Vector& v, const char* what) {
  if (v.size() != mdp.dim()) {
    std::ostringstream os;
    os << what << " has length " << v.size() << ", expected " << mdp.dim();
    throw ValidationError("pair", os.str());
  }
}

double stop_threshold(double tol, double gamma) {
  if (gamma == 0.0) return std::numeric_limits<double>::infinity();
  double thr = tol * (1.0 - gamma) / gamma;
  if (gamma > 1.0 - 1e-6) thr = std::max(thr, tol * std::ldexp(1.0, -20));
  return thr;
}

}  // namespace

RelativeQSpec RelativeQSpec::uniform(int dim, double delta) {
  return {Vector::Constant(dim, 1.0 / dim), delta};
}

RelativeQSpec RelativeQSpec::point(int dim, int index, double delta) {
  if (index < 0 || index >= dim) throw ValidationError("mu", "point mass index out of range");
  Vector mu = Vector::Zero(dim);
  mu(index) = 1.0;
  return {mu, delta};
}

void RelativeQSpec::validate(int dim, bool require_positive) const {
  if (mu.size() != dim) {
    std::ostringstream os;
    os << "mu has length " << mu.size() << ", expected " << dim;
    throw ValidationError("mu", os.str());
  }
  if ((mu.array() < 0.0).any() || !mu.allFinite())
    throw ValidationError("mu", "mu must be non-negative");
  if (std::abs(mu.sum() - 1.0) > 1e-12) throw ValidationError("mu", "mu must sum to 1");
  if (!std::isfinite(delta) || delta < 0.0 || (require_positive && delta == 0.0))
    throw ValidationError("delta", require_positive ? "delta must be positive" : "delta must be non-negative");
}

Vector row_min(const MdpModel& mdp, const Vector& table) {
  const int na = mdp.num_actions();
  Vector m(mdp.num_states());
  for (int x = 0; x < mdp.num_states(); ++x) m(x) = table.segment(x * na, na).minCoeff();
  return m;
}

Vector bellman_operator(const MdpModel& mdp, const Vector& q) {
  check_dim(mdp, q, "Q table");
  const Vector v = row_min(mdp, q);
  Vector out(mdp.dim());
  for (int u = 0; u < mdp.num_actions(); ++u) {
    const Vector pv = mdp.transition(u) * v;
    for (int x = 0; x < mdp.num_states(); ++x)
      out(mdp.pair(x, u)) = mdp.cost()(x, u) + mdp.discount() * pv(x);
  }
  return out;
}

double q_bellman_residual(const MdpModel& mdp, const Vector& q) {
  return (bellman_operator(mdp, q) - q).lpNorm<Eigen::Infinity>();
}

Vector evaluate_policy_q(const MdpModel& mdp, const DeterministicPolicy& policy) {
  const Matrix ps = pair_transition_matrix(mdp, policy);
  const Matrix lhs = Matrix::Identity(mdp.dim(), mdp.dim()) - mdp.discount() * ps;
  return lhs.partialPivLu().solve(mdp.cost_vector());
}

QTable solve_q_star(const MdpModel& mdp, double tol, long max_iterations) {
  if (!(tol > 0.0)) throw ValidationError("tol", "tolerance must be positive");
  const double gamma = mdp.discount();
  const double thr = stop_threshold(tol, gamma);
  Vector q = mdp.cost_vector();
  long it = 0;
  double gap = std::numeric_limits<double>::infinity();
  while (true) {
    Vector next = bellman_operator(mdp, q);
    gap = (next - q).lpNorm<Eigen::Infinity>();
    q.swap(next);
    ++it;
    if (gap <= thr) break;
    // Rounding floor: further sweeps cannot reduce the gap.
    if (gap <= 16.0 * kEps * std::max(1.0, q.lpNorm<Eigen::Infinity>())) break;
    if (it >= max_iterations) {
      throw SolverError("value iteration hit the iteration cap", q_bellman_residual(mdp, q), it);
    }
  }
  QTable out{q, q_bellman_residual(mdp, q), it, "value_iteration"};
  if (gamma > 0.0) {
    const Vector polished = evaluate_policy_q(mdp, greedy_policy(q, mdp.num_actions()));
    const double r = q_bellman_residual(mdp, polished);
    if (r < out.residual) {
      out.values = polished;
      out.residual = r;
      out.method = "value_iteration+policy_evaluation";
    }
  }
  if (!(out.residual <= tol)) throw SolverError("Bellman residual above tolerance", out.residual, it);
  return out;
}

DeterministicPolicy greedy_policy(const Vector& q, int num_actions) {
  DeterministicPolicy p;
  const int ns = static_cast<int>(q.size()) / num_actions;
  p.action_of.resize(ns);
  for (int x = 0; x < ns; ++x) {
    int best = 0;
    for (int u = 1; u < num_actions; ++u)
      if (q(x * num_actions + u) < q(x * num_actions + best)) best = u;
    p.action_of[x] = best;
  }
  return p;
}

Vector action_margins(const Vector& q, int num_actions) {
  const int ns = static_cast<int>(q.size()) / num_actions;
  Vector m(ns);
  for (int x = 0; x < ns; ++x) {
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    for (int u = 0; u < num_actions; ++u) {
      const double v = q(x * num_actions + u);
      if (v < best) {
        second = best;
        best = v;
      } else if (v < second) {
        second = v;
      }
    }
    m(x) = second - best;
  }
  return m;
}

double span_seminorm(const Vector& v) {
  if (v.size() == 0) return 0.0;
  return v.maxCoeff() - v.minCoeff();
}

Vector relative_bellman_operator(const Vector& h, const MdpModel& mdp, const RelativeQSpec& spec) {
  check_dim(mdp, h, "H table");
  Vector out = bellman_operator(mdp, h);
  out.array() -= spec.delta * spec.mean(h);
  return out;
}

double relative_bellman_residual(const MdpModel& mdp, const RelativeQSpec& spec, const Vector& h) {
  return (relative_bellman_operator(h, mdp, spec) - h).lpNorm<Eigen::Infinity>();
}

double relative_offset(const MdpModel& mdp, const RelativeQSpec& spec, const Vector& q_star) {
  return spec.delta / (1.0 + spec.delta - mdp.discount()) * spec.mean(q_star);
}

HTable solve_h_star(const MdpModel& mdp, const RelativeQSpec& spec, double tol, long max_iterations) {
  spec.validate(mdp.dim());
  return solve_h_star(mdp, spec, solve_q_star(mdp, tol, max_iterations), tol, max_iterations);
}

HTable solve_h_star(const MdpModel& mdp, const RelativeQSpec& spec, const QTable& q_star, double tol,
                    long max_iterations) {
  if (!(tol > 0.0)) throw ValidationError("tol", "tolerance must be positive");
  spec.validate(mdp.dim());
  check_dim(mdp, q_star.values, "Q table");
  const double gamma = mdp.discount();
  const double thr = stop_threshold(tol, gamma);

  // Split H = W + r 1 with <mu, W> = 0. W follows the projected Bellman map,
  // which contracts in span, and r = <mu, T W> / (1 - gamma + delta).
  Vector w = mdp.cost_vector();
  w.array() -= spec.mean(w);
  long it = 0;
  Vector tw;
  while (true) {
    tw = bellman_operator(mdp, w);
    Vector next = tw;
    next.array() -= spec.mean(tw);
    const double gap = (next - w).lpNorm<Eigen::Infinity>();
    w.swap(next);
    ++it;
    if (gap <= thr) break;
    if (gap <= 16.0 * kEps * std::max(1.0, w.lpNorm<Eigen::Infinity>())) break;
    if (it >= max_iterations)
      throw SolverError("relative value iteration hit the iteration cap", gap, it);
  }
  tw = bellman_operator(mdp, w);
  Vector h = w;
  h.array() += spec.mean(tw) / (1.0 - gamma + spec.delta);

  HTable out;
  out.values = h;
  out.residual = relative_bellman_residual(mdp, spec, h);
  out.iterations = it;
  out.method = "relative_value_iteration";

  {
    const DeterministicPolicy phi = greedy_policy(h, mdp.num_actions());
    const Matrix ps = pair_transition_matrix(mdp, phi);
    const int d = mdp.dim();
    const Matrix lhs = Matrix::Identity(d, d) - gamma * ps + spec.delta * Vector::Ones(d) * spec.mu.transpose();
    const Vector polished = lhs.partialPivLu().solve(mdp.cost_vector());
    const double r = relative_bellman_residual(mdp, spec, polished);
    if (r < out.residual) {
      out.values = polished;
      out.residual = r;
      out.method = "relative_value_iteration+policy_evaluation";
    }
  }

  out.k = relative_offset(mdp, spec, q_star.values);
  Vector shifted = q_star.values;
  shifted.array() -= out.k;
  out.cross_check = (out.values - shifted).lpNorm<Eigen::Infinity>();
  if (!(out.residual <= tol)) throw SolverError("relative Bellman residual above tolerance", out.residual, it);
  if (!(out.cross_check <= 10.0 * tol)) {
    std::ostringstream os;
    os << "relative value iteration and Q* - k disagree by " << out.cross_check;
    throw Error(ErrorCategory::internal, os.str());
  }
  return out;
}

Vector centered_view(const Vector& h, const RelativeQSpec& spec) {
  Vector out = h;
  out.array() -= spec.mean(h);
  return out;
}

double eta_proxy(const Vector& q_star, const MdpModel& mdp, const RelativeQSpec& spec) {
  return (1.0 - mdp.discount()) * spec.mean(q_star);
}

}  // namespace relq
