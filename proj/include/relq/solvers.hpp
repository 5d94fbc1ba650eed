#pragma once

#include <string>

#include "relq/mdp.hpp"

namespace relq {

struct QTable {
  Vector values;
  double residual = 0.0;
  long iterations = 0;
  std::string method;
};

// Reference pmf mu over pairs and offset gain delta for the relative equation.
struct RelativeQSpec {
  Vector mu;
  double delta = 0.0;

  static RelativeQSpec uniform(int dim, double delta);
  static RelativeQSpec point(int dim, int index, double delta);

  double mean(const Vector& v) const { return mu.dot(v); }
  // Throws ValidationError. require_positive rejects delta == 0.
  void validate(int dim, bool require_positive = true) const;
};

struct HTable {
  Vector values;
  double k = 0.0;
  double residual = 0.0;
  long iterations = 0;
  // Sup-norm distance between the two independent constructions.
  double cross_check = 0.0;
  std::string method;
};

inline constexpr double kDefaultTol = 1e-10;
inline constexpr long kDefaultMaxIterations = 10000000;

// Row minimum over actions, one entry per state.
Vector row_min(const MdpModel& mdp, const Vector& table);
// c + gamma * P * min_u table
Vector bellman_operator(const MdpModel& mdp, const Vector& q);
double q_bellman_residual(const MdpModel& mdp, const Vector& q);

// Exact Q-function of a fixed policy: solves (I - gamma P S) Q = c.
Vector evaluate_policy_q(const MdpModel& mdp, const DeterministicPolicy& policy);

QTable solve_q_star(const MdpModel& mdp, double tol = kDefaultTol,
                    long max_iterations = kDefaultMaxIterations);

// Lowest action index wins ties.
DeterministicPolicy greedy_policy(const Vector& q, int num_actions);
// Per-state gap between the best and second best action; +inf for one action.
Vector action_margins(const Vector& q, int num_actions);

double span_seminorm(const Vector& v);

// c + gamma P H_min - delta <mu, H> 1
Vector relative_bellman_operator(const Vector& h, const MdpModel& mdp, const RelativeQSpec& spec);
double relative_bellman_residual(const MdpModel& mdp, const RelativeQSpec& spec, const Vector& h);

// k = delta / (1 + delta - gamma) <mu, Q*>
double relative_offset(const MdpModel& mdp, const RelativeQSpec& spec, const Vector& q_star);

HTable solve_h_star(const MdpModel& mdp, const RelativeQSpec& spec, double tol = kDefaultTol,
                    long max_iterations = kDefaultMaxIterations);
HTable solve_h_star(const MdpModel& mdp, const RelativeQSpec& spec, const QTable& q_star,
                    double tol = kDefaultTol, long max_iterations = kDefaultMaxIterations);

// H - <mu, H> 1, for diagnostics only.
Vector centered_view(const Vector& h, const RelativeQSpec& spec);

// (1 - gamma) <mu, Q*>; tends to the optimal average cost as gamma -> 1.
double eta_proxy(const Vector& q_star, const MdpModel& mdp, const RelativeQSpec& spec);

}  // namespace relq
