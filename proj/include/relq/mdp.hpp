#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace relq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kRowSumTol = 1e-12;

// Finite MDP with transitions indexed [action](state, next_state) and cost
// indexed (state, action). State-action pairs are enumerated as
// i = x * num_actions + u.
class MdpModel {
 public:
  static MdpModel create(std::vector<Matrix> transitions, Matrix cost, double discount,
                         std::vector<std::string> labels = {});

  int num_states() const { return static_cast<int>(cost_.rows()); }
  int num_actions() const { return static_cast<int>(cost_.cols()); }
  int dim() const { return num_states() * num_actions(); }
  int pair(int x, int u) const { return x * num_actions() + u; }
  int state_of(int i) const { return i / num_actions(); }
  int action_of(int i) const { return i % num_actions(); }

  const Matrix& transition(int u) const { return transitions_[u]; }
  const std::vector<Matrix>& transitions() const { return transitions_; }
  const Matrix& cost() const { return cost_; }
  double discount() const { return discount_; }
  const std::vector<std::string>& labels() const { return labels_; }

  // Cost flattened over pairs.
  Vector cost_vector() const;
  // The d x l_x matrix P with P((x,u), x') = P_u(x, x').
  Matrix pair_to_state() const;

  MdpModel with_discount(double discount) const;

 private:
  MdpModel() = default;
  std::vector<Matrix> transitions_;
  Matrix cost_;
  double discount_ = 0.0;
  std::vector<std::string> labels_;
};

struct DeterministicPolicy {
  std::vector<int> action_of;
};

// Per-state action pmf, rows indexed by state.
struct RandomizedPolicy {
  Matrix action_pmf;

  static RandomizedPolicy uniform(int num_states, int num_actions);
  static RandomizedPolicy from(const DeterministicPolicy& policy, int num_actions);
};

void validate_policy(const MdpModel& mdp, const DeterministicPolicy& policy);
void validate_policy(const MdpModel& mdp, const RandomizedPolicy& policy);

// Substitution operator S: the l_x x d matrix with S(x, (x,u)) = policy(u|x).
Matrix substitution_matrix(const MdpModel& mdp, const RandomizedPolicy& policy);

Matrix pair_transition_matrix(const MdpModel& mdp, const RandomizedPolicy& policy);
Matrix pair_transition_matrix(const MdpModel& mdp, const DeterministicPolicy& policy);
Matrix state_transition_matrix(const MdpModel& mdp, const RandomizedPolicy& policy);
Matrix state_transition_matrix(const MdpModel& mdp, const DeterministicPolicy& policy);

struct StationaryDistribution {
  Vector pmf;
  // False when some entry is below the positivity floor.
  bool positive = true;
  double residual = 0.0;
  bool used_power_iteration = false;

  Matrix as_diagonal() const { return pmf.asDiagonal(); }
};

inline constexpr double kPositivityFloor = 1e-14;

StationaryDistribution stationary_distribution(const Matrix& stochastic);

struct RandomMdpOptions {
  int num_states = 4;
  int num_actions = 2;
  int branching = 2;
  double cost_lo = 0.0;
  double cost_hi = 1.0;
  double discount = 0.9;
};

MdpModel random_mdp(std::uint64_t seed, const RandomMdpOptions& options);

// Small named instances.
MdpModel swap_chain(double discount, const Vector& cost);
MdpModel lazy_chain(double discount, const Vector& cost);
MdpModel noisy4(double discount);
MdpModel ssp6(double discount);

}  // namespace relq
