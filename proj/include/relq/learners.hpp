#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "relq/mdp.hpp"
#include "relq/solvers.hpp"
#include "relq/step_size.hpp"

namespace relq {

struct LearnerConfig {
  Algorithm algorithm = Algorithm::watkins_async;
  StepSizeRule step = StepSizeRule::per_pair(1.0);
  std::optional<RelativeQSpec> spec;  // relative_async only
  RandomizedPolicy behavior;
  long horizon = 1000;
  std::uint64_t seed = 0;
  std::uint64_t run_index = 0;
  Vector initial_table;         // empty means zeros
  int initial_state = -1;       // negative: drawn uniformly
  std::vector<long> checkpoints;  // step counts at which to snapshot; 0 is the initial table
  bool strict_q1 = false;       // reject behavior policies whose pair chain has a zero stationary entry
};

struct Checkpoint {
  long n = 0;
  Vector theta;
};

struct RunTrace {
  std::vector<Checkpoint> checkpoints;
  std::vector<long> visit_counts;
  Vector final_table;
  long horizon = 0;
};

// One table update; for the synchronous learner one event per pair and step.
struct StepEvent {
  long n = 0;          // 1-based step index
  int pair = 0;
  int next_state = 0;
  long count = 0;      // visit count of the pair including this visit
  double alpha = 0.0;
  double td = 0.0;
};
using StepObserver = std::function<void(const StepEvent&)>;

RunTrace run_watkins_async(const MdpModel& mdp, const LearnerConfig& config, const StepObserver& observer = {});
RunTrace run_watkins_sync(const MdpModel& mdp, const LearnerConfig& config, const StepObserver& observer = {});
RunTrace run_relative_async(const MdpModel& mdp, const LearnerConfig& config, const StepObserver& observer = {});
// Dispatches on config.algorithm.
RunTrace run_learner(const MdpModel& mdp, const LearnerConfig& config, const StepObserver& observer = {});

// c(x,u) + gamma min_u' table(x', u') - table(x,u), minus delta <mu, table> when spec is given.
double temporal_difference(const Vector& table, int pair, int next_state, const MdpModel& mdp,
                           const RelativeQSpec* spec = nullptr);

// Step size for the given rule at step n with pair count (both 1-based).
double step_size(const StepSizeRule& rule, long n, long count);

}  // namespace relq
