#pragma once

#include <string>

namespace relq {

enum class Algorithm { watkins_async, watkins_sync, relative_async };

// global_over_n: g / n. per_pair_count: g / (n(x,u) + shift), zero before the
// first visit. shifted_global: g / (n + shift).
struct StepSizeRule {
  enum class Kind { global_over_n, per_pair_count, shifted_global };
  Kind kind = Kind::per_pair_count;
  double g = 1.0;
  double shift = 0.0;

  static StepSizeRule global(double g) { return {Kind::global_over_n, g, 0.0}; }
  static StepSizeRule per_pair(double g, double shift = 0.0) { return {Kind::per_pair_count, g, shift}; }
  static StepSizeRule shifted(double g, double shift) { return {Kind::shifted_global, g, shift}; }

  void validate() const;
};

const char* to_string(Algorithm a);
const char* to_string(StepSizeRule::Kind k);
Algorithm parse_algorithm(const std::string& s);
StepSizeRule::Kind parse_step_kind(const std::string& s);

}  // namespace relq
