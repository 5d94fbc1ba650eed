#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relq/covariance.hpp"
#include "relq/learners.hpp"
#include "relq/statistics.hpp"

namespace relq {

inline const std::vector<long> kDefaultCheckpointGrid = {1000, 10000, 100000, 1000000};

struct MonteCarloPlan {
  LearnerConfig base_config;
  int num_runs = 1000;
  std::vector<long> checkpoint_grid = kDefaultCheckpointGrid;
  Vector ground_truth;
  std::uint64_t master_seed = 0;
  std::vector<int> components;      // pair indices for histograms
  std::vector<CVector> directions;  // optional directions for scaled variances
  // theta_0 uniform on [init_lo, init_hi]^d per run; otherwise base_config.initial_table.
  bool random_init = true;
  double init_lo = -1.0;
  double init_hi = 1.0;
  int workers = 1;
  bool force_identical_seeds = false;
  // When set, per-run errors are written to this file instead of held in memory.
  std::string snapshot_file;

  void validate(int dim) const;
};

struct CheckpointStats {
  long n = 0;
  Matrix scaled_covariance;  // n * unbiased sample covariance of the error
  double trace = 0.0;
  Vector scaled_variance;    // diagonal of scaled_covariance
  Vector mean_error;
  double mse = 0.0;          // mean over runs of |theta_n - theta*|^2
  double mean_span_error = 0.0;
  std::vector<double> direction_variance;  // n * v^H Sigma_n v per plan direction
  // sqrt(n) * error for each plan component, one entry per run.
  std::vector<std::vector<double>> scaled_samples;
};

struct EmpiricalReport {
  int num_runs = 0;
  int dim = 0;
  std::vector<CheckpointStats> checkpoints;
  RateFit rate;
  bool rate_available = false;
  std::vector<int> components;
};

// Errors theta_n - theta* at each checkpoint of one run.
using RunFunction = std::function<std::vector<Vector>(std::uint64_t run_index)>;

EmpiricalReport monte_carlo(const MdpModel& mdp, const MonteCarloPlan& plan);
EmpiricalReport monte_carlo(const MonteCarloPlan& plan, int dim, const RunFunction& run);

// Learner configuration used for run r of the plan.
LearnerConfig run_config(const MonteCarloPlan& plan, int dim, std::uint64_t run_index);

// Synthetic learner: theta_n - theta* = Z / sqrt(n), Z ~ N(0, sigma0) per run.
RunFunction gaussian_stub(const Matrix& sigma0, std::uint64_t master_seed, const std::vector<long>& grid,
                          bool identical_seeds = false);

struct HistogramReport {
  long n = 0;
  Histogram histogram;
  std::vector<double> pdf_at_center;
  double ks = 0.0;
  bool degenerate_prediction = false;
};

std::vector<HistogramReport> clt_histogram(const EmpiricalReport& report, int component, double predicted_sigma2);
std::vector<HistogramReport> clt_histogram(const MdpModel& mdp, MonteCarloPlan plan, int component,
                                           double predicted_sigma2);

std::vector<std::pair<long, double>> span_error_curve(const RunTrace& trace, const Vector& ground_truth);

struct CovarianceMatch {
  bool prediction_infinite = false;
  double trace_error = 0.0;             // |tr(n S_n) - tr Sigma| / tr Sigma
  std::vector<double> direction_errors;  // per eigenvector of Sigma
  // Divergence diagnostic when the prediction is not finite.
  std::vector<std::pair<long, double>> scaled_traces;
  bool trace_increasing = false;
};

CovarianceMatch covariance_match(const EmpiricalReport& report, const AsymptoticCovariance& predicted, long at_n);

}  // namespace relq
