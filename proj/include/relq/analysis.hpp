#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relq/covariance.hpp"

namespace relq {

struct AnalysisOptions {
  std::optional<RandomizedPolicy> behavior;  // default: uniform
  std::optional<RelativeQSpec> spec;         // default: uniform mu, delta = gamma
  NoiseModel noise = NoiseModel::async_per_pair;
  double tol = kDefaultTol;
  LyapunovOptions lyapunov;
  bool eigenspace = true;
};

// End-to-end pipeline: optimal policy, spectra, gains, noise and both
// asymptotic covariances at their optimal gains.
struct AnalysisReport {
  QTable q;
  HTable h;
  RelativeQSpec spec;
  DeterministicPolicy policy;
  Matrix pair_matrix;
  SpectralSummary spectral;
  Vector pi;
  bool pi_positive = true;
  LinearizationMatrix a_q;
  LinearizationMatrix a_h;
  NoiseCovariance noise;
  NoiseModel noise_model = NoiseModel::async_per_pair;
  Matrix sigma_delta;
  OptimalGains gains;
  AsymptoticCovariance sigma_q;
  AsymptoticCovariance sigma_h;
  std::optional<EigenspaceVariances> eigenspace;
  ConvergenceDiagnosis diagnosis_q;
  ConvergenceDiagnosis diagnosis_h;
  std::vector<std::string> warnings;
};

AnalysisReport analyze(const MdpModel& mdp, const AnalysisOptions& options = {});

}  // namespace relq
