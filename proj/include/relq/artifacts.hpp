#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "relq/analysis.hpp"
#include "relq/experiments.hpp"

namespace relq {

// Shortest-form doubles in JSON; CSV uses 17 significant digits.
std::string format_double(double v);

nlohmann::json to_json(const Vector& v);
nlohmann::json to_json(const Matrix& m);
nlohmann::json to_json(const QTable& q, const MdpModel& mdp);
nlohmann::json to_json(const HTable& h, const MdpModel& mdp, const RelativeQSpec& spec);
nlohmann::json to_json(const SpectralSummary& s);
nlohmann::json to_json(const AsymptoticCovariance& c);
nlohmann::json to_json(const EigenspaceVariances& e);
nlohmann::json to_json(const ConvergenceDiagnosis& d);
nlohmann::json to_json(const AnalysisReport& r);
nlohmann::json to_json(const LearnerConfig& c);
nlohmann::json to_json(const MonteCarloPlan& p);

void write_text(const std::string& path, const std::string& text);
void write_json(const std::string& path, const nlohmann::json& j);
void write_matrix_csv(const std::string& path, const Matrix& m);
void write_eigenvalues_csv(const std::string& path, const AnalysisReport& r);
// Long format n,pair_index,value preceded by a "# config: {...}" line.
void write_trace_csv(const std::string& path, const RunTrace& trace, const nlohmann::json& config);

struct HistogramRequest {
  int component = 0;
  double predicted_sigma2 = 0.0;
};

// covariance_<n>.csv, hist_<i>_<n>.csv, rate.csv, span_error.csv, report.json and plan.json.
nlohmann::json write_experiment_files(const std::string& dir, const EmpiricalReport& report,
                                      const nlohmann::json& plan_json,
                                      const std::vector<HistogramRequest>& histograms,
                                      const AsymptoticCovariance* predicted);

}  // namespace relq
