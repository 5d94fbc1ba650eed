#include "relq/artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "relq/error.hpp"

namespace relq {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

nlohmann::json complex_list(const std::vector<Complex>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const Complex& c : v) a.push_back({number(c.real()), number(c.imag())});
  return a;
}

nlohmann::json complex_matrix(const CMatrix& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({number(m(i, j).real()), number(m(i, j).imag())});
    a.push_back(row);
  }
  return a;
}

}  // namespace

nlohmann::json to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

nlohmann::json to_json(const Matrix& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

nlohmann::json to_json(const QTable& q, const MdpModel& mdp) {
  const DeterministicPolicy p = greedy_policy(q.values, mdp.num_actions());
  return {{"values", to_json(q.values)},
          {"v_star", to_json(row_min(mdp, q.values))},
          {"residual", number(q.residual)},
          {"iterations", q.iterations},
          {"method", q.method},
          {"greedy_policy", p.action_of},
          {"discount", mdp.discount()}};
}

nlohmann::json to_json(const HTable& h, const MdpModel& mdp, const RelativeQSpec& spec) {
  const DeterministicPolicy p = greedy_policy(h.values, mdp.num_actions());
  return {{"values", to_json(h.values)},
          {"k", number(h.k)},
          {"residual", number(h.residual)},
          {"iterations", h.iterations},
          {"cross_check", number(h.cross_check)},
          {"method", h.method},
          {"greedy_policy", p.action_of},
          {"delta", spec.delta},
          {"mu", to_json(spec.mu)},
          {"centered", to_json(centered_view(h.values, spec))}};
}

nlohmann::json to_json(const SpectralSummary& s) {
  return {{"eigenvalues", complex_list(s.eigenvalues)},
          {"rho", number(s.rho)},
          {"rho_star", number(s.rho_star)},
          {"unichain", s.unichain},
          {"unit_index", s.unit_index},
          {"eigenvector_condition", number(s.eigenvector_condition)}};
}

nlohmann::json to_json(const AsymptoticCovariance& c) {
  nlohmann::json j = {{"verdict", to_string(c.verdict)}, {"gain", number(c.gain)}, {"max_re_ga", number(c.max_re)}};
  if (c.finite()) {
    j["trace"] = number(c.trace());
    j["residual"] = number(c.residual);
    j["relative_residual"] = number(c.relative_residual);
    j["method"] = c.method;
    j["sigma"] = to_json(c.sigma);
  } else {
    j["trace"] = "inf";
    j["witness_lambda"] = {number(c.witness_lambda.real()), number(c.witness_lambda.imag())};
    j["witness_noise"] = number(c.witness_noise);
    j["reason"] = c.reason;
  }
  return j;
}

nlohmann::json to_json(const EigenspaceVariances& e) {
  nlohmann::json j = {{"available", e.available},
                      {"condition_q", number(e.condition_q)},
                      {"condition_h", number(e.condition_h)},
                      {"g_q", number(e.g_q)},
                      {"g_h", number(e.g_h)},
                      {"sigma2_q11", number(e.sigma2_q11)},
                      {"sigma2_h11", number(e.sigma2_h11)},
                      {"sigma2_q_one", number(e.sigma2_q_one)},
                      {"sigma2_h_one", number(e.sigma2_h_one)},
                      {"sigma2_delta_q11", number(e.sigma2_delta_q11)},
                      {"sigma2_delta_h11", number(e.sigma2_delta_h11)},
                      {"lambda_q", complex_list(e.lambda_q)},
                      {"lambda_h", complex_list(e.lambda_h)},
                      {"q_slow", e.q_slow},
                      {"q_one", e.q_one},
                      {"h_slow", e.h_slow},
                      {"h_one", e.h_one},
                      {"cross_checked", e.cross_checked},
                      {"cross_check_error", number(e.cross_check_error)}};
  if (!e.reason.empty()) j["reason"] = e.reason;
  if (e.available) {
    j["table_q"] = complex_matrix(e.table_q);
    j["table_h"] = complex_matrix(e.table_h);
  }
  return j;
}

nlohmann::json to_json(const ConvergenceDiagnosis& d) {
  const auto& c = d.conditions;
  return {{"predicted_rate_exponent", number(d.predicted_rate_exponent)},
          {"varrho0", number(d.varrho0)},
          {"finite_covariance", d.finite_covariance},
          {"max_re_ga", number(d.max_re_ga)},
          {"linearization", to_string(d.dynamics.kind)},
          {"noise_model", to_string(d.dynamics.noise)},
          {"gain", number(d.dynamics.g)},
          {"conditions",
           {{"Q1", c.q1},
            {"min_pi", number(c.min_pi)},
            {"Q2", c.q2},
            {"min_margin", number(c.min_margin)},
            {"Q3", c.q3},
            {"hvar", c.hvar},
            {"hvar_value", number(c.hvar_value)},
            {"disc_cond", c.disc_cond},
            {"disc_value", number(c.disc_value)},
            {"delta_condition", c.delta_condition},
            {"delta_threshold", number(c.delta_threshold)}}},
          {"warnings", d.warnings}};
}

nlohmann::json to_json(const AnalysisReport& r) {
  nlohmann::json j;
  j["optimal_policy"] = r.policy.action_of;
  j["spectral"] = to_json(r.spectral);
  j["rho"] = number(r.spectral.rho);
  j["rho_star"] = number(r.spectral.rho_star);
  j["g_q"] = number(r.gains.g_q);
  j["g_h"] = number(r.gains.g_h);
  if (r.gains.max_re_q) j["max_re_gq_aq"] = number(*r.gains.max_re_q);
  if (r.gains.max_re_h) j["max_re_gh_ah"] = number(*r.gains.max_re_h);
  j["pi"] = to_json(r.pi);
  j["delta"] = r.spec.delta;
  j["noise_model"] = to_string(r.noise_model);
  j["sigma_delta_sync"] = to_json(r.noise.diagonal);
  j["sigma_delta"] = to_json(Vector(r.sigma_delta.diagonal()));
  j["sigma_q"] = to_json(r.sigma_q);
  j["sigma_h"] = to_json(r.sigma_h);
  j["trace_sigma_q"] = number(r.sigma_q.trace());
  j["trace_sigma_h"] = number(r.sigma_h.trace());
  if (r.eigenspace) j["eigenspace"] = to_json(*r.eigenspace);
  j["diagnosis_q"] = to_json(r.diagnosis_q);
  j["diagnosis_h"] = to_json(r.diagnosis_h);
  j["warnings"] = r.warnings;
  return j;
}

nlohmann::json to_json(const LearnerConfig& c) {
  nlohmann::json j = {{"algorithm", to_string(c.algorithm)},
                      {"step", {{"kind", to_string(c.step.kind)}, {"g", c.step.g}, {"shift", c.step.shift}}},
                      {"horizon", c.horizon},
                      {"seed", c.seed},
                      {"run_index", c.run_index},
                      {"initial_state", c.initial_state},
                      {"behavior", to_json(c.behavior.action_pmf)},
                      {"checkpoints", c.checkpoints}};
  if (c.spec) j["spec"] = {{"delta", c.spec->delta}, {"mu", to_json(c.spec->mu)}};
  if (c.initial_table.size()) j["initial_table"] = to_json(c.initial_table);
  return j;
}

nlohmann::json to_json(const MonteCarloPlan& p) {
  return {{"base_config", to_json(p.base_config)},
          {"num_runs", p.num_runs},
          {"checkpoint_grid", p.checkpoint_grid},
          {"ground_truth", to_json(p.ground_truth)},
          {"master_seed", p.master_seed},
          {"components", p.components},
          {"random_init", p.random_init},
          {"init_range", {p.init_lo, p.init_hi}},
          {"force_identical_seeds", p.force_identical_seeds}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path);
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::string s;
  for (Eigen::Index j = 0; j < m.cols(); ++j) s += (j ? ",c" : "c") + std::to_string(j);
  s += "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += (j ? "," : "") + format_double(m(i, j));
    s += "\n";
  }
  write_text(path, s);
}

void write_eigenvalues_csv(const std::string& path, const AnalysisReport& r) {
  std::string s = "matrix,index,re,im\n";
  auto add = [&](const char* name, const std::vector<Complex>& v) {
    for (std::size_t k = 0; k < v.size(); ++k)
      s += std::string(name) + "," + std::to_string(k) + "," + format_double(v[k].real()) + "," +
           format_double(v[k].imag()) + "\n";
  };
  add("PS", r.spectral.eigenvalues);
  if (r.eigenspace) {
    add("A_q", r.eigenspace->lambda_q);
    add("A_h", r.eigenspace->lambda_h);
  }
  write_text(path, s);
}

void write_trace_csv(const std::string& path, const RunTrace& trace, const nlohmann::json& config) {
  std::string s = "# config: " + config.dump() + "\n";
  s += "n,pair_index,value\n";
  for (const auto& c : trace.checkpoints)
    for (Eigen::Index i = 0; i < c.theta.size(); ++i)
      s += std::to_string(c.n) + "," + std::to_string(i) + "," + format_double(c.theta(i)) + "\n";
  write_text(path, s);
}

nlohmann::json write_experiment_files(const std::string& dir, const EmpiricalReport& report,
                                      const nlohmann::json& plan_json, const std::vector<HistogramRequest>& histograms,
                                      const AsymptoticCovariance* predicted) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  nlohmann::json rep;
  rep["num_runs"] = report.num_runs;
  rep["dim"] = report.dim;
  nlohmann::json cps = nlohmann::json::array();
  std::string rate = "n,mse,trace_scaled_covariance\n";
  std::string span = "n,mean_span_error\n";
  for (const auto& cs : report.checkpoints) {
    write_matrix_csv((base / ("covariance_" + std::to_string(cs.n) + ".csv")).string(), cs.scaled_covariance);
    cps.push_back({{"n", cs.n},
                   {"trace", number(cs.trace)},
                   {"mse", number(cs.mse)},
                   {"mean_span_error", number(cs.mean_span_error)},
                   {"scaled_variance", to_json(cs.scaled_variance)},
                   {"mean_error", to_json(cs.mean_error)}});
    rate += std::to_string(cs.n) + "," + format_double(cs.mse) + "," + format_double(cs.trace) + "\n";
    span += std::to_string(cs.n) + "," + format_double(cs.mean_span_error) + "\n";
  }
  rep["checkpoints"] = cps;
  if (report.rate_available)
    rep["rate_fit"] = {{"exponent", number(report.rate.exponent)},
                       {"intercept", number(report.rate.intercept)},
                       {"r2", number(report.rate.r2)}};
  write_text((base / "rate.csv").string(), rate);
  write_text((base / "span_error.csv").string(), span);

  nlohmann::json hs = nlohmann::json::array();
  for (const auto& req : histograms) {
    const auto reps = clt_histogram(report, req.component, req.predicted_sigma2);
    for (const auto& h : reps) {
      std::string s = "bin_left,bin_right,count,gaussian_pdf_at_center\n";
      for (std::size_t b = 0; b < h.histogram.counts.size(); ++b)
        s += format_double(h.histogram.edges[b]) + "," + format_double(h.histogram.edges[b + 1]) + "," +
             std::to_string(h.histogram.counts[b]) + "," + format_double(h.pdf_at_center[b]) + "\n";
      write_text((base / ("hist_" + std::to_string(req.component) + "_" + std::to_string(h.n) + ".csv")).string(), s);
      hs.push_back({{"component", req.component},
                    {"n", h.n},
                    {"predicted_sigma2", number(req.predicted_sigma2)},
                    {"ks", number(h.ks)},
                    {"ks_critical_10", number(ks_critical_value(0.10, static_cast<std::size_t>(report.num_runs)))},
                    {"degenerate_prediction", h.degenerate_prediction}});
    }
  }
  rep["histograms"] = hs;
  if (predicted) {
    rep["predicted"] = {{"verdict", to_string(predicted->verdict)}, {"trace", number(predicted->trace())}};
    const long at = report.checkpoints.back().n;
    const CovarianceMatch m = covariance_match(report, *predicted, at);
    if (m.prediction_infinite) {
      nlohmann::json tr = nlohmann::json::array();
      for (const auto& [n, t] : m.scaled_traces) tr.push_back({n, number(t)});
      rep["divergence"] = {{"scaled_traces", tr}, {"trace_increasing", m.trace_increasing}};
    } else {
      rep["covariance_match"] = {{"n", at}, {"trace_error", number(m.trace_error)}, {"direction_errors", m.direction_errors}};
    }
  }
  write_json((base / "report.json").string(), rep);
  write_json((base / "plan.json").string(), plan_json);
  return rep;
}

}  // namespace relq
