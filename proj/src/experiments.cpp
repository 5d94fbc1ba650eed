#include "relq/experiments.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "relq/error.hpp"
#include "relq/random.hpp"

namespace relq {

void MonteCarloPlan::validate(int dim) const {
  if (num_runs < 2) throw ValidationError("runs", "a Monte-Carlo plan needs at least two runs");
  if (checkpoint_grid.empty()) throw ValidationError("checkpoints", "checkpoint grid is empty");
  long prev = 0;
  for (long n : checkpoint_grid) {
    if (n <= prev) throw ValidationError("checkpoints", "checkpoints must be positive and strictly increasing");
    prev = n;
  }
  if (checkpoint_grid.back() > base_config.horizon) throw ValidationError("checkpoints", "checkpoint beyond the horizon");
  if (ground_truth.size() != dim) throw ValidationError("ground_truth", "ground truth length does not match the MDP");
  for (int c : components)
    if (c < 0 || c >= dim) throw ValidationError("components", "component index out of range");
  for (const auto& v : directions)
    if (v.size() != dim) throw ValidationError("directions", "direction length does not match the MDP");
  if (workers < 1) throw ValidationError("workers", "need at least one worker");
  if (random_init && !(init_lo <= init_hi)) throw ValidationError("init", "initial range must satisfy lo <= hi");
}

LearnerConfig run_config(const MonteCarloPlan& plan, int dim, std::uint64_t run_index) {
  LearnerConfig cfg = plan.base_config;
  const std::uint64_t r = plan.force_identical_seeds ? 0 : run_index;
  cfg.seed = plan.master_seed;
  cfg.run_index = r;
  cfg.checkpoints = plan.checkpoint_grid;
  if (plan.random_init) {
    Rng rng(plan.master_seed, r, Stream::init);
    cfg.initial_table.resize(dim);
    for (int i = 0; i < dim; ++i) cfg.initial_table(i) = rng.uniform(plan.init_lo, plan.init_hi);
  }
  return cfg;
}

namespace {

class ErrorStore {
 public:
  virtual ~ErrorStore() = default;
  virtual void put(std::size_t run, const std::vector<Vector>& errors) = 0;
  virtual Vector get(std::size_t run, std::size_t checkpoint) = 0;
};

class ResidentStore : public ErrorStore {
 public:
  ResidentStore(std::size_t runs) : data_(runs) {}
  void put(std::size_t run, const std::vector<Vector>& e) override { data_[run] = e; }
  Vector get(std::size_t run, std::size_t k) override { return data_[run][k]; }

 private:
  std::vector<std::vector<Vector>> data_;
};

// Fixed-size blocks [run][checkpoint][pair] of doubles.
class FileStore : public ErrorStore {
 public:
  FileStore(const std::string& path, std::size_t runs, std::size_t checkpoints, std::size_t dim)
      : checkpoints_(checkpoints), dim_(dim) {
    file_.open(path, std::ios::in | std::ios::out | std::ios::binary | std::ios::trunc);
    if (!file_) throw Error(ErrorCategory::io, "cannot open snapshot file " + path);
    (void)runs;
  }
  void put(std::size_t run, const std::vector<Vector>& e) override {
    std::lock_guard<std::mutex> lock(mu_);
    file_.seekp(static_cast<std::streamoff>(offset(run, 0)));
    for (const Vector& v : e) file_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(dim_ * sizeof(double)));
    if (!file_) throw Error(ErrorCategory::io, "snapshot write failed");
  }
  Vector get(std::size_t run, std::size_t k) override {
    std::lock_guard<std::mutex> lock(mu_);
    Vector v(static_cast<Eigen::Index>(dim_));
    file_.seekg(static_cast<std::streamoff>(offset(run, k)));
    file_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim_ * sizeof(double)));
    if (!file_) throw Error(ErrorCategory::io, "snapshot read failed");
    return v;
  }

 private:
  std::size_t offset(std::size_t run, std::size_t k) const { return ((run * checkpoints_) + k) * dim_ * sizeof(double); }
  std::fstream file_;
  std::mutex mu_;
  std::size_t checkpoints_, dim_;
};

}  // namespace

EmpiricalReport monte_carlo(const MdpModel& mdp, const MonteCarloPlan& plan) {
  const int d = mdp.dim();
  plan.validate(d);
  const RunFunction run = [&](std::uint64_t r) {
    const LearnerConfig cfg = run_config(plan, d, r);
    const RunTrace trace = run_learner(mdp, cfg);
    std::vector<Vector> errors;
    errors.reserve(trace.checkpoints.size());
    for (const auto& c : trace.checkpoints) errors.push_back(c.theta - plan.ground_truth);
    return errors;
  };
  return monte_carlo(plan, d, run);
}

EmpiricalReport monte_carlo(const MonteCarloPlan& plan, int dim, const RunFunction& run) {
  plan.validate(dim);
  const std::size_t runs = static_cast<std::size_t>(plan.num_runs);
  const std::size_t nk = plan.checkpoint_grid.size();
  std::unique_ptr<ErrorStore> store;
  if (plan.snapshot_file.empty())
    store = std::make_unique<ResidentStore>(runs);
  else
    store = std::make_unique<FileStore>(plan.snapshot_file, runs, nk, static_cast<std::size_t>(dim));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= runs) return;
      try {
        std::vector<Vector> e = run(r);
        if (e.size() != nk) throw Error(ErrorCategory::internal, "run returned the wrong number of checkpoints");
        store->put(r, e);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(runs);
        return;
      }
    }
  };
  const int nthreads = std::min<int>(plan.workers, plan.num_runs);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Aggregation walks runs in index order, so the result does not depend on scheduling.
  EmpiricalReport rep;
  rep.num_runs = plan.num_runs;
  rep.dim = dim;
  rep.components = plan.components;
  std::vector<std::pair<double, double>> mse_points;
  for (std::size_t k = 0; k < nk; ++k) {
    const long n = plan.checkpoint_grid[k];
    Matrix rows(static_cast<Eigen::Index>(runs), dim);
    for (std::size_t r = 0; r < runs; ++r) rows.row(static_cast<Eigen::Index>(r)) = store->get(r, k).transpose();
    const SampleMoments m = sample_moments(rows);
    CheckpointStats cs;
    cs.n = n;
    cs.scaled_covariance = static_cast<double>(n) * m.covariance;
    cs.trace = cs.scaled_covariance.trace();
    cs.scaled_variance = cs.scaled_covariance.diagonal();
    cs.mean_error = m.mean;
    double mse = 0.0, span = 0.0;
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      mse += rows.row(r).squaredNorm();
      span += rows.row(r).maxCoeff() - rows.row(r).minCoeff();
    }
    cs.mse = mse / static_cast<double>(runs);
    cs.mean_span_error = span / static_cast<double>(runs);
    for (const auto& v : plan.directions)
      cs.direction_variance.push_back((v.adjoint() * cs.scaled_covariance.cast<Complex>() * v)(0, 0).real());
    const double root = std::sqrt(static_cast<double>(n));
    for (int c : plan.components) {
      std::vector<double> s(runs);
      for (std::size_t r = 0; r < runs; ++r) s[r] = root * rows(static_cast<Eigen::Index>(r), c);
      cs.scaled_samples.push_back(std::move(s));
    }
    if (cs.mse > 0.0) mse_points.emplace_back(static_cast<double>(n), cs.mse);
    rep.checkpoints.push_back(std::move(cs));
  }
  if (mse_points.size() >= 2) {
    rep.rate = rate_fit(mse_points);
    rep.rate_available = true;
  }
  return rep;
}

RunFunction gaussian_stub(const Matrix& sigma0, std::uint64_t master_seed, const std::vector<long>& grid,
                          bool identical_seeds) {
  const Eigen::Index d = sigma0.rows();
  // LDLT handles singular PSD inputs.
  Eigen::LDLT<Matrix> ldlt(sigma0);
  if (ldlt.info() != Eigen::Success) throw NumericalError("stub covariance is not PSD");
  Matrix l = ldlt.matrixL();
  const Vector dd = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  const Matrix root = ldlt.transpositionsP().transpose() * l * dd.asDiagonal();
  return [root, d, master_seed, grid, identical_seeds](std::uint64_t r) {
    Rng rng(master_seed, identical_seeds ? 0 : r, Stream::stub);
    Vector z(d);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
    const Vector w = root * z;
    std::vector<Vector> out;
    for (long n : grid) out.push_back(w / std::sqrt(static_cast<double>(n)));
    return out;
  };
}

std::vector<HistogramReport> clt_histogram(const EmpiricalReport& report, int component, double predicted_sigma2) {
  std::size_t slot = report.components.size();
  for (std::size_t k = 0; k < report.components.size(); ++k)
    if (report.components[k] == component) slot = k;
  if (slot == report.components.size())
    throw ValidationError("components", "component was not recorded by the Monte-Carlo plan");
  if (!(predicted_sigma2 >= 0.0)) throw ValidationError("sigma2", "predicted variance must be non-negative");
  std::vector<HistogramReport> out;
  for (const auto& cs : report.checkpoints) {
    const auto& s = cs.scaled_samples[slot];
    HistogramReport h;
    h.n = cs.n;
    h.histogram = freedman_diaconis_histogram(s);
    for (std::size_t b = 0; b + 1 < h.histogram.edges.size(); ++b) {
      const double center = 0.5 * (h.histogram.edges[b] + h.histogram.edges[b + 1]);
      h.pdf_at_center.push_back(predicted_sigma2 > 0.0 ? normal_pdf(center, predicted_sigma2) : 0.0);
    }
    if (predicted_sigma2 == 0.0) {
      h.degenerate_prediction = true;
      bool nonzero = false;
      for (double v : s) nonzero = nonzero || v != 0.0;
      h.ks = nonzero ? 1.0 : 0.0;
    } else {
      h.ks = ks_statistic(s, [predicted_sigma2](double x) { return normal_cdf(x, predicted_sigma2); });
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<HistogramReport> clt_histogram(const MdpModel& mdp, MonteCarloPlan plan, int component,
                                           double predicted_sigma2) {
  plan.components = {component};
  return clt_histogram(monte_carlo(mdp, plan), component, predicted_sigma2);
}

std::vector<std::pair<long, double>> span_error_curve(const RunTrace& trace, const Vector& truth) {
  std::vector<std::pair<long, double>> out;
  for (const auto& c : trace.checkpoints) {
    if (c.theta.size() != truth.size()) throw ValidationError("ground_truth", "ground truth length mismatch");
    out.emplace_back(c.n, span_seminorm(c.theta - truth));
  }
  return out;
}

CovarianceMatch covariance_match(const EmpiricalReport& report, const AsymptoticCovariance& predicted, long at_n) {
  CovarianceMatch m;
  for (const auto& cs : report.checkpoints) m.scaled_traces.emplace_back(cs.n, cs.trace);
  m.trace_increasing = m.scaled_traces.size() >= 2;
  for (std::size_t k = 1; k < m.scaled_traces.size(); ++k)
    m.trace_increasing = m.trace_increasing && m.scaled_traces[k].second > m.scaled_traces[k - 1].second;
  if (!predicted.finite()) {
    m.prediction_infinite = true;
    return m;
  }
  const CheckpointStats* cs = nullptr;
  for (const auto& c : report.checkpoints)
    if (c.n == at_n) cs = &c;
  if (!cs) throw ValidationError("checkpoints", "requested checkpoint is not in the report");
  if (predicted.sigma.rows() != cs->scaled_covariance.rows()) throw ValidationError("dimension", "size mismatch");
  const double tr = predicted.sigma.trace();
  m.trace_error = tr > 0.0 ? std::abs(cs->trace - tr) / tr : std::abs(cs->trace);
  Eigen::SelfAdjointEigenSolver<Matrix> es(predicted.sigma);
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double s = es.eigenvalues()(k);
    const Vector e = es.eigenvectors().col(k);
    const double emp = e.dot(cs->scaled_covariance * e);
    m.direction_errors.push_back(s > 0.0 ? std::abs(emp - s) / s : std::abs(emp));
  }
  return m;
}

}  // namespace relq
