// relq: solve, analyze and simulate relative Q-learning on tabular MDPs.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "relq/analysis.hpp"
#include "relq/artifacts.hpp"
#include "relq/error.hpp"
#include "relq/experiments.hpp"
#include "relq/mdp_io.hpp"

using namespace relq;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string mdp;
  std::optional<double> gamma;
  std::optional<double> delta;
  std::string mu = "uniform";
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string format = "json";
};

struct SimOptions {
  std::string algorithm = "relative";
  std::string step = "optimal";
  std::optional<double> g;
  double shift = 0.0;
  int runs = 100;
  std::vector<long> horizons = {1000, 10000, 100000};
  std::optional<int> workers;
  std::vector<int> components;
  bool zero_init = false;
};

struct GenOptions {
  std::string kind = "garnet";
  int states = 10;
  int actions = 2;
  int branching = 3;
  double gamma = 0.9;
  std::string file = "mdp.json";
};

void add_common(CLI::App* c, Common& o, bool needs_mdp = true) {
  auto* m = c->add_option("--mdp", o.mdp, "MDP JSON file, or builtin:noisy4|ssp6|swap");
  if (needs_mdp) m->required();
  c->add_option("--gamma", o.gamma, "override the discount factor");
  c->add_option("--delta", o.delta, "relative offset gain (default: gamma)");
  c->add_option("--mu", o.mu, "reference pmf: uniform or point:<pair>");
  c->add_option("--seed", o.seed, "master seed");
  c->add_option("--out", o.out, "output directory (created if absent)");
  c->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

void add_sim(CLI::App* c, SimOptions& o) {
  c->add_option("--algorithm", o.algorithm, "watkins, sync or relative");
  c->add_option("--step", o.step, "optimal, per_pair, global or shifted");
  c->add_option("--g", o.g, "step gain; overrides the optimal gain");
  c->add_option("--shift", o.shift, "step shift for per_pair and shifted rules");
  c->add_option("--runs", o.runs, "independent runs")->check(CLI::PositiveNumber);
  c->add_option("--horizons", o.horizons, "checkpoint grid; the last entry is the horizon")->delimiter(',');
  c->add_option("--workers", o.workers, "worker threads (fallback: RELQ_WORKERS)")->check(CLI::PositiveNumber);
  c->add_option("--components", o.components, "pairs for CLT histograms")->delimiter(',');
  c->add_flag("--zero-init", o.zero_init, "start every run at zero instead of a random table");
}

MdpModel load(const Common& o) {
  MdpModel m = [&] {
    const double g0 = o.gamma.value_or(0.9);
    if (o.mdp == "builtin:noisy4") return noisy4(g0);
    if (o.mdp == "builtin:ssp6") return ssp6(g0);
    if (o.mdp == "builtin:swap") return swap_chain(g0, (Vector(2) << 1, 0).finished());
    if (o.mdp.rfind("builtin:", 0) == 0) throw ValidationError("mdp", "unknown builtin '" + o.mdp + "'");
    return load_mdp(o.mdp);
  }();
  if (o.gamma) m = m.with_discount(*o.gamma);
  return m;
}

RelativeQSpec make_spec(const Common& o, const MdpModel& m) {
  const double delta = o.delta.value_or(m.discount());
  RelativeQSpec s;
  if (o.mu == "uniform") {
    s = RelativeQSpec::uniform(m.dim(), delta);
  } else if (o.mu.rfind("point:", 0) == 0) {
    int i = -1;
    try {
      std::size_t used = 0;
      i = std::stoi(o.mu.substr(6), &used);
      if (used != o.mu.size() - 6) i = -1;
    } catch (const std::exception&) {
    }
    if (i < 0 || i >= m.dim()) throw ValidationError("mu", "--mu point index must be a pair in [0, " + std::to_string(m.dim()) + ")");
    s = RelativeQSpec::point(m.dim(), i, delta);
  } else {
    throw ValidationError("mu", "--mu must be 'uniform' or 'point:<i>'");
  }
  s.validate(m.dim());
  return s;
}

void prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCategory::io, "cannot create output directory " + dir);
}

std::string path(const Common& o, const std::string& name) { return (fs::path(o.out) / name).string(); }

void write_vector_csv(const std::string& p, const MdpModel& m, const Vector& v) {
  std::string s = "pair,state,action,value\n";
  for (int i = 0; i < m.dim(); ++i)
    s += std::to_string(i) + "," + std::to_string(m.state_of(i)) + "," + std::to_string(m.action_of(i)) + "," +
         format_double(v(i)) + "\n";
  write_text(p, s);
}

int workers_from(const SimOptions& s) {
  if (s.workers) return *s.workers;
  if (const char* env = std::getenv("RELQ_WORKERS")) {
    char* end = nullptr;
    const long w = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || w < 1) throw ValidationError("workers", "RELQ_WORKERS must be a positive integer");
    return static_cast<int>(w);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- solve
void cmd_solve(const Common& o) {
  const MdpModel m = load(o);
  const RelativeQSpec spec = make_spec(o, m);
  prepare_out(o.out);
  const QTable q = solve_q_star(m);
  const HTable h = solve_h_star(m, spec, q);
  write_json(path(o, "qstar.json"), to_json(q, m));
  write_json(path(o, "hstar.json"), to_json(h, m, spec));
  if (o.format == "csv") {
    write_vector_csv(path(o, "qstar.csv"), m, q.values);
    write_vector_csv(path(o, "hstar.csv"), m, h.values);
  }
  std::cout << "Q* residual " << q.residual << ", H* residual " << h.residual << ", k " << h.k << "\n";
}

// ---------------------------------------------------------------- analyze
void cmd_analyze(const Common& o) {
  const MdpModel m = load(o);
  AnalysisOptions opt;
  opt.spec = make_spec(o, m);
  prepare_out(o.out);
  const AnalysisReport r = analyze(m, opt);
  write_json(path(o, "analysis.json"), to_json(r));
  write_eigenvalues_csv(path(o, "eigenvalues.csv"), r);
  if (o.format == "csv") {
    write_matrix_csv(path(o, "sigma_q.csv"), r.sigma_q.finite() ? r.sigma_q.sigma : Matrix());
    write_matrix_csv(path(o, "sigma_h.csv"), r.sigma_h.finite() ? r.sigma_h.sigma : Matrix());
  }
  auto tr = [](const AsymptoticCovariance& c) {
    std::ostringstream s;
    if (c.finite()) s << std::setprecision(6) << c.trace() + 0.0;
    else s << "inf";
    return s.str();
  };
  std::cout << std::left;
  auto row = [](const std::string& k, const std::string& v) { std::cout << "  " << std::setw(16) << k << v << "\n"; };
  auto num = [](double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
  };
  row("gamma", num(m.discount()));
  row("delta", num(r.spec.delta));
  row("rho", num(r.spectral.rho));
  row("rho*", num(r.spectral.rho_star));
  row("g_q", num(r.gains.g_q));
  row("g_h", num(r.gains.g_h));
  row("trace Sigma_q", tr(r.sigma_q));
  row("trace Sigma_h", tr(r.sigma_h));
  row("verdict q", to_string(r.sigma_q.verdict));
  row("verdict h", to_string(r.sigma_h.verdict));
  row("Q1 Q2 Q3", std::string(r.diagnosis_h.conditions.q1 ? "T " : "F ") + (r.diagnosis_h.conditions.q2 ? "T " : "F ") +
                      (r.diagnosis_h.conditions.q3 ? "T" : "F"));
  for (const auto& w : r.warnings) std::cout << (w.rfind("warning:", 0) == 0 ? "" : "warning: ") << w << "\n";
}

// ---------------------------------------------------------------- simulation helpers
struct Resolved {
  LearnerConfig config;
  Vector truth;
  std::string gain_source;
  std::optional<AnalysisReport> analysis;
};

Resolved resolve(const Common& o, const SimOptions& s, const MdpModel& m) {
  Resolved r;
  LearnerConfig& c = r.config;
  c.algorithm = parse_algorithm(s.algorithm);
  const RelativeQSpec spec = make_spec(o, m);
  if (s.horizons.empty()) throw ValidationError("horizons", "--horizons needs at least one checkpoint");
  for (std::size_t k = 0; k < s.horizons.size(); ++k)
    if (s.horizons[k] < 1 || (k && s.horizons[k] <= s.horizons[k - 1]))
      throw ValidationError("horizons", "--horizons must be positive and strictly increasing");
  for (int i : s.components)
    if (i < 0 || i >= m.dim()) throw ValidationError("pair", "--components entry out of range");
  if (!(s.shift >= 0.0)) throw ValidationError("step", "--shift must be non-negative");

  c.behavior = RandomizedPolicy::uniform(m.num_states(), m.num_actions());
  c.horizon = s.horizons.back();
  c.seed = o.seed;
  if (c.algorithm == Algorithm::relative_async) c.spec = spec;

  AnalysisOptions ao;
  ao.spec = spec;
  ao.noise = c.algorithm == Algorithm::watkins_sync ? NoiseModel::synchronous : NoiseModel::async_per_pair;
  if (s.step == "optimal") {
    c.step.kind = StepSizeRule::Kind::per_pair_count;
  } else {
    c.step.kind = parse_step_kind(s.step);
    if (c.step.kind == StepSizeRule::Kind::global_over_n && c.algorithm != Algorithm::watkins_sync)
      ao.noise = NoiseModel::async_global;
  }
  c.step.shift = s.shift;
  r.analysis = analyze(m, ao);
  r.truth = c.algorithm == Algorithm::relative_async ? r.analysis->h.values : r.analysis->q.values;
  if (s.g) {
    c.step.g = *s.g;
    r.gain_source = "explicit";
  } else if (c.algorithm == Algorithm::relative_async) {
    c.step.g = r.analysis->gains.g_h;
    r.gain_source = "g_h";
  } else {
    c.step.g = r.analysis->gains.g_q;
    r.gain_source = "g_q";
  }
  c.step.validate();
  return r;
}

// Prediction matching the configured learner, rebuilt at the resolved gain.
std::optional<AsymptoticCovariance> predicted(const Resolved& r) {
  if (r.config.step.kind == StepSizeRule::Kind::shifted_global) return std::nullopt;
  const AnalysisReport& a = *r.analysis;
  const Matrix& am = r.config.algorithm == Algorithm::relative_async ? a.a_h.a : a.a_q.a;
  Matrix f = am;
  if (r.config.step.kind == StepSizeRule::Kind::global_over_n && r.config.algorithm != Algorithm::watkins_sync)
    f = a.pi.asDiagonal() * am;
  return asymptotic_covariance(f, a.sigma_delta, r.config.step.g);
}

MonteCarloPlan make_plan(const Common& o, const SimOptions& s, const Resolved& r) {
  MonteCarloPlan p;
  p.base_config = r.config;
  p.num_runs = s.runs;
  p.checkpoint_grid = s.horizons;
  p.ground_truth = r.truth;
  p.master_seed = o.seed;
  p.components = s.components;
  p.random_init = !s.zero_init;
  p.workers = workers_from(s);
  return p;
}

nlohmann::json plan_document(const MonteCarloPlan& p, const Resolved& r, const MdpModel& m, const Common& o) {
  nlohmann::json j = to_json(p);
  j["provenance"] = {{"mdp", o.mdp},
                     {"discount", m.discount()},
                     {"step_gain", r.config.step.g},
                     {"step_gain_source", r.gain_source},
                     {"g_q", r.analysis->gains.g_q},
                     {"g_h", r.analysis->gains.g_h}};
  return j;
}

// ---------------------------------------------------------------- learn
void cmd_learn(const Common& o, const SimOptions& s) {
  const MdpModel m = load(o);
  Resolved r = resolve(o, s, m);
  prepare_out(o.out);
  r.config.checkpoints = s.horizons;
  if (!s.zero_init) {
    MonteCarloPlan p = make_plan(o, s, r);
    r.config = run_config(p, m.dim(), 0);
  }
  const RunTrace t = run_learner(m, r.config);
  nlohmann::json cfg = to_json(r.config);
  cfg["step_gain_source"] = r.gain_source;
  write_trace_csv(path(o, "trace.csv"), t, cfg);
  std::string span = "n,span_error\n";
  for (const auto& [n, e] : span_error_curve(t, r.truth)) span += std::to_string(n) + "," + format_double(e) + "\n";
  write_text(path(o, "span_error.csv"), span);
  write_json(path(o, "final.json"), {{"config", cfg},
                                     {"final_table", to_json(t.final_table)},
                                     {"ground_truth", to_json(r.truth)},
                                     {"visit_counts", t.visit_counts},
                                     {"span_error", span_seminorm(t.final_table - r.truth)}});
  std::cout << to_string(r.config.algorithm) << " g=" << r.config.step.g << " (" << r.gain_source
            << "), final span error " << span_seminorm(t.final_table - r.truth) << "\n";
}

// ---------------------------------------------------------------- montecarlo
void cmd_montecarlo(const Common& o, const SimOptions& s) {
  const MdpModel m = load(o);
  const Resolved r = resolve(o, s, m);
  MonteCarloPlan p = make_plan(o, s, r);
  p.validate(m.dim());
  prepare_out(o.out);
  const EmpiricalReport rep = monte_carlo(m, p);
  const std::optional<AsymptoticCovariance> pred = predicted(r);
  std::vector<HistogramRequest> hist;
  for (int i : s.components) hist.push_back({i, pred && pred->finite() ? pred->sigma(i, i) : 0.0});
  write_experiment_files(o.out, rep, plan_document(p, r, m, o), hist, pred ? &*pred : nullptr);
  std::cout << to_string(r.config.algorithm) << " g=" << r.config.step.g << " (" << r.gain_source << "), "
            << p.num_runs << " runs\n";
  for (const auto& c : rep.checkpoints)
    std::cout << "  n=" << c.n << "  n*trace " << c.trace << "  mse " << c.mse << "  span " << c.mean_span_error << "\n";
  if (pred) std::cout << "  predicted trace " << (pred->finite() ? std::to_string(pred->trace()) : "inf") << "\n";
}

// ---------------------------------------------------------------- compare
void cmd_compare(const Common& o, SimOptions s) {
  const MdpModel m = load(o);
  SimOptions sr = s, sw = s;
  sr.algorithm = "relative";
  sw.algorithm = "watkins";
  Resolved rr = resolve(o, sr, m);
  Resolved rw = resolve(o, sw, m);
  // Same gain for both learners: g_h unless --g is given.
  rw.config.step.g = rr.config.step.g;
  rw.gain_source = rr.gain_source;
  prepare_out(o.out);
  const MonteCarloPlan pr = make_plan(o, sr, rr), pw = make_plan(o, sw, rw);
  pr.validate(m.dim());
  const EmpiricalReport er = monte_carlo(m, pr), ew = monte_carlo(m, pw);
  const auto qr = predicted(rr), qw = predicted(rw);
  write_experiment_files(path(o, "relative"), er, plan_document(pr, rr, m, o), {}, qr ? &*qr : nullptr);
  write_experiment_files(path(o, "watkins"), ew, plan_document(pw, rw, m, o), {}, qw ? &*qw : nullptr);
  std::string csv = "n,watkins_span_error,relative_span_error,ratio\n";
  std::cout << "gain " << rr.config.step.g << " (" << rr.gain_source << ")\n";
  for (std::size_t k = 0; k < er.checkpoints.size(); ++k) {
    const double a = ew.checkpoints[k].mean_span_error, b = er.checkpoints[k].mean_span_error;
    csv += std::to_string(er.checkpoints[k].n) + "," + format_double(a) + "," + format_double(b) + "," +
           format_double(a / b) + "\n";
    std::cout << "  n=" << er.checkpoints[k].n << "  watkins " << a << "  relative " << b << "  ratio " << a / b << "\n";
  }
  write_text(path(o, "compare.csv"), csv);
}

// ---------------------------------------------------------------- gen-mdp
void cmd_gen(const Common& o, const GenOptions& g) {
  MdpModel m = [&] {
    if (g.kind == "garnet") {
      RandomMdpOptions ro;
      ro.num_states = g.states;
      ro.num_actions = g.actions;
      ro.branching = g.branching;
      ro.discount = g.gamma;
      return random_mdp(o.seed, ro);
    }
    if (g.kind == "ssp6") return ssp6(g.gamma);
    if (g.kind == "noisy4") return noisy4(g.gamma);
    throw ValidationError("mdp", "unknown generator '" + g.kind + "'");
  }();
  prepare_out(o.out);
  save_mdp(m, path(o, g.file));
  std::cout << "wrote " << path(o, g.file) << " (" << m.num_states() << " states, " << m.num_actions() << " actions)\n";
}

int fail(ErrorCategory c, const std::string& msg) {
  std::string line = msg;
  for (char& ch : line)
    if (ch == '\n') ch = ' ';
  std::cerr << "error:" << category_name(c) << ":" << line << "\n";
  return c == ErrorCategory::validation || c == ErrorCategory::io ? 2 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relq: relative Q-learning toolkit"};
  app.require_subcommand(1);
  Common common;
  SimOptions sim;
  GenOptions gen;

  auto* solve = app.add_subcommand("solve", "solve for Q* and H*");
  add_common(solve, common);
  auto* an = app.add_subcommand("analyze", "spectra, gains and asymptotic covariances");
  add_common(an, common);
  auto* learn = app.add_subcommand("learn", "one learner run with checkpoints");
  add_common(learn, common);
  add_sim(learn, sim);
  auto* mc = app.add_subcommand("montecarlo", "independent runs with covariance and rate estimates");
  add_common(mc, common);
  add_sim(mc, sim);
  auto* cmp = app.add_subcommand("compare", "Watkins vs relative span error at the same gain");
  add_common(cmp, common);
  add_sim(cmp, sim);
  auto* gm = app.add_subcommand("gen-mdp", "write a generated MDP file");
  gm->add_option("kind", gen.kind, "garnet, ssp6 or noisy4");
  gm->add_option("--states", gen.states, "garnet states")->check(CLI::PositiveNumber);
  gm->add_option("--actions", gen.actions, "garnet actions")->check(CLI::PositiveNumber);
  gm->add_option("--branching", gen.branching, "garnet successors per pair")->check(CLI::PositiveNumber);
  gm->add_option("--gamma", gen.gamma, "discount factor");
  gm->add_option("--seed", common.seed, "generator seed");
  gm->add_option("--out", common.out, "output directory");
  gm->add_option("--file", gen.file, "file name inside --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(ErrorCategory::validation, e.what());
  }

  try {
    if (*solve) cmd_solve(common);
    else if (*an) cmd_analyze(common);
    else if (*learn) cmd_learn(common, sim);
    else if (*mc) cmd_montecarlo(common, sim);
    else if (*cmp) cmd_compare(common, sim);
    else if (*gm) cmd_gen(common, gen);
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(ErrorCategory::validation, e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCategory::internal, e.what());
  }
  return 0;
}
