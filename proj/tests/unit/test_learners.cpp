#include <doctest.h>

#include <map>

#include "helpers.hpp"
#include "relq/error.hpp"
#include "relq/learners.hpp"

using namespace relq;
using testutil::vec;

namespace {

LearnerConfig config(const MdpModel& m, Algorithm alg, StepSizeRule rule, long horizon, std::uint64_t seed = 5) {
  LearnerConfig c;
  c.algorithm = alg;
  c.step = rule;
  c.behavior = RandomizedPolicy::uniform(m.num_states(), m.num_actions());
  c.horizon = horizon;
  c.seed = seed;
  return c;
}

// Three states, action 0 moves right cyclically, action 1 stays.
MdpModel deterministic3(double gamma) {
  Matrix p0 = Matrix::Zero(3, 3), p1 = Matrix::Identity(3, 3);
  p0(0, 1) = p0(1, 2) = p0(2, 0) = 1;
  Matrix c(3, 2);
  c << 1, 2, 0.5, 0.25, 3, 1;
  return MdpModel::create({p0, p1}, c, gamma);
}

bool same_trace(const RunTrace& a, const RunTrace& b) {
  if (a.checkpoints.size() != b.checkpoints.size() || a.visit_counts != b.visit_counts) return false;
  for (std::size_t k = 0; k < a.checkpoints.size(); ++k)
    if (a.checkpoints[k].n != b.checkpoints[k].n || a.checkpoints[k].theta != b.checkpoints[k].theta) return false;
  return a.final_table == b.final_table;
}

}  // namespace

TEST_CASE("step size rules") {
  CHECK(step_size(StepSizeRule::global(2.0), 4, 1) == 0.5);
  CHECK(step_size(StepSizeRule::per_pair(3.0), 100, 6) == 0.5);
  CHECK(step_size(StepSizeRule::per_pair(3.0), 100, 0) == 0.0);
  CHECK(step_size(StepSizeRule::per_pair(10.0, 10.0), 100, 1) == 10.0 / 11.0);
  CHECK(step_size(StepSizeRule::shifted(1.0, 9.0), 1, 1) == 0.1);
  CHECK_THROWS_AS(StepSizeRule::per_pair(0.0).validate(), ValidationError);
  CHECK_THROWS_AS(StepSizeRule::shifted(1.0, -1.0).validate(), ValidationError);
  CHECK(parse_algorithm("relative") == Algorithm::relative_async);
  CHECK(parse_algorithm("watkins_sync") == Algorithm::watkins_sync);
  CHECK_THROWS_AS(parse_algorithm("zap"), ValidationError);
}

TEST_CASE("gamma = 0 learners average the constant cost") {
  const MdpModel m = noisy4(0.0);
  const RunTrace a = run_watkins_async(m, config(m, Algorithm::watkins_async, StepSizeRule::per_pair(1.0), 20000));
  for (int i = 0; i < m.dim(); ++i) {
    REQUIRE(a.visit_counts[i] > 0);
    CHECK(a.final_table(i) == m.cost_vector()(i));
  }
  const RunTrace s = run_watkins_sync(m, config(m, Algorithm::watkins_sync, StepSizeRule::global(1.0), 500));
  CHECK(s.final_table == m.cost_vector());
  for (long v : s.visit_counts) CHECK(v == 500);
}

TEST_CASE("learners are deterministic in the seed") {
  const MdpModel m = noisy4(0.9);
  for (Algorithm alg : {Algorithm::watkins_async, Algorithm::watkins_sync, Algorithm::relative_async}) {
    LearnerConfig c = config(m, alg, StepSizeRule::per_pair(2.0), 5000);
    c.checkpoints = {0, 10, 1000, 5000};
    if (alg == Algorithm::relative_async) c.spec = RelativeQSpec::uniform(m.dim(), 0.9);
    const RunTrace a = run_learner(m, c), b = run_learner(m, c);
    CHECK(same_trace(a, b));
    REQUIRE(a.checkpoints.size() == 4);
    CHECK(a.checkpoints[0].theta.isZero(0.0));
    c.seed = 6;
    CHECK_FALSE(same_trace(a, run_learner(m, c)));
    c.seed = 5;
    c.run_index = 1;
    CHECK_FALSE(same_trace(a, run_learner(m, c)));
  }
}

TEST_CASE("visit counts sum to the horizon") {
  const MdpModel m = noisy4(0.9);
  const RunTrace a = run_watkins_async(m, config(m, Algorithm::watkins_async, StepSizeRule::per_pair(1.0), 12345));
  long total = 0;
  for (long v : a.visit_counts) total += v;
  CHECK(total == 12345);
  const RunTrace s = run_watkins_sync(m, config(m, Algorithm::watkins_sync, StepSizeRule::global(1.0), 77));
  total = 0;
  for (long v : s.visit_counts) total += v;
  CHECK(total == 77 * m.dim());
}

TEST_CASE("swap chain convergence") {
  const MdpModel m = swap_chain(0.5, vec({1, 0}));
  LearnerConfig c = config(m, Algorithm::watkins_async, StepSizeRule::per_pair(2.0), 1000000);
  CHECK((run_watkins_async(m, c).final_table - vec({4.0 / 3.0, 2.0 / 3.0})).lpNorm<Eigen::Infinity>() < 0.05);

  c.algorithm = Algorithm::relative_async;
  c.spec = RelativeQSpec::uniform(2, 1.0);
  c.step = StepSizeRule::per_pair(1.0 / 1.5);
  const HTable h = solve_h_star(m, *c.spec);
  CHECK((run_relative_async(m, c).final_table - h.values).lpNorm<Eigen::Infinity>() < 0.05);
  CHECK((h.values - vec({2.0 / 3.0, 0.0})).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("relative learner with delta = 0 replays Watkins") {
  const MdpModel m = noisy4(0.9);
  LearnerConfig w = config(m, Algorithm::watkins_async, StepSizeRule::per_pair(1.0), 20000);
  w.checkpoints = {100, 20000};
  LearnerConfig r = w;
  r.algorithm = Algorithm::relative_async;
  r.spec = RelativeQSpec::uniform(m.dim(), 0.0);
  CHECK(same_trace(run_watkins_async(m, w), run_relative_async(m, r)));
  CHECK_THROWS_AS(run_watkins_async(m, r), ValidationError);
}

TEST_CASE("a constant shift of the initial table") {
  const MdpModel m = noisy4(0.9);
  const double kappa = 3.75;
  SUBCASE("synchronous: greedy policy identical at every checkpoint") {
    LearnerConfig c = config(m, Algorithm::watkins_sync, StepSizeRule::global(1.0), 2000);
    c.checkpoints = {0, 1, 2, 5, 10, 100, 1000, 2000};
    const RunTrace a = run_watkins_sync(m, c);
    c.initial_table = Vector::Constant(m.dim(), kappa);
    const RunTrace b = run_watkins_sync(m, c);
    for (std::size_t k = 0; k < a.checkpoints.size(); ++k) {
      CHECK(greedy_policy(a.checkpoints[k].theta, 2).action_of == greedy_policy(b.checkpoints[k].theta, 2).action_of);
      CHECK(span_seminorm(a.checkpoints[k].theta - b.checkpoints[k].theta) < 1e-9);
    }
  }
  SUBCASE("relative, delta = 0: same pair trajectory and same final greedy policy") {
    LearnerConfig c = config(m, Algorithm::relative_async, StepSizeRule::per_pair(10.0), 200000);
    c.spec = RelativeQSpec::uniform(m.dim(), 0.0);
    std::vector<int> pa, pb;
    const RunTrace a = run_relative_async(m, c, [&](const StepEvent& e) { pa.push_back(e.pair); });
    c.initial_table = Vector::Constant(m.dim(), kappa);
    const RunTrace b = run_relative_async(m, c, [&](const StepEvent& e) { pb.push_back(e.pair); });
    CHECK(pa == pb);
    CHECK(greedy_policy(a.final_table, 2).action_of == greedy_policy(b.final_table, 2).action_of);
  }
}

TEST_CASE("synchronous replay on a deterministic MDP") {
  const MdpModel m = deterministic3(0.5);
  LearnerConfig c = config(m, Algorithm::watkins_sync, StepSizeRule::global(1.0), 300);
  c.checkpoints = {1, 17, 300};
  const RunTrace t = run_watkins_sync(m, c);
  // Hand-rolled recursion with the successor table.
  const int next[3][2] = {{1, 0}, {2, 1}, {0, 2}};
  Vector th = Vector::Zero(6);
  std::map<long, Vector> snap;
  for (long n = 1; n <= 300; ++n) {
    Vector nx(6);
    for (int x = 0; x < 3; ++x)
      for (int u = 0; u < 2; ++u) {
        const int y = next[x][u];
        const double mn = std::min(th(2 * y), th(2 * y + 1));
        const double td = m.cost()(x, u) + 0.5 * mn - th(2 * x + u);
        nx(2 * x + u) = th(2 * x + u) + (1.0 / static_cast<double>(n)) * td;
      }
    th = nx;
    snap[n] = th;
  }
  for (const Checkpoint& cp : t.checkpoints) CHECK(cp.theta == snap[cp.n]);
}

TEST_CASE("step sizes replay the visit counts") {
  const MdpModel m = noisy4(0.9);
  std::vector<long> counts(m.dim(), 0);
  bool ok = true;
  const RunTrace t = run_watkins_async(m, config(m, Algorithm::watkins_async, StepSizeRule::per_pair(1.0), 50000),
                                       [&](const StepEvent& e) {
                                         ++counts[e.pair];
                                         ok = ok && e.count == counts[e.pair] && e.alpha == 1.0 / counts[e.pair];
                                       });
  CHECK(ok);
  CHECK(counts == t.visit_counts);
}

TEST_CASE("temporal difference") {
  SUBCASE("zero at the fixed point of a deterministic MDP") {
    const MdpModel m = deterministic3(0.8);
    const Vector q = solve_q_star(m).values;
    const int next[3][2] = {{1, 0}, {2, 1}, {0, 2}};
    const RelativeQSpec spec = RelativeQSpec::uniform(6, 0.8);
    const Vector h = solve_h_star(m, spec).values;
    for (int x = 0; x < 3; ++x)
      for (int u = 0; u < 2; ++u) {
        CHECK(std::abs(temporal_difference(q, 2 * x + u, next[x][u], m)) < 1e-10);
        CHECK(std::abs(temporal_difference(h, 2 * x + u, next[x][u], m, &spec)) < 1e-10);
      }
  }
  SUBCASE("zero mean at Q* on a stochastic MDP") {
    const MdpModel m = noisy4(0.9);
    const Vector q = solve_q_star(m).values;
    for (int i = 0; i < m.dim(); ++i) {
      double mean = 0;
      for (int y = 0; y < 4; ++y) mean += m.pair_to_state()(i, y) * temporal_difference(q, i, y, m);
      CHECK(std::abs(mean) < 1e-10);
    }
  }
  SUBCASE("argument checks") {
    const MdpModel m = noisy4(0.9);
    CHECK_THROWS_AS(temporal_difference(Vector::Zero(8), 8, 0, m), ValidationError);
    CHECK_THROWS_AS(temporal_difference(Vector::Zero(8), 0, 4, m), ValidationError);
  }
}

TEST_CASE("noise is a martingale difference along a trajectory") {
  const MdpModel m = noisy4(0.9);
  const Vector q = solve_q_star(m).values;
  const int d = m.dim();
  std::vector<double> s(d, 0), s2(d, 0);
  std::vector<long> n(d, 0);
  run_watkins_async(m, config(m, Algorithm::watkins_async, StepSizeRule::per_pair(1.0), 400000),
                    [&](const StepEvent& e) {
                      const double td = temporal_difference(q, e.pair, e.next_state, m);
                      s[e.pair] += td;
                      s2[e.pair] += td * td;
                      ++n[e.pair];
                    });
  for (int i = 0; i < d; ++i) {
    REQUIRE(n[i] > 1000);
    const double mean = s[i] / n[i];
    const double sd = std::sqrt(std::max(0.0, s2[i] / n[i] - mean * mean));
    CHECK(std::abs(mean) <= 3 * sd / std::sqrt(static_cast<double>(n[i])) + 1e-12);
  }
}

TEST_CASE("relative learner error shrinks with the horizon") {
  const MdpModel m = noisy4(0.9);
  const RelativeQSpec spec = RelativeQSpec::uniform(m.dim(), 0.9);
  const Vector h = solve_h_star(m, spec).values;
  LearnerConfig c = config(m, Algorithm::relative_async, StepSizeRule::per_pair(2.0), 1000000);
  c.spec = spec;
  c.checkpoints = {10000, 100000, 1000000};
  double e[3] = {0, 0, 0};
  for (std::uint64_t r = 0; r < 4; ++r) {
    c.run_index = r;
    const RunTrace t = run_relative_async(m, c);
    for (int k = 0; k < 3; ++k) e[k] += (t.checkpoints[k].theta - h).lpNorm<Eigen::Infinity>();
  }
  CHECK(e[1] < e[0]);
  CHECK(e[2] < e[1]);
}

TEST_CASE("learner config validation") {
  const MdpModel m = noisy4(0.9);
  LearnerConfig c = config(m, Algorithm::watkins_async, StepSizeRule::per_pair(1.0), 0);
  CHECK_THROWS_AS(run_watkins_async(m, c), ValidationError);
  c.horizon = 10;
  c.checkpoints = {5, 5};
  CHECK_THROWS_AS(run_watkins_async(m, c), ValidationError);
  c.checkpoints = {11};
  CHECK_THROWS_AS(run_watkins_async(m, c), ValidationError);
  c.checkpoints = {};
  c.initial_table = Vector::Zero(3);
  CHECK_THROWS_AS(run_watkins_async(m, c), ValidationError);
  c.initial_table = Vector();
  c.algorithm = Algorithm::relative_async;
  CHECK_THROWS_AS(run_relative_async(m, c), ValidationError);
  c.algorithm = Algorithm::watkins_async;
  c.behavior = RandomizedPolicy::from(DeterministicPolicy{{0, 0, 0, 0}}, 2);
  c.strict_q1 = true;
  CHECK_THROWS_AS(run_watkins_async(m, c), ValidationError);
  c.strict_q1 = false;
  CHECK_NOTHROW(run_watkins_async(m, c));
}
