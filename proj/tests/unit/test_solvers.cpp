#include <doctest.h>

#include "helpers.hpp"
#include "relq/error.hpp"
#include "relq/random.hpp"

using namespace relq;
using testutil::vec;

TEST_CASE("gamma = 0 gives Q* = c exactly") {
  const MdpModel m = noisy4(0.0);
  const QTable q = solve_q_star(m);
  CHECK((q.values.array() == m.cost_vector().array()).all());
}

TEST_CASE("swap chain closed form") {
  // Q1 = 1 + g Q2, Q2 = g Q1 with g = 1/2: Q1 = 4/3, Q2 = 2/3.
  const MdpModel m = swap_chain(0.5, vec({1, 0}));
  const QTable q = solve_q_star(m);
  CHECK(std::abs(q.values(0) - 4.0 / 3.0) < 1e-10);
  CHECK(std::abs(q.values(1) - 2.0 / 3.0) < 1e-10);
  CHECK(q.residual <= 1e-10);
}

TEST_CASE("value iteration matches policy iteration on random MDPs") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MdpModel m = random_mdp(seed, {5, 3, 3, 0.0, 1.0, 0.95});
    const QTable q = solve_q_star(m);
    CHECK((q.values - testutil::policy_iteration_q(m)).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(q_bellman_residual(m, q.values) <= 1e-10);
  }
}

TEST_CASE("solver errors") {
  const MdpModel m = noisy4(0.9);
  CHECK_THROWS_AS(solve_q_star(m, 0.0), ValidationError);
  CHECK_THROWS_AS(solve_q_star(m, -1.0), ValidationError);
  try {
    solve_q_star(m.with_discount(0.999), 1e-10, 3);
    FAIL("expected the cap to trigger");
  } catch (const SolverError& e) {
    CHECK(e.iterations() == 3);
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("greedy policy tie-breaking") {
  CHECK(greedy_policy(vec({1, 1, 2, 2}), 2).action_of == std::vector<int>{0, 0});
  CHECK(greedy_policy(vec({3, 1, 5, -1}), 2).action_of == std::vector<int>{1, 1});
  const MdpModel m = swap_chain(0.5, vec({1, 0}));
  CHECK(greedy_policy(solve_q_star(m).values, 1).action_of == std::vector<int>{0, 0});
  const Vector margins = action_margins(vec({1, 1.5, 2, 2}), 2);
  CHECK(margins(0) == doctest::Approx(0.5));
  CHECK(margins(1) == 0.0);
}

TEST_CASE("span seminorm") {
  CHECK(span_seminorm(Vector::Constant(4, 3.0)) == 0.0);
  CHECK(span_seminorm(vec({1, 0})) == 1.0);
  const Vector v = vec({0.3, -2, 5, 1});
  CHECK(span_seminorm(v.array() + 7.5) == doctest::Approx(span_seminorm(v)).epsilon(1e-15));
}

TEST_CASE("relative Bellman operator on constants") {
  const MdpModel m = noisy4(0.9);
  const RelativeQSpec spec = RelativeQSpec::uniform(m.dim(), 0.4);
  const double kappa = 2.5;
  const Vector t = relative_bellman_operator(Vector::Constant(m.dim(), kappa), m, spec);
  const Vector expected = m.cost_vector().array() + 0.9 * kappa - 0.4 * kappa;
  CHECK((t - expected).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("swap chain H* closed form") {
  // k = delta/(1+delta-gamma) <mu,Q*> = 1/1.5 * 1 = 2/3, H* = Q* - k = [2/3, 0].
  const MdpModel m = swap_chain(0.5, vec({1, 0}));
  const RelativeQSpec spec = RelativeQSpec::uniform(2, 1.0);
  const HTable h = solve_h_star(m, spec);
  CHECK(std::abs(h.k - 2.0 / 3.0) < 1e-10);
  CHECK(std::abs(h.values(0) - 2.0 / 3.0) < 1e-10);
  CHECK(std::abs(h.values(1)) < 1e-10);
  // By hand: T H = c + 0.5 * swap(H) - <mu,H> = [1 + 0 - 1/3, 0 + 1/3 - 1/3].
  const Vector t = relative_bellman_operator(vec({2.0 / 3.0, 0.0}), m, spec);
  CHECK(std::abs(t(0) - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(t(1)) < 1e-15);
}

TEST_CASE("relative solution properties on random MDPs") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const double gamma = 0.5 + 0.03 * static_cast<double>(seed);
    const MdpModel m = random_mdp(seed, {4, 3, 3, 0.0, 2.0, gamma});
    const RelativeQSpec spec = seed % 2 ? RelativeQSpec::uniform(m.dim(), gamma) : RelativeQSpec::point(m.dim(), 0, 0.7);
    const QTable q = solve_q_star(m);
    const HTable h = solve_h_star(m, spec, q);
    CHECK(h.residual <= 1e-10);
    CHECK(relative_bellman_residual(m, spec, h.values) <= 1e-10);
    const double k = spec.delta / (1 + spec.delta - gamma) * spec.mu.dot(q.values);
    CHECK((h.values - (q.values.array() - k).matrix()).lpNorm<Eigen::Infinity>() <= 1e-9);
    // delta <mu, H*> / (1 - gamma) = k
    CHECK(std::abs(spec.delta * spec.mu.dot(h.values) / (1 - gamma) - k) < 1e-8 * std::max(1.0, std::abs(k)));
    CHECK(greedy_policy(h.values, 3).action_of == greedy_policy(q.values, 3).action_of);
  }
}

TEST_CASE("relative Bellman operator contracts in span") {
  Rng rng(99, 0, Stream::generator);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const MdpModel m = random_mdp(seed, {5, 2, 3, 0.0, 1.0, 0.9});
    const RelativeQSpec spec = RelativeQSpec::uniform(m.dim(), 0.9);
    for (int rep = 0; rep < 100; ++rep) {
      Vector a(m.dim()), b(m.dim());
      for (int i = 0; i < m.dim(); ++i) {
        a(i) = rng.uniform(-5, 5);
        b(i) = rng.uniform(-5, 5);
      }
      const double lhs = span_seminorm(relative_bellman_operator(a, m, spec) - relative_bellman_operator(b, m, spec));
      CHECK(lhs <= 0.9 * span_seminorm(a - b) + 1e-12);
    }
  }
}

TEST_CASE("H* stays bounded while Q* grows with gamma") {
  const MdpModel base = noisy4(0.9);
  double h_first = 0, h_last = 0, q_first = 0, q_last = 0;
  for (double gamma : {0.9, 0.99, 0.999, 0.9999}) {
    const MdpModel m = base.with_discount(gamma);
    const RelativeQSpec spec = RelativeQSpec::uniform(m.dim(), 1.0);
    const QTable q = solve_q_star(m);
    const HTable h = solve_h_star(m, spec, q);
    const double hn = h.values.lpNorm<Eigen::Infinity>(), qn = q.values.lpNorm<Eigen::Infinity>();
    if (gamma == 0.9) {
      h_first = hn;
      q_first = qn;
    }
    h_last = hn;
    q_last = qn;
  }
  CHECK(h_last < 2.0 * h_first);
  CHECK(q_last / q_first > 50.0);
}

TEST_CASE("eta proxy") {
  Matrix p(3, 3);
  p << 0.2, 0.3, 0.5, 0.1, 0.1, 0.8, 0.6, 0.2, 0.2;
  const MdpModel flat = MdpModel::create({p}, Vector::Constant(3, 2.5), 0.95);
  const RelativeQSpec s3 = RelativeQSpec::uniform(3, 0.95);
  CHECK(eta_proxy(solve_q_star(flat).values, flat, s3) == doctest::Approx(2.5).epsilon(1e-9));

  const MdpModel sw = swap_chain(0.5, vec({1, 0}));
  CHECK(eta_proxy(solve_q_star(sw).values, sw, RelativeQSpec::uniform(2, 1.0)) == doctest::Approx(0.5).epsilon(1e-10));

  // Successive proxies settle: the change shrinks with 1 - gamma.
  const MdpModel m = noisy4(0.9);
  const RelativeQSpec s = RelativeQSpec::uniform(m.dim(), 1.0);
  std::vector<double> eta;
  for (double g : {0.9, 0.99, 0.999}) {
    const MdpModel mg = m.with_discount(g);
    eta.push_back(eta_proxy(solve_q_star(mg).values, mg, s));
  }
  CHECK(std::abs(eta[2] - eta[1]) < std::abs(eta[1] - eta[0]));
  CHECK(std::abs(eta[2] - eta[1]) < 10.0 * (1 - 0.99));
}

TEST_CASE("relative spec validation") {
  CHECK_THROWS_AS(RelativeQSpec::uniform(4, 0.0).validate(4), ValidationError);
  CHECK_NOTHROW(RelativeQSpec::uniform(4, 0.0).validate(4, false));
  CHECK_THROWS_AS(RelativeQSpec::uniform(3, 0.5).validate(4), ValidationError);
  RelativeQSpec bad{vec({0.5, 0.6}), 1.0};
  CHECK_THROWS_AS(bad.validate(2), ValidationError);
  CHECK_THROWS_AS(RelativeQSpec::point(4, 4, 1.0), ValidationError);
  const MdpModel m = swap_chain(0.5, vec({1, 0}));
  CHECK_THROWS_AS(solve_h_star(m, RelativeQSpec::uniform(2, 0.0)), ValidationError);
  CHECK(centered_view(vec({2, 0}), RelativeQSpec::uniform(2, 1.0)).isApprox(vec({1, -1})));
}
