#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "relq/error.hpp"
#include "relq/mdp_io.hpp"

using namespace relq;
using testutil::vec;

TEST_CASE("swap chain pair matrix equals the state chain") {
  const MdpModel m = swap_chain(0.5, vec({1, 0}));
  const Matrix pm = pair_transition_matrix(m, RandomizedPolicy::uniform(2, 1));
  Matrix expected(2, 2);
  expected << 0, 1, 1, 0;
  CHECK(testutil::max_abs(pm - expected) == 0.0);
}

TEST_CASE("always-action-0 policy places P_0 rows in action-0 columns") {
  const MdpModel m = random_mdp(7, {3, 2, 3, 0.0, 1.0, 0.9});
  const DeterministicPolicy p{{0, 0, 0}};
  const Matrix pm = pair_transition_matrix(m, p);
  for (int x = 0; x < 3; ++x)
    for (int u = 0; u < 2; ++u)
      for (int y = 0; y < 3; ++y) {
        CHECK(pm(m.pair(x, u), m.pair(y, 0)) == m.transition(u)(x, y));
        CHECK(pm(m.pair(x, u), m.pair(y, 1)) == 0.0);
      }
}

TEST_CASE("pair matrix rows sum to one by direct summation") {
  const MdpModel m = random_mdp(3, {2, 2, 2, 0.0, 1.0, 0.9});
  const RandomizedPolicy pol = RandomizedPolicy::uniform(2, 2);
  const Matrix pm = pair_transition_matrix(m, pol);
  for (int i = 0; i < m.dim(); ++i) {
    // Brute-force sum over (x', u') of P_u(x,x') policy(u'|x').
    const int x = m.state_of(i), u = m.action_of(i);
    double total = 0.0;
    for (int y = 0; y < 2; ++y)
      for (int b = 0; b < 2; ++b) {
        const double entry = m.transition(u)(x, y) * pol.action_pmf(y, b);
        CHECK(pm(i, m.pair(y, b)) == doctest::Approx(entry).epsilon(1e-15));
        total += entry;
      }
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(std::abs(pm.row(i).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("state transition matrix for deterministic and uniform policies") {
  const MdpModel m = random_mdp(11, {4, 2, 4, 0.0, 1.0, 0.9});
  const DeterministicPolicy p{{1, 0, 1, 1}};
  const Matrix sp = state_transition_matrix(m, p);
  for (int x = 0; x < 4; ++x) CHECK(testutil::max_abs(sp.row(x) - m.transition(p.action_of[x]).row(x)) == 0.0);
  const Matrix su = state_transition_matrix(m, RandomizedPolicy::uniform(4, 2));
  CHECK(testutil::max_abs(su - 0.5 * (m.transition(0) + m.transition(1))) < 1e-15);
  for (int x = 0; x < 4; ++x) CHECK(std::abs(su.row(x).sum() - 1.0) < 1e-12);
}

TEST_CASE("policy dimension mismatch names the axis") {
  const MdpModel m = noisy4(0.9);
  try {
    pair_transition_matrix(m, RandomizedPolicy::uniform(3, 2));
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(e.axis() == "state");
  }
  try {
    pair_transition_matrix(m, RandomizedPolicy::uniform(4, 3));
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(e.axis() == "action");
  }
  CHECK_THROWS_AS(pair_transition_matrix(m, DeterministicPolicy{{0, 2, 0, 0}}), ValidationError);
}

TEST_CASE("stationary distribution examples") {
  Matrix swap(2, 2), lazy(2, 2);
  swap << 0, 1, 1, 0;
  lazy << 0.75, 0.25, 0.25, 0.75;
  const auto s1 = stationary_distribution(swap);
  CHECK(s1.pmf(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s1.pmf(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s1.positive);
  const auto s2 = stationary_distribution(lazy);
  CHECK(std::abs(s2.pmf(0) - 0.5) < 1e-12);
  CHECK(std::abs(s2.pmf(1) - 0.5) < 1e-12);
  CHECK_THROWS_WITH_AS(stationary_distribution(Matrix::Identity(3, 3)),
                       doctest::Contains("reducible or multichain"), Error);
}

TEST_CASE("stationary distribution flags zero mass") {
  Matrix m(3, 3);
  m << 0.5, 0.5, 0.0,
       0.5, 0.5, 0.0,
       1.0, 0.0, 0.0;  // state 2 is transient
  const auto s = stationary_distribution(m);
  CHECK_FALSE(s.positive);
  CHECK(s.residual < 1e-10);
  CHECK(std::abs(s.pmf.sum() - 1.0) < 1e-10);
}

TEST_CASE("stationary distribution is invariant on random chains") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const MdpModel m = random_mdp(seed, {5, 3, 3, 0.0, 1.0, 0.9});
    const Matrix pm = pair_transition_matrix(m, RandomizedPolicy::uniform(5, 3));
    for (int i = 0; i < m.dim(); ++i) CHECK(std::abs(pm.row(i).sum() - 1.0) < 1e-12);
    StationaryDistribution s;
    try {
      s = stationary_distribution(pm);
    } catch (const Error&) {
      continue;  // sparse random chains can be reducible
    }
    CHECK((pm.transpose() * s.pmf - s.pmf).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK(std::abs(s.pmf.sum() - 1.0) < 1e-10);
  }
}

TEST_CASE("deterministic policy: pair chain marginal equals state chain") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MdpModel m = random_mdp(seed, {4, 3, 2, 0.0, 1.0, 0.9});
    const DeterministicPolicy p{{static_cast<int>(seed % 3), 1, 2, 0}};
    const Matrix pm = pair_transition_matrix(m, p);
    const Matrix sm = state_transition_matrix(m, p);
    // From pair (x, phi(x)), summing over actions at x' gives P_phi(x, x').
    for (int x = 0; x < 4; ++x)
      for (int y = 0; y < 4; ++y) {
        double s = 0.0;
        for (int u = 0; u < 3; ++u) s += pm(m.pair(x, p.action_of[x]), m.pair(y, u));
        CHECK(std::abs(s - sm(x, y)) < 1e-14);
      }
  }
}

TEST_CASE("random_mdp is deterministic and respects branching") {
  const RandomMdpOptions o{4, 2, 2, 0.0, 1.0, 0.9};
  const MdpModel a = random_mdp(1, o), b = random_mdp(1, o);
  for (int u = 0; u < 2; ++u) CHECK((a.transition(u).array() == b.transition(u).array()).all());
  CHECK((a.cost().array() == b.cost().array()).all());
  for (int u = 0; u < 2; ++u)
    for (int x = 0; x < 4; ++x) {
      CHECK((a.transition(u).row(x).array() > 0.0).count() == 2);
      CHECK(std::abs(a.transition(u).row(x).sum() - 1.0) < 1e-12);
    }
  const MdpModel full = random_mdp(5, {6, 2, 6, -1.0, 2.0, 0.5});
  for (int u = 0; u < 2; ++u) CHECK((full.transition(u).array() > 0.0).all());
  CHECK((full.cost().array() >= -1.0).all());
  CHECK((full.cost().array() <= 2.0).all());
  const MdpModel other = random_mdp(2, o);
  CHECK_FALSE((other.cost().array() == a.cost().array()).all());
}

TEST_CASE("random_mdp rejects invalid ranges") {
  CHECK_THROWS_AS(random_mdp(1, {3, 2, 4, 0.0, 1.0, 0.9}), ValidationError);
  CHECK_THROWS_AS(random_mdp(1, {3, 2, 0, 0.0, 1.0, 0.9}), ValidationError);
  CHECK_THROWS_AS(random_mdp(1, {3, 2, 2, 1.0, 0.0, 0.9}), ValidationError);
  CHECK_THROWS_AS(random_mdp(1, {0, 2, 1, 0.0, 1.0, 0.9}), ValidationError);
  CHECK_THROWS_AS(random_mdp(1, {3, 2, 2, 0.0, 1.0, 1.0}), ValidationError);
}

TEST_CASE("MdpModel validation") {
  Matrix p(2, 2);
  p << 0.5, 0.4, 0.0, 1.0;
  try {
    MdpModel::create({p}, vec({1, 2}), 0.9);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("action 0, state 0") != std::string::npos);
  }
  p << 0.5, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(MdpModel::create({p}, vec({1, 2}), 1.0), ValidationError);
  CHECK_THROWS_AS(MdpModel::create({p}, vec({1, std::nan("")}), 0.5), ValidationError);
  Matrix neg(2, 2);
  neg << 1.5, -0.5, 0.0, 1.0;
  CHECK_THROWS_AS(MdpModel::create({neg}, vec({1, 2}), 0.5), ValidationError);
  CHECK_NOTHROW(MdpModel::create({p}, vec({1, 2}), 0.0));
}

TEST_CASE("JSON round trip and first bad row") {
  const MdpModel m = ssp6(0.95);
  const MdpModel back = mdp_from_json(nlohmann::json::parse(mdp_to_json(m).dump()));
  for (int u = 0; u < 2; ++u) CHECK((back.transition(u).array() == m.transition(u).array()).all());
  CHECK(back.discount() == m.discount());
  CHECK(back.labels() == m.labels());

  nlohmann::json j = mdp_to_json(noisy4(0.9));
  j["transitions"][1][2] = {0.25, 0.25, 0.25, 0.15};
  j["transitions"][1][3] = {0.5, 0.25, 0.25, 0.15};
  try {
    mdp_from_json(j);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("action 1, state 2") != std::string::npos);
  }
  const std::string path = "mdp_io_test.json";
  save_mdp(m, path);
  CHECK(load_mdp(path).num_states() == 6);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_mdp("does/not/exist.json"), Error);
}
