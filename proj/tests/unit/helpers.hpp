#pragma once

#include <cmath>
#include <vector>

#include "relq/mdp.hpp"
#include "relq/solvers.hpp"

namespace testutil {

inline relq::Vector vec(std::initializer_list<double> v) {
  relq::Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline double max_abs(const relq::Matrix& a) { return a.cwiseAbs().maxCoeff(); }

// Policy iteration written against the raw tensor, independent of the solver module.
inline relq::Vector policy_iteration_q(const relq::MdpModel& m) {
  const int ns = m.num_states(), na = m.num_actions(), d = m.dim();
  const double g = m.discount();
  std::vector<int> pol(ns, 0);
  relq::Vector q(d);
  for (int sweep = 0; sweep < 1000; ++sweep) {
    relq::Matrix lhs = relq::Matrix::Identity(ns, ns);
    relq::Vector rhs(ns);
    for (int x = 0; x < ns; ++x) {
      rhs(x) = m.cost()(x, pol[x]);
      for (int y = 0; y < ns; ++y) lhs(x, y) -= g * m.transition(pol[x])(x, y);
    }
    const relq::Vector v = lhs.fullPivLu().solve(rhs);
    for (int x = 0; x < ns; ++x)
      for (int u = 0; u < na; ++u) q(x * na + u) = m.cost()(x, u) + g * m.transition(u).row(x).dot(v);
    bool stable = true;
    for (int x = 0; x < ns; ++x) {
      int best = pol[x];
      for (int u = 0; u < na; ++u)
        if (q(x * na + u) < q(x * na + best) - 1e-13) best = u;
      if (best != pol[x]) {
        pol[x] = best;
        stable = false;
      }
    }
    if (stable) break;
  }
  return q;
}

}  // namespace testutil
