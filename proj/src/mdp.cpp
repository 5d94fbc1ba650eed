#include "relq/mdp.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "relq/error.hpp"
#include "relq/random.hpp"

namespace relq {

namespace {

void check_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, const std::string& axis,
               const std::string& where) {
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (!std::isfinite(row(j)) || row(j) < 0.0) {
      std::ostringstream os;
      os << where << " has invalid entry " << row(j) << " at column " << j;
      throw ValidationError(axis, os.str());
    }
  }
  const double s = row.sum();
  if (std::abs(s - 1.0) > kRowSumTol) {
    std::ostringstream os;
    os.precision(17);
    os << where << " sums to " << s << ", expected 1";
    throw ValidationError(axis, os.str());
  }
}

}  // namespace

MdpModel MdpModel::create(std::vector<Matrix> transitions, Matrix cost, double discount,
                          std::vector<std::string> labels) {
  if (transitions.empty()) throw ValidationError("action", "MDP needs at least one action");
  const Eigen::Index ns = transitions[0].rows();
  if (ns == 0) throw ValidationError("state", "MDP needs at least one state");
  if (cost.rows() != ns || static_cast<std::size_t>(cost.cols()) != transitions.size()) {
    std::ostringstream os;
    os << "cost matrix is " << cost.rows() << "x" << cost.cols() << ", expected " << ns << "x"
       << transitions.size();
    throw ValidationError("cost", os.str());
  }
  for (std::size_t u = 0; u < transitions.size(); ++u) {
    if (transitions[u].rows() != ns || transitions[u].cols() != ns) {
      std::ostringstream os;
      os << "transition matrix for action " << u << " is " << transitions[u].rows() << "x"
         << transitions[u].cols() << ", expected " << ns << "x" << ns;
      throw ValidationError("state", os.str());
    }
    for (Eigen::Index x = 0; x < ns; ++x) {
      std::ostringstream where;
      where << "transition row (action " << u << ", state " << x << ")";
      check_row(transitions[u].row(x), "transitions", where.str());
    }
  }
  for (Eigen::Index x = 0; x < cost.rows(); ++x)
    for (Eigen::Index u = 0; u < cost.cols(); ++u)
      if (!std::isfinite(cost(x, u))) {
        std::ostringstream os;
        os << "cost (state " << x << ", action " << u << ") is not finite";
        throw ValidationError("cost", os.str());
      }
  if (!(discount >= 0.0 && discount < 1.0)) {
    std::ostringstream os;
    os << "discount must be in [0,1), got " << discount;
    if (discount >= 1.0) os << " (discount must be < 1)";
    throw ValidationError("discount", os.str());
  }
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(ns))
    throw ValidationError("labels", "labels must have one entry per state");

  MdpModel m;
  m.transitions_ = std::move(transitions);
  m.cost_ = std::move(cost);
  m.discount_ = discount;
  m.labels_ = std::move(labels);
  return m;
}

Vector MdpModel::cost_vector() const {
  Vector c(dim());
  for (int x = 0; x < num_states(); ++x)
    for (int u = 0; u < num_actions(); ++u) c(pair(x, u)) = cost_(x, u);
  return c;
}

Matrix MdpModel::pair_to_state() const {
  Matrix p(dim(), num_states());
  for (int x = 0; x < num_states(); ++x)
    for (int u = 0; u < num_actions(); ++u) p.row(pair(x, u)) = transitions_[u].row(x);
  return p;
}

MdpModel MdpModel::with_discount(double discount) const {
  return create(transitions_, cost_, discount, labels_);
}

RandomizedPolicy RandomizedPolicy::uniform(int num_states, int num_actions) {
  return {Matrix::Constant(num_states, num_actions, 1.0 / num_actions)};
}

RandomizedPolicy RandomizedPolicy::from(const DeterministicPolicy& policy, int num_actions) {
  Matrix pmf = Matrix::Zero(static_cast<Eigen::Index>(policy.action_of.size()), num_actions);
  for (std::size_t x = 0; x < policy.action_of.size(); ++x) {
    const int u = policy.action_of[x];
    if (u < 0 || u >= num_actions) {
      std::ostringstream os;
      os << "policy action " << u << " at state " << x << " out of range";
      throw ValidationError("action", os.str());
    }
    pmf(static_cast<Eigen::Index>(x), u) = 1.0;
  }
  return {pmf};
}

void validate_policy(const MdpModel& mdp, const DeterministicPolicy& policy) {
  if (static_cast<int>(policy.action_of.size()) != mdp.num_states()) {
    std::ostringstream os;
    os << "policy covers " << policy.action_of.size() << " states, MDP has "
       << mdp.num_states();
    throw ValidationError("state", os.str());
  }
  for (std::size_t x = 0; x < policy.action_of.size(); ++x) {
    const int u = policy.action_of[x];
    if (u < 0 || u >= mdp.num_actions()) {
      std::ostringstream os;
      os << "policy action " << u << " at state " << x << " out of range [0,"
         << mdp.num_actions() << ")";
      throw ValidationError("action", os.str());
    }
  }
}

void validate_policy(const MdpModel& mdp, const RandomizedPolicy& policy) {
  if (policy.action_pmf.rows() != mdp.num_states()) {
    std::ostringstream os;
    os << "policy has " << policy.action_pmf.rows() << " state rows, MDP has "
       << mdp.num_states();
    throw ValidationError("state", os.str());
  }
  if (policy.action_pmf.cols() != mdp.num_actions()) {
    std::ostringstream os;
    os << "policy has " << policy.action_pmf.cols() << " action columns, MDP has "
       << mdp.num_actions();
    throw ValidationError("action", os.str());
  }
  for (int x = 0; x < mdp.num_states(); ++x) {
    std::ostringstream where;
    where << "policy row (state " << x << ")";
    check_row(policy.action_pmf.row(x), "policy", where.str());
  }
}

Matrix substitution_matrix(const MdpModel& mdp, const RandomizedPolicy& policy) {
  validate_policy(mdp, policy);
  Matrix s = Matrix::Zero(mdp.num_states(), mdp.dim());
  for (int x = 0; x < mdp.num_states(); ++x)
    for (int u = 0; u < mdp.num_actions(); ++u) s(x, mdp.pair(x, u)) = policy.action_pmf(x, u);
  return s;
}

Matrix pair_transition_matrix(const MdpModel& mdp, const RandomizedPolicy& policy) {
  return mdp.pair_to_state() * substitution_matrix(mdp, policy);
}

Matrix pair_transition_matrix(const MdpModel& mdp, const DeterministicPolicy& policy) {
  validate_policy(mdp, policy);
  return pair_transition_matrix(mdp, RandomizedPolicy::from(policy, mdp.num_actions()));
}

Matrix state_transition_matrix(const MdpModel& mdp, const RandomizedPolicy& policy) {
  return substitution_matrix(mdp, policy) * mdp.pair_to_state();
}

Matrix state_transition_matrix(const MdpModel& mdp, const DeterministicPolicy& policy) {
  validate_policy(mdp, policy);
  return state_transition_matrix(mdp, RandomizedPolicy::from(policy, mdp.num_actions()));
}

StationaryDistribution stationary_distribution(const Matrix& m) {
  const Eigen::Index d = m.rows();
  if (d == 0 || m.cols() != d) throw ValidationError("state", "stationary_distribution needs a square matrix");
  for (Eigen::Index i = 0; i < d; ++i) {
    std::ostringstream where;
    where << "row " << i;
    check_row(m.row(i), "transitions", where.str());
  }

  const Matrix g = m.transpose() - Matrix::Identity(d, d);
  Eigen::JacobiSVD<Matrix> svd(g);
  const Vector sv = svd.singularValues();
  int nullity = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) < 1e-9) ++nullity;
  if (nullity > 1) {
    std::ostringstream os;
    os << "reducible or multichain: eigenvalue-1 eigenspace has dimension " << nullity;
    throw NumericalError(os.str());
  }

  StationaryDistribution out;
  Matrix b(d + 1, d);
  b.topRows(d) = g;
  b.row(d).setOnes();
  Vector rhs = Vector::Zero(d + 1);
  rhs(d) = 1.0;
  out.pmf = b.colPivHouseholderQr().solve(rhs);
  auto residual_of = [&](const Vector& p) {
    return (m.transpose() * p - p).lpNorm<Eigen::Infinity>();
  };
  out.residual = residual_of(out.pmf);

  if (!(out.residual < 1e-10) || std::abs(out.pmf.sum() - 1.0) > 1e-10) {
    // Lazy power iteration copes with periodic chains.
    const Matrix lazy = 0.5 * (m + Matrix::Identity(d, d));
    Vector p = Vector::Constant(d, 1.0 / static_cast<double>(d));
    for (long it = 0; it < 10000000; ++it) {
      Vector next = lazy.transpose() * p;
      next /= next.sum();
      const double change = (next - p).lpNorm<Eigen::Infinity>();
      p = next;
      if (change < 1e-16) break;
    }
    out.pmf = p;
    out.residual = residual_of(p);
    out.used_power_iteration = true;
    if (!(out.residual < 1e-10)) {
      std::ostringstream os;
      os << "stationary distribution residual " << out.residual << " above 1e-10";
      throw NumericalError(os.str(), sv(0) / std::max(sv(sv.size() - 2), 1e-300));
    }
  }
  out.positive = (out.pmf.array() >= kPositivityFloor).all();
  return out;
}

MdpModel random_mdp(std::uint64_t seed, const RandomMdpOptions& o) {
  if (o.num_states < 1) throw ValidationError("state", "num_states must be >= 1");
  if (o.num_actions < 1) throw ValidationError("action", "num_actions must be >= 1");
  if (o.branching < 1 || o.branching > o.num_states)
    throw ValidationError("branching", "branching factor must be in [1, num_states]");
  if (!(std::isfinite(o.cost_lo) && std::isfinite(o.cost_hi) && o.cost_lo <= o.cost_hi))
    throw ValidationError("cost", "cost range must be finite with lo <= hi");

  Rng rng(seed, 0, Stream::generator);
  std::vector<Matrix> p(o.num_actions, Matrix::Zero(o.num_states, o.num_states));
  std::vector<int> idx(o.num_states);
  for (int u = 0; u < o.num_actions; ++u) {
    for (int x = 0; x < o.num_states; ++x) {
      std::iota(idx.begin(), idx.end(), 0);
      // Partial Fisher-Yates picks the support.
      for (int k = 0; k < o.branching; ++k) {
        const int j = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.num_states - k)));
        std::swap(idx[k], idx[j]);
      }
      double total = 0.0;
      for (int k = 0; k < o.branching; ++k) {
        const double w = 1.0 - rng.uniform();  // in (0, 1]
        p[u](x, idx[k]) = w;
        total += w;
      }
      p[u].row(x) /= total;
      // Push rounding residue onto the largest entry so the row sums to 1.
      Eigen::Index jmax;
      p[u].row(x).maxCoeff(&jmax);
      p[u](x, jmax) += 1.0 - p[u].row(x).sum();
    }
  }
  Matrix cost(o.num_states, o.num_actions);
  for (int x = 0; x < o.num_states; ++x)
    for (int u = 0; u < o.num_actions; ++u) cost(x, u) = rng.uniform(o.cost_lo, o.cost_hi);
  return MdpModel::create(std::move(p), std::move(cost), o.discount);
}

MdpModel swap_chain(double discount, const Vector& cost) {
  Matrix p(2, 2);
  p << 0, 1, 1, 0;
  return MdpModel::create({p}, cost, discount);
}

MdpModel lazy_chain(double discount, const Vector& cost) {
  Matrix p(2, 2);
  p << 0.75, 0.25, 0.25, 0.75;
  return MdpModel::create({p}, cost, discount);
}

MdpModel noisy4(double discount) {
  Matrix p0(4, 4), p1(4, 4), c(4, 2);
  p0 << 0.50, 0.30, 0.10, 0.10,
        0.20, 0.40, 0.30, 0.10,
        0.10, 0.20, 0.50, 0.20,
        0.30, 0.10, 0.20, 0.40;
  p1 << 0.10, 0.20, 0.30, 0.40,
        0.40, 0.10, 0.10, 0.40,
        0.25, 0.25, 0.25, 0.25,
        0.10, 0.40, 0.40, 0.10;
  c << 1.0, 1.5,
       2.0, 0.5,
       0.2, 1.2,
       3.0, 2.2;
  return MdpModel::create({p0, p1}, c, discount);
}

// Six states in a line with the goal at state 5. Action 0 is fast and
// unreliable, action 1 slow and cheap. The goal restarts the episode at 0,
// which keeps the discounted problem unichain.
MdpModel ssp6(double discount) {
  const int n = 6;
  Matrix p0 = Matrix::Zero(n, n), p1 = Matrix::Zero(n, n), c(n, 2);
  for (int x = 0; x < n - 1; ++x) {
    const int back = std::max(x - 1, 0);
    p0(x, x + 1) += 0.7;
    p0(x, x) += 0.2;
    p0(x, back) += 0.1;
    p1(x, x + 1) += 0.4;
    p1(x, x) += 0.6;
    c(x, 0) = 1.0 + 0.1 * x;
    c(x, 1) = 0.7;
  }
  p0(n - 1, 0) = 1.0;
  p1(n - 1, 0) = 0.5;
  p1(n - 1, n - 1) = 0.5;
  c(n - 1, 0) = 0.0;
  c(n - 1, 1) = 0.2;
  std::vector<std::string> labels;
  for (int x = 0; x < n - 1; ++x) labels.push_back("s" + std::to_string(x));
  labels.push_back("goal");
  return MdpModel::create({p0, p1}, c, discount, labels);
}

}  // namespace relq
