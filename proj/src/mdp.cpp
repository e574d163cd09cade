#include "aispo/mdp.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "aispo/errors.hpp"
#include "aispo/rng.hpp"

namespace aispo {
namespace {

constexpr double kStochasticTol = 1e-12;

std::string where(int s, int a) {
  std::ostringstream os;
  os << "(s=" << s << ", a=" << a << ")";
  return os.str();
}

Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const PolicyTable& policy) {
  const int n = mdp.n_states();
  Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double w = policy(s, a);
      if (w == 0.0) continue;
      const auto row = mdp.next_distribution(s, a);
      for (int s2 = 0; s2 < n; ++s2) p_pi(s, s2) += w * row[s2];
    }
  }
  return p_pi;
}

Eigen::VectorXd checked_solve(const Eigen::MatrixXd& lhs, const Eigen::VectorXd& rhs,
                              const char* what) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
  Eigen::VectorXd x = lu.solve(rhs);
  if (!x.allFinite() || std::abs(lu.determinant()) < 1e-300) {
    throw InternalError(std::string("singular linear system while solving for ") + what);
  }
  return x;
}

// E_{s~d} sum_a w(s,a) f(s,a)
double occupancy_weighted(const Eigen::VectorXd& d, const Eigen::MatrixXd& w,
                          const Eigen::MatrixXd& f) {
  double total = 0.0;
  for (Eigen::Index s = 0; s < d.size(); ++s) total += d(s) * w.row(s).dot(f.row(s));
  return total;
}

Eigen::VectorXd faulty(const Eigen::VectorXd& d, double gamma, OracleFault fault) {
  if (fault == OracleFault::kOccupancyScale) return d * (1.0 - gamma);
  return d;
}

}  // namespace

TabularMdp::TabularMdp(int n_states, int n_actions, std::vector<double> transition,
                       Eigen::MatrixXd reward, double gamma, Eigen::VectorXd mu0)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma),
      mu0_(std::move(mu0)) {
  if (n_states_ < 1) throw ValidationError("n_states must be positive");
  if (n_actions_ < 1) throw ValidationError("n_actions must be positive");
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw ValidationError("gamma must lie in (0, 1)");
  const std::size_t expected =
      static_cast<std::size_t>(n_states_) * n_actions_ * n_states_;
  if (transition_.size() != expected) {
    throw ValidationError("transition must have n_states*n_actions*n_states = " +
                          std::to_string(expected) + " entries, got " +
                          std::to_string(transition_.size()));
  }
  if (reward_.rows() != n_states_ || reward_.cols() != n_actions_) {
    throw ValidationError("reward must be n_states x n_actions");
  }
  if (!reward_.allFinite()) throw ValidationError("reward entries must be finite");
  if (mu0_.size() != n_states_) throw ValidationError("mu0 must have n_states entries");
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      double sum = 0.0;
      for (double x : next_distribution(s, a)) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
          throw ValidationError("transition " + where(s, a) + " has a negative or non-finite entry");
        }
        sum += x;
      }
      if (std::abs(sum - 1.0) > kStochasticTol) {
        throw ValidationError("transition " + where(s, a) + " does not sum to 1");
      }
    }
  }
  if ((mu0_.array() < 0.0).any() || !mu0_.allFinite()) {
    throw ValidationError("mu0 entries must be non-negative");
  }
  if (std::abs(mu0_.sum() - 1.0) > kStochasticTol) throw ValidationError("mu0 must sum to 1");
}

void validate_policy(const TabularMdp& mdp, const PolicyTable& policy) {
  if (policy.rows() != mdp.n_states() || policy.cols() != mdp.n_actions()) {
    throw ValidationError("policy must be " + std::to_string(mdp.n_states()) + " x " +
                          std::to_string(mdp.n_actions()));
  }
  for (int s = 0; s < mdp.n_states(); ++s) {
    if (!policy.row(s).allFinite() || (policy.row(s).array() < 0.0).any()) {
      throw ValidationError("policy row " + std::to_string(s) + " has invalid entries");
    }
    if (std::abs(policy.row(s).sum() - 1.0) > kStochasticTol) {
      throw ValidationError("policy row " + std::to_string(s) + " does not sum to 1");
    }
  }
}

ExactSolution solve_policy_exact(const TabularMdp& mdp, const PolicyTable& policy) {
  validate_policy(mdp, policy);
  const int n = mdp.n_states();
  const double gamma = mdp.gamma();
  const Eigen::MatrixXd p_pi = policy_transition(mdp, policy);
  const Eigen::VectorXd r_pi = mdp.reward().cwiseProduct(policy).rowwise().sum();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);

  ExactSolution sol;
  sol.v = checked_solve(identity - gamma * p_pi, r_pi, "V");
  sol.q = mdp.reward();
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const auto row = mdp.next_distribution(s, a);
      double expected_next = 0.0;
      for (int s2 = 0; s2 < n; ++s2) expected_next += row[s2] * sol.v(s2);
      sol.q(s, a) += gamma * expected_next;
    }
  }
  sol.adv = sol.q.colwise() - sol.v;

  Eigen::VectorXd d = (1.0 - gamma) * checked_solve(identity - gamma * p_pi.transpose(),
                                                    mdp.mu0(), "d_pi");
  sol.d_pi = d / d.sum();
  sol.eta = mdp.mu0().dot(sol.v);
  return sol;
}

double value_difference_exact(const TabularMdp& mdp, const PolicyTable& pi,
                              const PolicyTable& pi_tilde) {
  return solve_policy_exact(mdp, pi_tilde).eta - solve_policy_exact(mdp, pi).eta;
}

double value_difference_via_advantage(const TabularMdp& mdp, const PolicyTable& pi,
                                      const PolicyTable& pi_tilde) {
  const ExactSolution base = solve_policy_exact(mdp, pi);
  const ExactSolution target = solve_policy_exact(mdp, pi_tilde);
  return occupancy_weighted(target.d_pi, pi_tilde, base.adv) / (1.0 - mdp.gamma());
}

double surrogate_exact(const TabularMdp& mdp, const PolicyTable& pi,
                       const PolicyTable& pi_tilde) {
  const ExactSolution base = solve_policy_exact(mdp, pi);
  validate_policy(mdp, pi_tilde);
  return occupancy_weighted(base.d_pi, pi_tilde, base.adv) / (1.0 - mdp.gamma());
}

double surrogate_correction(const TabularMdp& mdp, const PolicyTable& pi,
                            const PolicyTable& pi_tilde, OracleFault fault) {
  const ExactSolution base = solve_policy_exact(mdp, pi);
  const ExactSolution target = solve_policy_exact(mdp, pi_tilde);
  const Eigen::VectorXd d = faulty(base.d_pi, mdp.gamma(), fault);
  return occupancy_weighted(d, pi_tilde - pi, target.q - base.q) / (1.0 - mdp.gamma());
}

double check_performance_difference_identity(const TabularMdp& mdp, const PolicyTable& pi,
                                             const PolicyTable& pi_tilde, OracleFault fault) {
  const ExactSolution base = solve_policy_exact(mdp, pi);
  const ExactSolution target = solve_policy_exact(mdp, pi_tilde);
  const double scale = 1.0 / (1.0 - mdp.gamma());
  const Eigen::VectorXd d = faulty(base.d_pi, mdp.gamma(), fault);
  const double surrogate = scale * occupancy_weighted(d, pi_tilde, base.adv);
  const double correction = scale * occupancy_weighted(d, pi_tilde - pi, target.q - base.q);
  return std::abs(target.eta - base.eta - surrogate - correction);
}

double check_value_dependency_equality(const TabularMdp& mdp, const PolicyTable& pi,
                                       const PolicyTable& pi_tilde, OracleFault fault) {
  const ExactSolution base = solve_policy_exact(mdp, pi);
  const ExactSolution target = solve_policy_exact(mdp, pi_tilde);
  const Eigen::VectorXd d = faulty(base.d_pi, mdp.gamma(), fault);
  const double rhs = occupancy_weighted(d, pi_tilde - pi, target.q) / (1.0 - mdp.gamma());
  return std::abs(target.eta - base.eta - rhs);
}

double truncated_discounted_sum(const TabularMdp& mdp, const PolicyTable& policy,
                                const Eigen::MatrixXd& f, int horizon) {
  validate_policy(mdp, policy);
  const Eigen::MatrixXd p_pi = policy_transition(mdp, policy);
  const Eigen::VectorXd f_pi = f.cwiseProduct(policy).rowwise().sum();
  Eigen::RowVectorXd dist = mdp.mu0().transpose();
  double total = 0.0;
  double discount = 1.0;
  for (int t = 0; t < horizon; ++t) {
    total += discount * dist.dot(f_pi);
    dist = dist * p_pi;
    discount *= mdp.gamma();
  }
  return total;
}

namespace {

Eigen::VectorXd dirichlet_ones(int n, CounterRng& rng) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    x(i) = -std::log(u);
  }
  return x / x.sum();
}

}  // namespace

TabularMdp make_random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed) {
  CounterRng rng(seed, Stream::kRandomInstance, 0);
  std::vector<double> transition;
  transition.reserve(static_cast<std::size_t>(n_states) * n_actions * n_states);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      const Eigen::VectorXd row = dirichlet_ones(n_states, rng);
      transition.insert(transition.end(), row.data(), row.data() + row.size());
    }
  }
  Eigen::MatrixXd reward(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) reward(s, a) = 2.0 * rng.uniform() - 1.0;
  }
  Eigen::VectorXd mu0 = dirichlet_ones(n_states, rng);
  return TabularMdp(n_states, n_actions, std::move(transition), std::move(reward), gamma,
                    std::move(mu0));
}

PolicyTable make_random_policy(int n_states, int n_actions, std::uint64_t seed, double floor) {
  CounterRng rng(seed, Stream::kRandomInstance, 1);
  PolicyTable policy(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    Eigen::VectorXd row = dirichlet_ones(n_actions, rng);
    row = (row.array() * (1.0 - floor * n_actions) + floor).matrix();
    policy.row(s) = (row / row.sum()).transpose();
  }
  return policy;
}

}  // namespace aispo
