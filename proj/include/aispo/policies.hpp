#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>

#include "aispo/errors.hpp"
#include "aispo/mdp.hpp"
#include "aispo/rng.hpp"

namespace aispo {

/// Softmax over a logit table. Parameters are the logits flattened row-major
/// (index s * n_actions + a). Logits may be -inf to express zero-probability
/// actions, as long as every row keeps at least one finite logit.
class TabularSoftmaxPolicy {
 public:
  TabularSoftmaxPolicy(int n_states, int n_actions);

  static TabularSoftmaxPolicy from_logits(const Eigen::MatrixXd& logits);
  /// logits = log p; rows are validated as distributions first.
  static TabularSoftmaxPolicy from_probabilities(const PolicyTable& probabilities);
  /// Same action distribution in every state, e.g. {p_right, 1 - p_right}.
  static TabularSoftmaxPolicy state_independent(int n_states, const Eigen::VectorXd& probabilities);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  Eigen::Index n_params() const { return theta_.size(); }

  const Eigen::VectorXd& parameters() const { return theta_; }
  void set_parameters(const Eigen::VectorXd& theta);

  double logit(int s, int a) const { return theta_[flat(s, a)]; }
  double log_prob(int s, int a) const;
  double prob(int s, int a) const { return std::exp(log_prob(s, a)); }
  Eigen::VectorXd grad_log_prob(int s, int a) const;
  /// out += scale * grad_log_prob(s, a), touching only row s.
  void add_grad_log_prob(int s, int a, double scale, Eigen::VectorXd& out) const;

  PolicyTable probabilities() const;
  int sample(int s, CounterRng& rng) const;

 private:
  std::size_t flat(int s, int a) const {
    return static_cast<std::size_t>(s) * n_actions_ + a;
  }
  void check_index(int s, int a) const;
  double row_log_normalizer(int s) const;

  int n_states_;
  int n_actions_;
  Eigen::VectorXd theta_;
};

/// Fixed two-hidden-layer tanh network with width 32. Parameters live outside
/// the object and are laid out as W1, b1, W2, b2, W3, b3 with row-major
/// weight matrices.
class Mlp {
 public:
  static constexpr int kHidden = 32;

  Mlp(int input_dim, int output_dim);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  Eigen::Index n_params() const;

  Eigen::VectorXd forward(const Eigen::VectorXd& x, const double* params) const;
  /// grad += d(dout . f(x)) / d params.
  void backward(const Eigen::VectorXd& x, const double* params, const Eigen::VectorXd& dout,
                double* grad) const;

  /// N(0, 1/fan_in) weights, zero biases, last layer scaled by `last_scale`.
  void initialize(double* params, CounterRng& rng, double last_scale) const;

 private:
  int input_dim_;
  int output_dim_;
};

/// Diagonal Gaussian whose mean is an Mlp of the state and whose log standard
/// deviation is a free, state-independent parameter vector. Flat parameters:
/// the Mlp block followed by log_std.
class GaussianMlpPolicy {
 public:
  /// Seeded network initialization, log_std = 0.
  GaussianMlpPolicy(int state_dim, int action_dim, std::uint64_t seed);

  int state_dim() const { return net_.input_dim(); }
  int action_dim() const { return net_.output_dim(); }
  Eigen::Index n_params() const { return theta_.size(); }

  const Eigen::VectorXd& parameters() const { return theta_; }
  void set_parameters(const Eigen::VectorXd& theta);

  Eigen::VectorXd mean(const Eigen::VectorXd& s) const;
  Eigen::VectorXd log_std() const { return theta_.tail(action_dim()); }

  double log_prob(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
  Eigen::VectorXd grad_log_prob(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
  void add_grad_log_prob(const Eigen::VectorXd& s, const Eigen::VectorXd& a, double scale,
                         Eigen::VectorXd& out) const;

  Eigen::VectorXd sample(const Eigen::VectorXd& s, CounterRng& rng) const;

 private:
  void check_shapes(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;

  Mlp net_;
  Eigen::VectorXd theta_;
};

/// pi_tilde(a|s) / pi(a|s) computed in log space.
template <class Policy, class State, class Action>
double ratio(const Policy& pi_tilde, const Policy& pi, const State& s, const Action& a) {
  const double behavior = pi.log_prob(s, a);
  if (behavior == -std::numeric_limits<double>::infinity()) {
    throw SupportError("ratio undefined: behavior policy assigns zero probability to the action");
  }
  return std::exp(pi_tilde.log_prob(s, a) - behavior);
}

}  // namespace aispo
