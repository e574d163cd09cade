#include "aispo/optimizer.hpp"
#include "aispo/format.hpp"

#include <algorithm>
#include <iostream>

namespace aispo {

void validate_config(const OptimConfig& c) {
  auto require = [](bool ok, const char* message) {
    if (!ok) throw ValidationError(message);
  };
  require(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), "learning_rate must be positive");
  require(c.adam_epsilon > 0.0, "adam_epsilon must be positive");
  require(c.minibatch_size > 0, "minibatch_size must be positive");
  require(c.updates_per_batch >= 0, "updates_per_batch must be non-negative");
  require(c.batch_transitions > 0, "batch_transitions must be positive");
  require(c.clip_omega > 0.0 && c.clip_omega < 1.0, "clip_omega must lie in (0, 1)");
  require(c.gamma > 0.0 && c.gamma < 1.0, "gamma must lie in (0, 1)");
  require(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  require(c.total_timesteps > 0, "total_timesteps must be positive");
  require(c.horizon > 0, "horizon must be positive");
  require(c.value_learning_rate > 0.0, "value_learning_rate must be positive");
  require(c.value_epochs >= 0, "value_epochs must be non-negative");
}

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& gradient,
               double lr, double epsilon, double beta1, double beta2) {
  if (gradient.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ValidationError("Adam state, parameters and gradient must have the same shape");
  }
  ++state.step;
  state.m = beta1 * state.m + (1.0 - beta1) * gradient;
  state.v = beta2 * state.v + (1.0 - beta2) * gradient.cwiseProduct(gradient);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    const double m_hat = state.m[j] / c1;
    const double v_hat = state.v[j] / c2;
    params[j] += lr * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

std::vector<int> TabularCritic::fit(const std::vector<Trajectory>& trajectories,
                                    const std::vector<std::vector<double>>& targets) {
  if (targets.size() != trajectories.size()) {
    throw ValidationError("one target vector per trajectory is required");
  }
  const Eigen::Index n = v_.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(n);
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const Trajectory& tr = trajectories[k];
    if (static_cast<int>(targets[k].size()) != tr.size()) {
      throw ValidationError("targets are not aligned with the trajectory");
    }
    for (int t = 0; t < tr.size(); ++t) {
      const int s = tr[t].state;
      if (s < 0 || s >= n) throw ValidationError("trajectory state outside the value table");
      sum[s] += targets[k][t];
      ++count[s];
    }
  }
  std::vector<int> unvisited;
  for (Eigen::Index s = 0; s < n; ++s) {
    if (count[s] == 0) {
      v_[s] = 0.0;
      unvisited.push_back(static_cast<int>(s));
    } else {
      v_[s] = sum[s] / count[s];
    }
  }
  if (!unvisited.empty()) {
    std::cerr << "warning: " << unvisited.size()
              << " state(s) not visited; their value falls back to 0\n";
  }
  return unvisited;
}

TabularCritic fit_value_function(const std::vector<Trajectory>& trajectories,
                                 const std::vector<std::vector<double>>& targets, int n_states) {
  TabularCritic critic(n_states);
  critic.fit(trajectories, targets);
  return critic;
}

MlpCritic::MlpCritic(int state_dim, std::uint64_t seed, double learning_rate, int epochs,
                     int minibatch_size)
    : net_(state_dim, 1),
      params_(Eigen::VectorXd::Zero(net_.n_params())),
      adam_(net_.n_params()),
      learning_rate_(learning_rate),
      epochs_(epochs),
      minibatch_size_(minibatch_size) {
  if (minibatch_size < 1) throw ValidationError("critic minibatch size must be positive");
  CounterRng rng(seed, Stream::kInit, 1);
  net_.initialize(params_.data(), rng, 1.0);
}

double MlpCritic::operator()(const Eigen::VectorXd& s) const {
  return shift_ + scale_ * net_.forward(s, params_.data())[0];
}

std::vector<double> MlpCritic::fit(const std::vector<ContinuousTrajectory>& trajectories,
                                   const std::vector<std::vector<double>>& targets,
                                   CounterRng& rng) {
  if (targets.size() != trajectories.size()) {
    throw ValidationError("one target vector per trajectory is required");
  }
  std::vector<const Eigen::VectorXd*> states;
  std::vector<double> y;
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    if (static_cast<int>(targets[k].size()) != trajectories[k].size()) {
      throw ValidationError("targets are not aligned with the trajectory");
    }
    for (int t = 0; t < trajectories[k].size(); ++t) {
      states.push_back(&trajectories[k][t].state);
      y.push_back(targets[k][t]);
    }
  }
  const std::size_t n = y.size();
  if (n == 0) throw ValidationError("no value targets to fit");
  auto full_loss = [&] {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = (*this)(*states[j]) - y[j];
      total += e * e;
    }
    return total / static_cast<double>(n);
  };

  std::vector<double> losses{full_loss()};

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  const double scale = std::max(std::sqrt(var / static_cast<double>(n)), 1e-6);
  // Output layer is the trailing hidden weights plus one bias.
  const Eigen::Index tail = Mlp::kHidden + 1;
  params_.tail(tail).head(Mlp::kHidden) *= scale_ / scale;
  params_[params_.size() - 1] = (scale_ * params_[params_.size() - 1] + shift_ - mean) / scale;
  shift_ = mean;
  scale_ = scale;
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) order[j] = j;
  const std::size_t mb = std::min<std::size_t>(static_cast<std::size_t>(minibatch_size_), n);
  Eigen::VectorXd grad(params_.size());
  Eigen::VectorXd dout(1);
  for (int epoch = 0; epoch < epochs_; ++epoch) {
    for (std::size_t j = n; j > 1; --j) std::swap(order[j - 1], order[rng.below(j)]);
    for (std::size_t start = 0; start + mb <= n; start += mb) {
      grad.setZero();
      for (std::size_t j = start; j < start + mb; ++j) {
        const Eigen::VectorXd& s = *states[order[j]];
        // ascent direction of -mean squared error
        const double standardized = (y[order[j]] - shift_) / scale_;
        dout[0] = -2.0 * (net_.forward(s, params_.data())[0] - standardized) / static_cast<double>(mb);
        net_.backward(s, params_.data(), dout, grad.data());
      }
      adam_step(adam_, params_, grad, learning_rate_, 1e-8);
    }
    losses.push_back(full_loss());
  }
  if (!params_.allFinite()) throw NumericError("value network parameters became non-finite");
  return losses;
}

void write_learning_curve_csv(std::ostream& out, const std::vector<LearningCurveRow>& rows) {
  out << "iteration,timesteps,eta_oracle,mean_return_mc,objective,clip_fraction,max_ratio,seed\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.timesteps << ',';
    if (r.eta_oracle) out << format_real(*r.eta_oracle);
    out << ',' << format_real(r.mean_return_mc) << ',' << format_real(r.objective) << ','
        << format_real(r.clip_fraction) << ',' << format_real(r.max_ratio) << ',' << r.seed << '\n';
  }
}

}  // namespace aispo
