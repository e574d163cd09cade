#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "aispo/envs.hpp"
#include "aispo/errors.hpp"
#include "aispo/estimators.hpp"
#include "aispo/mdp.hpp"
#include "aispo/parallel.hpp"
#include "aispo/policies.hpp"
#include "aispo/rng.hpp"
#include "aispo/schedule.hpp"

namespace aispo {

enum class Decay { kLinearToZero, kConstant };

struct OptimConfig {
  double learning_rate = 3e-4;
  double adam_epsilon = 1e-5;
  int minibatch_size = 64;
  int updates_per_batch = 320;
  int batch_transitions = 2048;
  double clip_omega = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  AlphaSchedule schedule{std::vector<double>{1.0}};
  Decay lr_decay = Decay::kLinearToZero;
  Decay clip_decay = Decay::kLinearToZero;
  bool discount_weighting = true;
  long long total_timesteps = 1000000;
  std::uint64_t seed = 0;
  // Steps per trajectory for tabular tasks; episodic tasks bring their own.
  int horizon = 62;
  double value_learning_rate = 1e-3;
  int value_epochs = 10;
};

void validate_config(const OptimConfig& config);

// ---------------------------------------------------------------- Adam

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long long step = 0;

  AdamState() = default;
  explicit AdamState(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// Bias-corrected Adam in the ascent convention: params += lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& gradient,
               double lr, double epsilon, double beta1 = 0.9, double beta2 = 0.999);

// ---------------------------------------------------------------- gradients

struct TermInfo {
  double ratio = 1.0;     // rho_hat at t
  bool clipped = false;   // zero gradient through the clamp
  double value = 0.0;     // f (clipped when a clip is applied)
};

/// Value of f at step t and, if `grad` is non-null, grad += scale * d f.
/// With omega set the clipped composition min(clamp(rho) A, rho A) is used.
template <class Policy, class S, class A>
TermInfo accumulate_term(const BasicTrajectory<S, A>& traj, const Policy& pi_tilde,
                         const AlphaSchedule& schedule, double advantage, int t,
                         std::optional<double> omega, double scale, Eigen::VectorXd* grad) {
  if (t < 0 || t >= traj.size()) throw ValidationError("timestep outside its trajectory");
  const int first = schedule.first_index(t);
  double acc = 0.0;
  for (int i = first; i <= t; ++i) {
    const double w = schedule.weight(t, i);
    if (w == 0.0) continue;
    const auto& tr = traj[i];
    const double term = w * (pi_tilde.log_prob(tr.state, tr.action) - tr.behavior_log_prob);
    if (!std::isfinite(term)) {
      throw NumericError("non-finite log ratio in smoothed product at t=" + std::to_string(t) +
                         ", i=" + std::to_string(i));
    }
    acc += term;
  }
  TermInfo info;
  info.ratio = std::exp(acc);
  if (!std::isfinite(info.ratio)) {
    throw NumericError("smoothed ratio overflows at t=" + std::to_string(t));
  }
  if (omega) {
    info.value = clip_objective(info.ratio, advantage, *omega);
    info.clipped = clip_active(info.ratio, advantage, *omega);
  } else {
    info.value = info.ratio * advantage;
  }
  if (grad && !info.clipped) {
    const double common = scale * info.ratio * advantage;
    for (int i = first; i <= t; ++i) {
      const double w = schedule.weight(t, i);
      if (w == 0.0) continue;
      pi_tilde.add_grad_log_prob(traj[i].state, traj[i].action, common * w, *grad);
    }
  }
  return info;
}

/// rho_hat_t * sum_i alpha_t^i grad log pi_tilde(a_i|s_i) * A_t
template <class Policy, class S, class A>
Eigen::VectorXd grad_f_alpha(const BasicTrajectory<S, A>& traj, const Policy& pi_tilde,
                             const AlphaSchedule& schedule, std::span<const double> advantages,
                             int t) {
  if (static_cast<int>(advantages.size()) != traj.size()) {
    throw ValidationError("advantages are not aligned with the trajectory");
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(pi_tilde.n_params());
  accumulate_term(traj, pi_tilde, schedule, advantages[t], t, std::nullopt, 1.0, &g);
  return g;
}

/// Gradient of the clipped term; zero when the clamped branch is active.
template <class Policy, class S, class A>
Eigen::VectorXd grad_f_alpha_clipped(const BasicTrajectory<S, A>& traj, const Policy& pi_tilde,
                                     const AlphaSchedule& schedule,
                                     std::span<const double> advantages, int t, double omega) {
  if (static_cast<int>(advantages.size()) != traj.size()) {
    throw ValidationError("advantages are not aligned with the trajectory");
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(pi_tilde.n_params());
  accumulate_term(traj, pi_tilde, schedule, advantages[t], t, omega, 1.0, &g);
  return g;
}

/// sum_t gamma^t grad f_t for one trajectory (no clipping).
template <class Policy, class S, class A>
Eigen::VectorXd l_alpha_gradient(const BasicTrajectory<S, A>& traj, const Policy& pi_tilde,
                                 const AlphaSchedule& schedule, std::span<const double> advantages,
                                 double gamma) {
  if (static_cast<int>(advantages.size()) != traj.size()) {
    throw ValidationError("advantages are not aligned with the trajectory");
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(pi_tilde.n_params());
  double discount = 1.0;
  for (int t = 0; t < traj.size(); ++t) {
    accumulate_term(traj, pi_tilde, schedule, advantages[t], t, std::nullopt, discount, &g);
    discount *= gamma;
  }
  return g;
}

struct TimestepRef {
  int trajectory = 0;
  int t = 0;
};

/// Collected trajectories plus one advantage per transition. Every timestep
/// reference keeps its trajectory, so the back-history the schedule needs is
/// always available.
template <class Traj>
struct Batch {
  std::vector<Traj> trajectories;
  std::vector<std::vector<double>> advantages;

  std::vector<TimestepRef> all_timesteps() const {
    std::vector<TimestepRef> refs;
    for (int k = 0; k < static_cast<int>(trajectories.size()); ++k) {
      for (int t = 0; t < trajectories[k].size(); ++t) refs.push_back({k, t});
    }
    return refs;
  }
};

struct ObjectiveSpec {
  AlphaSchedule schedule{std::vector<double>{1.0}};
  std::optional<double> omega;  // no clipping when empty
  double gamma = 0.99;
  bool discount_weighting = true;

  double weight(int t) const { return discount_weighting ? std::pow(gamma, t) : 1.0; }
};

struct ObjectiveStats {
  double objective = 0.0;
  double clip_fraction = 0.0;
  double max_ratio = 1.0;
  double mean_ratio = 1.0;
};

namespace detail {

template <class Traj>
void check_ref(const Batch<Traj>& batch, const TimestepRef& r) {
  if (r.trajectory < 0 || r.trajectory >= static_cast<int>(batch.trajectories.size())) {
    throw ValidationError("minibatch references a missing trajectory");
  }
  const auto& traj = batch.trajectories[r.trajectory];
  if (r.t < 0 || r.t >= traj.size()) throw ValidationError("minibatch references a missing timestep");
  if (batch.advantages.size() != batch.trajectories.size() ||
      static_cast<int>(batch.advantages[r.trajectory].size()) != traj.size()) {
    throw ValidationError("batch advantages are not aligned with its trajectories");
  }
}

}  // namespace detail

/// |B|^-1 sum_{t in B} w_t f_t, with clip statistics over the same steps.
template <class Traj, class Policy>
ObjectiveStats evaluate_objective(const Batch<Traj>& batch, const Policy& pi_tilde,
                                  std::span<const TimestepRef> refs, const ObjectiveSpec& spec) {
  if (refs.empty()) throw ValidationError("empty minibatch");
  ObjectiveStats st;
  double total = 0.0;
  double ratio_total = 0.0;
  std::size_t clipped = 0;
  st.max_ratio = 0.0;
  for (const TimestepRef& r : refs) {
    detail::check_ref(batch, r);
    const TermInfo info =
        accumulate_term(batch.trajectories[r.trajectory], pi_tilde, spec.schedule,
                        batch.advantages[r.trajectory][r.t], r.t, spec.omega, 0.0, nullptr);
    total += spec.weight(r.t) * info.value;
    ratio_total += info.ratio;
    st.max_ratio = std::max(st.max_ratio, info.ratio);
    if (info.clipped) ++clipped;
  }
  const double n = static_cast<double>(refs.size());
  st.objective = total / n;
  st.clip_fraction = static_cast<double>(clipped) / n;
  st.mean_ratio = ratio_total / n;
  return st;
}

/// |B|^-1 sum_{t in B} w_t grad f_t
template <class Traj, class Policy>
Eigen::VectorXd grad_objective_minibatch(const Batch<Traj>& batch, const Policy& pi_tilde,
                                         std::span<const TimestepRef> refs,
                                         const ObjectiveSpec& spec) {
  if (refs.empty()) throw ValidationError("empty minibatch");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(pi_tilde.n_params());
  for (const TimestepRef& r : refs) {
    detail::check_ref(batch, r);
    accumulate_term(batch.trajectories[r.trajectory], pi_tilde, spec.schedule,
                    batch.advantages[r.trajectory][r.t], r.t, spec.omega, spec.weight(r.t), &g);
  }
  return g / static_cast<double>(refs.size());
}

// ---------------------------------------------------------------- critics

/// Per-state value table.
class TabularCritic {
 public:
  explicit TabularCritic(int n_states) : v_(Eigen::VectorXd::Zero(n_states)) {}

  double operator()(int s) const { return v_[s]; }
  const Eigen::VectorXd& values() const { return v_; }
  void set_values(const Eigen::VectorXd& v) { v_ = v; }

  /// Least squares per state: the mean of the targets seen at each state.
  /// States never visited fall back to 0 and are returned.
  std::vector<int> fit(const std::vector<Trajectory>& trajectories,
                       const std::vector<std::vector<double>>& targets);

 private:
  Eigen::VectorXd v_;
};

TabularCritic fit_value_function(const std::vector<Trajectory>& trajectories,
                                 const std::vector<std::vector<double>>& targets, int n_states);

/// Mlp value function trained with Adam on the squared error. The network
/// predicts standardized values; each fit moves the standardization to the
/// new targets and rescales the output layer so predictions are unchanged by
/// the move (returns far from 0 would otherwise take many Adam steps to reach).
class MlpCritic {
 public:
  MlpCritic(int state_dim, std::uint64_t seed, double learning_rate = 1e-3, int epochs = 10,
            int minibatch_size = 64);

  double operator()(const Eigen::VectorXd& s) const;

  /// Mean squared error on the full training set before training and after
  /// each epoch.
  std::vector<double> fit(const std::vector<ContinuousTrajectory>& trajectories,
                          const std::vector<std::vector<double>>& targets, CounterRng& rng);

 private:
  Mlp net_;
  Eigen::VectorXd params_;
  AdamState adam_;
  double shift_ = 0.0;
  double scale_ = 1.0;
  double learning_rate_;
  int epochs_;
  int minibatch_size_;
};

inline void fit_critic(TabularCritic& critic, const std::vector<Trajectory>& trajectories,
                       const std::vector<std::vector<double>>& targets, CounterRng&) {
  critic.fit(trajectories, targets);
}
inline void fit_critic(MlpCritic& critic, const std::vector<ContinuousTrajectory>& trajectories,
                       const std::vector<std::vector<double>>& targets, CounterRng& rng) {
  critic.fit(trajectories, targets, rng);
}

// ---------------------------------------------------------------- tasks

/// Continuing tabular MDP sampled for a fixed number of steps.
struct TabularTask {
  using Policy = TabularSoftmaxPolicy;
  using Traj = Trajectory;

  TabularMdp mdp;
  int horizon = 62;

  Traj sample(const Policy& policy, CounterRng& rng) const {
    return sample_trajectory(mdp, policy, horizon, rng);
  }
  int steps_per_trajectory() const { return horizon; }
  bool bootstrap() const { return true; }
  std::optional<double> exact_eta(const Policy& policy) const {
    return solve_policy_exact(mdp, policy.probabilities()).eta;
  }
};

/// Fixed-length point-mass episodes; the last step is a true end.
struct PointMassTask {
  using Policy = GaussianMlpPolicy;
  using Traj = ContinuousTrajectory;

  PointMassEnv env;

  Traj sample(const Policy& policy, CounterRng& rng) const { return rollout(env, policy, rng); }
  int steps_per_trajectory() const { return env.params().episode_length; }
  bool bootstrap() const { return false; }
  std::optional<double> exact_eta(const Policy&) const { return std::nullopt; }
};

// ---------------------------------------------------------------- training

struct LearningCurveRow {
  int iteration = 0;
  long long timesteps = 0;
  std::optional<double> eta_oracle;
  double mean_return_mc = 0.0;
  double objective = 0.0;
  double clip_fraction = 0.0;
  double max_ratio = 1.0;
  std::uint64_t seed = 0;
};

/// iteration, timesteps, eta_oracle, mean_return_mc, objective, clip_fraction, max_ratio, seed
void write_learning_curve_csv(std::ostream& out, const std::vector<LearningCurveRow>& rows);

template <class Task>
struct TrainOptions {
  using Policy = typename Task::Policy;
  using Traj = typename Task::Traj;
  using GradientRule = std::function<Eigen::VectorXd(
      const Batch<Traj>&, const Policy&, std::span<const TimestepRef>, const ObjectiveSpec&)>;

  int threads = 1;
  bool record_params = false;  // keep the parameters after every Adam step
  GradientRule gradient_rule;  // replaces grad_objective_minibatch when set
};

template <class Policy>
struct TrainResult {
  std::vector<LearningCurveRow> curve;
  Policy final_policy;
  std::vector<Eigen::VectorXd> parameter_history;
};

/// Number of whole trajectories collected per iteration.
inline int trajectories_per_batch(const OptimConfig& config, int steps_per_trajectory) {
  return (config.batch_transitions + steps_per_trajectory - 1) / steps_per_trajectory;
}

/// Mean undiscounted return of `n` trajectories from the evaluation stream:
/// trajectory k uses CounterRng(seed, Stream::kEvaluation, k, 0).
template <class Task>
double evaluate_mean_return(const Task& task, const typename Task::Policy& policy,
                            std::uint64_t seed, int n, int threads = 1) {
  if (n < 1) throw ValidationError("evaluation needs at least one trajectory");
  std::vector<double> returns(static_cast<std::size_t>(n));
  parallel_for(returns.size(), threads, [&](std::size_t k) {
    CounterRng rng(seed, Stream::kEvaluation, k, 0);
    double total = 0.0;
    for (const auto& step : task.sample(policy, rng).transitions) total += step.reward;
    returns[k] = total;
  });
  return mean_in_order(returns);
}

/// The sample / estimate / update loop. Row i of the curve describes policy
/// pi_i (before any update for i = 0) together with the statistics of the
/// update that produced it. The extra final row evaluates the returned policy
/// on a separate evaluation stream.
template <class Task, class Critic>
TrainResult<typename Task::Policy> train(const Task& task, typename Task::Policy policy,
                                         Critic critic, const OptimConfig& config,
                                         const TrainOptions<Task>& options = {}) {
  using Policy = typename Task::Policy;
  using Traj = typename Task::Traj;
  validate_config(config);

  const int steps = task.steps_per_trajectory();
  const int n_traj = trajectories_per_batch(config, steps);
  const long long per_iteration = static_cast<long long>(n_traj) * steps;
  const long long iterations = (config.total_timesteps + per_iteration - 1) / per_iteration;

  auto collect = [&](const Policy& p, Stream stream, std::uint64_t batch_id) {
    std::vector<Traj> out(static_cast<std::size_t>(n_traj));
    parallel_for(out.size(), options.threads, [&](std::size_t k) {
      CounterRng rng(config.seed, stream, k, batch_id);
      out[k] = task.sample(p, rng);
    });
    return out;
  };
  auto mean_return = [](const std::vector<Traj>& trajs) {
    double total = 0.0;
    for (const Traj& tr : trajs) {
      double ret = 0.0;
      for (const auto& step : tr.transitions) ret += step.reward;
      total += ret;
    }
    return total / static_cast<double>(trajs.size());
  };

  TrainResult<Policy> result{{}, policy, {}};
  AdamState adam(policy.n_params());
  ObjectiveStats last;
  if (options.record_params) result.parameter_history.push_back(policy.parameters());

  for (long long it = 0; it < iterations; ++it) {
    Batch<Traj> batch;
    batch.trajectories = collect(policy, Stream::kTrajectory, static_cast<std::uint64_t>(it));
    result.curve.push_back({static_cast<int>(it), it * per_iteration, task.exact_eta(policy),
                            mean_return(batch.trajectories), last.objective, last.clip_fraction,
                            last.max_ratio, config.seed});

    std::vector<std::vector<double>> targets;
    for (const Traj& tr : batch.trajectories) {
      AdvantageEstimate est = gae(tr, critic, config.gamma, config.gae_lambda, task.bootstrap());
      batch.advantages.push_back(std::move(est.advantages));
      targets.push_back(discounted_returns(tr, config.gamma, est.bootstrap_value));
    }
    CounterRng value_rng(config.seed, Stream::kMinibatch, static_cast<std::uint64_t>(it), 1);
    fit_critic(critic, batch.trajectories, targets, value_rng);

    const double progress =
        1.0 - static_cast<double>(it * per_iteration) / static_cast<double>(config.total_timesteps);
    const double lr = config.learning_rate *
                      (config.lr_decay == Decay::kLinearToZero ? progress : 1.0);
    ObjectiveSpec spec;
    spec.schedule = config.schedule;
    spec.omega = config.clip_omega * (config.clip_decay == Decay::kLinearToZero ? progress : 1.0);
    spec.gamma = config.gamma;
    spec.discount_weighting = config.discount_weighting;

    std::vector<TimestepRef> refs = batch.all_timesteps();
    std::vector<TimestepRef> order = refs;
    CounterRng shuffle_rng(config.seed, Stream::kMinibatch, static_cast<std::uint64_t>(it), 0);
    auto reshuffle = [&] {
      for (std::size_t j = order.size(); j > 1; --j) {
        std::swap(order[j - 1], order[shuffle_rng.below(j)]);
      }
    };
    reshuffle();
    const std::size_t mb = std::min<std::size_t>(config.minibatch_size, order.size());
    std::size_t pos = 0;

    Policy tilde = policy;
    Eigen::VectorXd theta = tilde.parameters();
    for (int u = 0; u < config.updates_per_batch; ++u) {
      if (pos + mb > order.size()) {
        reshuffle();
        pos = 0;
      }
      const std::span<const TimestepRef> minibatch(order.data() + pos, mb);
      pos += mb;
      const Eigen::VectorXd g = options.gradient_rule
                                    ? options.gradient_rule(batch, tilde, minibatch, spec)
                                    : grad_objective_minibatch(batch, tilde, minibatch, spec);
      adam_step(adam, theta, g, lr, config.adam_epsilon);
      if (!theta.allFinite()) {
        throw NumericError("policy parameters became non-finite at iteration " +
                           std::to_string(it) + ", update " + std::to_string(u) +
                           " (|grad| = " + std::to_string(g.norm()) +
                           ", last finite |theta| = " + std::to_string(tilde.parameters().norm()) +
                           ")");
      }
      tilde.set_parameters(theta);
      if (options.record_params) result.parameter_history.push_back(theta);
    }
    last = evaluate_objective(batch, tilde, refs, spec);
    policy = tilde;
  }

  result.curve.push_back({static_cast<int>(iterations), iterations * per_iteration,
                          task.exact_eta(policy),
                          evaluate_mean_return(task, policy, config.seed, n_traj, options.threads),
                          last.objective,
                          last.clip_fraction, last.max_ratio, config.seed});
  result.final_policy = policy;
  return result;
}

}  // namespace aispo
