#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <ostream>
#include <vector>

#include "aispo/mdp.hpp"
#include "aispo/policies.hpp"
#include "aispo/rng.hpp"

namespace aispo {

template <class State, class Action>
struct BasicTransition {
  State state{};
  Action action{};
  double reward = 0.0;
  State next_state{};
  double behavior_log_prob = 0.0;  // log pi(action | state) when sampled
  int time_index = 0;
};

template <class State, class Action>
struct BasicTrajectory {
  using StateType = State;
  using ActionType = Action;

  std::vector<BasicTransition<State, Action>> transitions;
  int truncated_at = 0;

  int size() const { return static_cast<int>(transitions.size()); }
  const BasicTransition<State, Action>& operator[](int t) const { return transitions[t]; }
};

using Transition = BasicTransition<int, int>;
using Trajectory = BasicTrajectory<int, int>;
using ContinuousTrajectory = BasicTrajectory<Eigen::VectorXd, Eigen::VectorXd>;

// ---------------------------------------------------------------- NChain

inline constexpr int kNChainForward = 0;
inline constexpr int kNChainBackward = 1;

/// Classic NChain. Forward moves one state up the chain (reward 0), and at the
/// last state stays put and pays 10. Backward returns to state 0 and pays 2.
/// With probability `slip` the executed action is the opposite one. The reward
/// table holds the expected reward over the slip outcome; mu0 is state 0.
TabularMdp nchain_new(int n_states, double slip, double gamma);

/// Samples exactly `horizon` steps from mdp.mu0 under `policy`.
Trajectory sample_trajectory(const TabularMdp& mdp, const TabularSoftmaxPolicy& policy,
                             int horizon, CounterRng& rng);

/// Trajectory number `index` of the stream (seed, Stream::kTrajectory).
Trajectory sample_trajectory(const TabularMdp& mdp, const TabularSoftmaxPolicy& policy,
                             int horizon, std::uint64_t seed, std::uint64_t index);

/// n trajectories; trajectory k uses CounterRng(seed, stream, k, batch), so
/// the result does not depend on `threads`.
std::vector<Trajectory> sample_trajectories(const TabularMdp& mdp,
                                            const TabularSoftmaxPolicy& policy, int horizon,
                                            std::size_t n, std::uint64_t seed, int threads = 1,
                                            Stream stream = Stream::kTrajectory,
                                            std::uint64_t batch = 0);

/// traj_id, t, state, action, reward, next_state, behavior_log_prob
void write_trajectories_csv(std::ostream& out, const std::vector<Trajectory>& trajectories);

/// Throws ValidationError if the chaining, time index or length invariants
/// are broken.
void validate_trajectory(const Trajectory& trajectory);

// ---------------------------------------------------------------- point mass

struct PointMassParams {
  double dt = 0.05;
  double action_cost = 0.01;
  int episode_length = 200;
  double action_bound = 1.0;
  Eigen::Vector2d goal{1.0, 0.0};
};

struct StepResult {
  Eigen::VectorXd next_state;
  double reward = 0.0;
};

/// 2-D point mass with state (x, v) in R^4 and a 2-D force clamped to
/// [-action_bound, action_bound]. Reward is -(|x - goal|^2 + c |a|^2) on the
/// pre-step position and the clamped action.
class PointMassEnv {
 public:
  explicit PointMassEnv(PointMassParams params = {});

  const PointMassParams& params() const { return params_; }
  static constexpr int kStateDim = 4;
  static constexpr int kActionDim = 2;

  Eigen::VectorXd initial_state() const { return Eigen::VectorXd::Zero(kStateDim); }
  StepResult step(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const;

 private:
  PointMassParams params_;
};

/// One full episode of a stochastic policy (anything with sample/log_prob).
template <class Policy>
ContinuousTrajectory rollout(const PointMassEnv& env, const Policy& policy, CounterRng& rng) {
  ContinuousTrajectory traj;
  const int length = env.params().episode_length;
  traj.truncated_at = length;
  traj.transitions.reserve(length);
  Eigen::VectorXd s = env.initial_state();
  for (int t = 0; t < length; ++t) {
    Eigen::VectorXd a = policy.sample(s, rng);
    const double lp = policy.log_prob(s, a);
    StepResult r = env.step(s, a);
    traj.transitions.push_back({s, a, r.reward, r.next_state, lp, t});
    s = std::move(r.next_state);
  }
  return traj;
}

/// Undiscounted episode return of a deterministic controller a = f(state).
template <class Controller>
double controller_return(const PointMassEnv& env, Controller&& controller) {
  Eigen::VectorXd s = env.initial_state();
  double total = 0.0;
  for (int t = 0; t < env.params().episode_length; ++t) {
    StepResult r = env.step(s, controller(s));
    total += r.reward;
    s = std::move(r.next_state);
  }
  return total;
}

}  // namespace aispo
