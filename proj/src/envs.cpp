#include "aispo/envs.hpp"

#include <cmath>
#include <string>

#include "aispo/errors.hpp"
#include "aispo/format.hpp"
#include "aispo/parallel.hpp"

namespace aispo {

TabularMdp nchain_new(int n_states, double slip, double gamma) {
  if (n_states < 2) throw ValidationError("nchain n_states must be at least 2");
  if (!(slip >= 0.0 && slip <= 1.0)) throw ValidationError("nchain slip must lie in [0, 1]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("nchain gamma must lie in (0, 1)");
  const int n = n_states;
  std::vector<double> p(static_cast<std::size_t>(n) * 2 * n, 0.0);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, 2);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < 2; ++a) {
      const int flipped = 1 - a;
      for (int pass = 0; pass < 2; ++pass) {
        const int executed = pass == 0 ? a : flipped;
        const double weight = pass == 0 ? 1.0 - slip : slip;
        if (weight == 0.0) continue;
        int next = 0;
        double reward = 2.0;
        if (executed == kNChainForward) {
          next = std::min(s + 1, n - 1);
          reward = s == n - 1 ? 10.0 : 0.0;
        }
        p[(static_cast<std::size_t>(s) * 2 + a) * n + next] += weight;
        r(s, a) += weight * reward;
      }
    }
  }
  Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(n);
  mu0[0] = 1.0;
  return TabularMdp(n, 2, std::move(p), std::move(r), gamma, std::move(mu0));
}

namespace {

int sample_next(const TabularMdp& mdp, int s, int a, CounterRng& rng) {
  const auto row = mdp.next_distribution(s, a);
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last = 0;
  for (int s2 = 0; s2 < mdp.n_states(); ++s2) {
    if (row[s2] > 0.0) last = s2;
    cumulative += row[s2];
    if (u < cumulative) return s2;
  }
  return last;
}

int sample_initial(const TabularMdp& mdp, CounterRng& rng) {
  const Eigen::VectorXd& mu0 = mdp.mu0();
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last = 0;
  for (int s = 0; s < mdp.n_states(); ++s) {
    if (mu0[s] > 0.0) last = s;
    cumulative += mu0[s];
    if (u < cumulative) return s;
  }
  return last;
}

}  // namespace

Trajectory sample_trajectory(const TabularMdp& mdp, const TabularSoftmaxPolicy& policy,
                             int horizon, CounterRng& rng) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw ValidationError("policy dimensions do not match the MDP");
  }
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  Trajectory traj;
  traj.truncated_at = horizon;
  traj.transitions.reserve(horizon);
  int s = sample_initial(mdp, rng);
  for (int t = 0; t < horizon; ++t) {
    const int a = policy.sample(s, rng);
    const int next = sample_next(mdp, s, a, rng);
    traj.transitions.push_back({s, a, mdp.reward(s, a), next, policy.log_prob(s, a), t});
    s = next;
  }
  return traj;
}

Trajectory sample_trajectory(const TabularMdp& mdp, const TabularSoftmaxPolicy& policy,
                             int horizon, std::uint64_t seed, std::uint64_t index) {
  CounterRng rng(seed, Stream::kTrajectory, index, 0);
  return sample_trajectory(mdp, policy, horizon, rng);
}

std::vector<Trajectory> sample_trajectories(const TabularMdp& mdp,
                                            const TabularSoftmaxPolicy& policy, int horizon,
                                            std::size_t n, std::uint64_t seed, int threads,
                                            Stream stream, std::uint64_t batch) {
  std::vector<Trajectory> out(n);
  parallel_for(n, threads, [&](std::size_t k) {
    CounterRng rng(seed, stream, k, batch);
    out[k] = sample_trajectory(mdp, policy, horizon, rng);
  });
  return out;
}

void write_trajectories_csv(std::ostream& out, const std::vector<Trajectory>& trajectories) {
  out << "traj_id,t,state,action,reward,next_state,behavior_log_prob\n";
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    for (const Transition& tr : trajectories[k].transitions) {
      out << k << ',' << tr.time_index << ',' << tr.state << ',' << tr.action << ','
          << format_real(tr.reward) << ',' << tr.next_state << ','
          << format_real(tr.behavior_log_prob) << '\n';
    }
  }
}

void validate_trajectory(const Trajectory& trajectory) {
  if (trajectory.size() > trajectory.truncated_at) {
    throw ValidationError("trajectory longer than its truncation horizon");
  }
  for (int t = 0; t < trajectory.size(); ++t) {
    const Transition& tr = trajectory[t];
    if (tr.time_index != t) throw ValidationError("time_index must count up from 0");
    if (!std::isfinite(tr.behavior_log_prob)) {
      throw ValidationError("behavior_log_prob must be finite at t=" + std::to_string(t));
    }
    if (t + 1 < trajectory.size() && tr.next_state != trajectory[t + 1].state) {
      throw ValidationError("transitions do not chain at t=" + std::to_string(t));
    }
  }
}

PointMassEnv::PointMassEnv(PointMassParams params) : params_(std::move(params)) {
  if (!(params_.dt > 0.0)) throw ValidationError("point mass dt must be positive");
  if (!(params_.action_cost >= 0.0)) throw ValidationError("point mass action_cost must be non-negative");
  if (params_.episode_length < 1) throw ValidationError("point mass episode_length must be positive");
  if (!(params_.action_bound > 0.0)) throw ValidationError("point mass action_bound must be positive");
}

StepResult PointMassEnv::step(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const {
  if (state.size() != kStateDim) throw ValidationError("point mass state must have 4 entries");
  if (action.size() != kActionDim) throw ValidationError("point mass action must have 2 entries");
  if (!action.allFinite()) throw ValidationError("point mass action must be finite");
  const Eigen::Vector2d a =
      action.cwiseMax(-params_.action_bound).cwiseMin(params_.action_bound);
  const Eigen::Vector2d x = state.head<2>();
  const Eigen::Vector2d v = state.tail<2>();
  StepResult r;
  r.reward = -((x - params_.goal).squaredNorm() + params_.action_cost * a.squaredNorm());
  r.next_state.resize(kStateDim);
  r.next_state.head<2>() = x + params_.dt * v;
  r.next_state.tail<2>() = v + params_.dt * a;
  return r;
}

}  // namespace aispo
