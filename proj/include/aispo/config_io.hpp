#pragma once

#include <optional>
#include <string>
#include <variant>

#include "aispo/envs.hpp"
#include "aispo/harness.hpp"
#include "aispo/mdp.hpp"
#include "aispo/optimizer.hpp"
#include "aispo/policy_io.hpp"

namespace aispo {

struct NChainEnvSpec {
  int n_states = 5;
  double slip = 0.2;
};

/// Training run: OptimConfig fields at top level plus an [env] table with
/// kind = "nchain" (n_states, slip; gamma is the config's) or
/// kind = "point_mass" (dt, action_cost, episode_length, action_bound, goal).
struct TrainConfig {
  OptimConfig optim;
  std::variant<NChainEnvSpec, PointMassParams> env = NChainEnvSpec{};
};

/// Every parser validates what it reads and throws ValidationError with the
/// field name. Keys that are absent keep their defaults; unknown keys are
/// rejected.
TrainConfig parse_train_config(const std::string& text, const std::string& source = "config");
SweepConfig parse_sweep_config(const std::string& text, const std::string& source = "config");
CheckConfig parse_check_config(const std::string& text, const std::string& source = "config");

/// Input of `solve`: either a bare MDP document, or an [mdp] table or an
/// [nchain] table (n_states, slip, gamma), optionally with a [policy] table
/// holding `probabilities` (one row per state), `state_independent` (one
/// distribution for all states) or a serialized tabular policy.
struct SolveInput {
  TabularMdp mdp;
  std::optional<PolicyTable> policy;
};
SolveInput parse_solve_input(const std::string& text, const std::string& source = "config");

/// Tabular policy table from a policy file (tabular_softmax only).
PolicyTable policy_table_from_file(const std::string& path);

}  // namespace aispo
