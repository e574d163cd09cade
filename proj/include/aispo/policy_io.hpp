#pragma once

#include <string>
#include <variant>

#include "aispo/policies.hpp"

namespace aispo {

using AnyPolicy = std::variant<TabularSoftmaxPolicy, GaussianMlpPolicy>;

/// Text format: an [architecture] table naming the policy class and its
/// shape, then [parameters] values = [...] holding the flat parameter vector.
///
///   [architecture]
///   kind = "tabular_softmax"        # n_states, n_actions
///   kind = "gaussian_mlp"           # state_dim, action_dim, hidden = [32, 32], activation = "tanh"
///
/// Reals are written in shortest round-trip form, so a round trip is exact.
/// Tabular logits may be -inf.
std::string policy_to_toml(const TabularSoftmaxPolicy& policy);
std::string policy_to_toml(const GaussianMlpPolicy& policy);
std::string policy_to_toml(const AnyPolicy& policy);

AnyPolicy parse_policy_toml(const std::string& text, const std::string& source = "policy");
AnyPolicy load_policy_toml(const std::string& path);

}  // namespace aispo
