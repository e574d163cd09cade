#pragma once

#include <Eigen/Dense>

#include "aispo/envs.hpp"
#include "aispo/mdp.hpp"
#include "aispo/policies.hpp"

namespace aispo::test {

inline TabularMdp standard_chain() { return nchain_new(5, 0.2, 0.8); }

inline TabularSoftmaxPolicy bernoulli_policy(int n_states, double right) {
  Eigen::Vector2d p;
  p[kNChainForward] = right;
  p[kNChainBackward] = 1.0 - right;
  return TabularSoftmaxPolicy::state_independent(n_states, p);
}

inline PolicyTable bernoulli_table(int n_states, double right) {
  return bernoulli_policy(n_states, right).probabilities();
}

}  // namespace aispo::test
