#pragma once

#include <stdexcept>
#include <string>

namespace aispo {

// Bad input: malformed MDP, policy dimensions, config fields, out-of-range
// indices.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An importance ratio was requested where the behavior policy assigns zero
// probability to the action.
class SupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-finite value produced during estimation or optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal invariant (e.g. a singular system that cannot occur for a
// valid MDP).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace aispo
