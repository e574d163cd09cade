#pragma once

#include <string>

#include "aispo/mdp.hpp"

namespace aispo {

/// Keys: n_states, n_actions, gamma, mu0, transition (flat S*A*S, row-major
/// as in TabularMdp::p), reward (flat S*A). Throws ValidationError naming
/// the offending field.
TabularMdp parse_mdp_toml(const std::string& text, const std::string& source = "mdp");
TabularMdp load_mdp_toml(const std::string& path);

/// Inverse of parse_mdp_toml; reals printed in shortest round-trip form.
std::string mdp_to_toml(const TabularMdp& mdp);

/// Reads a whole file; throws ValidationError if it cannot be opened.
std::string read_text_file(const std::string& path);

}  // namespace aispo
