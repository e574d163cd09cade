#pragma once

#include <string_view>

#include "aispo/mdp.hpp"
#include "aispo/policy_io.hpp"
#include "toml_support.hpp"

namespace aispo::tomlio {

TabularMdp mdp_from_table(const toml::table& t, std::string_view context);
AnyPolicy policy_from_table(const toml::table& t, std::string_view context);

}  // namespace aispo::tomlio
