#include "aispo/mdp_io.hpp"

#include <fstream>
#include <sstream>

#include "aispo/errors.hpp"
#include "io_internal.hpp"

namespace aispo {
namespace tomlio {

TabularMdp mdp_from_table(const toml::table& t, std::string_view ctx) {
  check_keys(t, {"n_states", "n_actions", "gamma", "mu0", "transition", "reward"}, ctx);
  const int S = to_int(require(get_integer(t, "n_states", ctx), ctx, "n_states"), ctx, "n_states");
  const int A = to_int(require(get_integer(t, "n_actions", ctx), ctx, "n_actions"), ctx, "n_actions");
  if (S < 1) throw ValidationError("field '" + qualified(ctx, "n_states") + "' must be positive");
  if (A < 1) throw ValidationError("field '" + qualified(ctx, "n_actions") + "' must be positive");
  const double gamma = require(get_real(t, "gamma", ctx), ctx, "gamma");
  const std::vector<double> mu0 = require(get_real_array(t, "mu0", ctx), ctx, "mu0");
  std::vector<double> transition = require(get_real_array(t, "transition", ctx), ctx, "transition");
  const std::vector<double> reward = require(get_real_array(t, "reward", ctx), ctx, "reward");

  auto check_len = [&](std::size_t got, std::size_t want, std::string_view key) {
    if (got != want) {
      throw ValidationError("field '" + qualified(ctx, key) + "' has length " + std::to_string(got) +
                            ", expected " + std::to_string(want));
    }
  };
  const std::size_t s = static_cast<std::size_t>(S);
  const std::size_t a = static_cast<std::size_t>(A);
  check_len(mu0.size(), s, "mu0");
  check_len(transition.size(), s * a * s, "transition");
  check_len(reward.size(), s * a, "reward");

  Eigen::MatrixXd r(S, A);
  for (int i = 0; i < S; ++i) {
    for (int j = 0; j < A; ++j) r(i, j) = reward[static_cast<std::size_t>(i) * a + j];
  }
  Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(mu0.data(), S);
  return TabularMdp(S, A, std::move(transition), r, gamma, m);
}

}  // namespace tomlio

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TabularMdp parse_mdp_toml(const std::string& text, const std::string& source) {
  return tomlio::mdp_from_table(tomlio::parse_document(text, source), "");
}

TabularMdp load_mdp_toml(const std::string& path) {
  return parse_mdp_toml(read_text_file(path), path);
}

std::string mdp_to_toml(const TabularMdp& mdp) {
  using tomlio::real;
  using tomlio::real_array;
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  std::vector<double> reward;
  reward.reserve(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) reward.push_back(mdp.reward(s, a));
  }
  std::ostringstream out;
  out << "n_states = " << S << "\n";
  out << "n_actions = " << A << "\n";
  out << "gamma = " << real(mdp.gamma()) << "\n";
  out << "mu0 = " << real_array(mdp.mu0().data(), static_cast<std::size_t>(S)) << "\n";
  out << "transition = " << real_array(mdp.transition_flat().data(), mdp.transition_flat().size())
      << "\n";
  out << "reward = " << real_array(reward.data(), reward.size()) << "\n";
  return out.str();
}

}  // namespace aispo
