#include "aispo/policy_io.hpp"

#include <sstream>

#include "aispo/errors.hpp"
#include "aispo/mdp_io.hpp"
#include "io_internal.hpp"

namespace aispo {
namespace {

std::string parameters_block(const Eigen::VectorXd& theta) {
  return "\n[parameters]\nvalues = " +
         tomlio::real_array(theta.data(), static_cast<std::size_t>(theta.size())) + "\n";
}

}  // namespace

namespace tomlio {

AnyPolicy policy_from_table(const toml::table& t, std::string_view ctx) {
  check_keys(t, {"architecture", "parameters"}, ctx);
  const std::string arch_ctx = qualified(ctx, "architecture");
  const std::string par_ctx = qualified(ctx, "parameters");
  const toml::table* arch = get_table(t, "architecture", ctx);
  const toml::table* par = get_table(t, "parameters", ctx);
  if (!arch) throw ValidationError("missing table '" + arch_ctx + "'");
  if (!par) throw ValidationError("missing table '" + par_ctx + "'");
  check_keys(*par, {"values"}, par_ctx);
  const std::vector<double> values = require(get_real_array(*par, "values", par_ctx), par_ctx, "values");
  const Eigen::VectorXd theta =
      Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));

  auto check_count = [&](Eigen::Index want) {
    if (theta.size() != want) {
      throw ValidationError("field '" + par_ctx + ".values' has length " +
                            std::to_string(theta.size()) + ", expected " + std::to_string(want));
    }
  };
  auto positive = [&](std::string_view key) {
    const int v = to_int(require(get_integer(*arch, key, arch_ctx), arch_ctx, key), arch_ctx, key);
    if (v < 1) throw ValidationError("field '" + qualified(arch_ctx, key) + "' must be positive");
    return v;
  };

  const std::string kind = require(get_string(*arch, "kind", arch_ctx), arch_ctx, "kind");
  if (kind == "tabular_softmax") {
    check_keys(*arch, {"kind", "n_states", "n_actions"}, arch_ctx);
    TabularSoftmaxPolicy p(positive("n_states"), positive("n_actions"));
    check_count(p.n_params());
    p.set_parameters(theta);
    return p;
  }
  if (kind == "gaussian_mlp") {
    check_keys(*arch, {"kind", "state_dim", "action_dim", "hidden", "activation"}, arch_ctx);
    if (auto hidden = get_real_array(*arch, "hidden", arch_ctx)) {
      if (hidden->size() != 2 || (*hidden)[0] != Mlp::kHidden || (*hidden)[1] != Mlp::kHidden) {
        throw ValidationError("field '" + qualified(arch_ctx, "hidden") + "' must be [" +
                              std::to_string(Mlp::kHidden) + ", " + std::to_string(Mlp::kHidden) +
                              "]");
      }
    }
    if (auto act = get_string(*arch, "activation", arch_ctx); act && *act != "tanh") {
      throw ValidationError("field '" + qualified(arch_ctx, "activation") + "' must be \"tanh\"");
    }
    GaussianMlpPolicy p(positive("state_dim"), positive("action_dim"), 0);
    check_count(p.n_params());
    p.set_parameters(theta);
    return p;
  }
  throw ValidationError("field '" + qualified(arch_ctx, "kind") + "' must be \"tabular_softmax\" or \"gaussian_mlp\"");
}

}  // namespace tomlio

std::string policy_to_toml(const TabularSoftmaxPolicy& policy) {
  std::ostringstream out;
  out << "[architecture]\nkind = \"tabular_softmax\"\nn_states = " << policy.n_states()
      << "\nn_actions = " << policy.n_actions() << "\n"
      << parameters_block(policy.parameters());
  return out.str();
}

std::string policy_to_toml(const GaussianMlpPolicy& policy) {
  std::ostringstream out;
  out << "[architecture]\nkind = \"gaussian_mlp\"\nstate_dim = " << policy.state_dim()
      << "\naction_dim = " << policy.action_dim() << "\nhidden = [" << Mlp::kHidden << ", "
      << Mlp::kHidden << "]\nactivation = \"tanh\"\n"
      << parameters_block(policy.parameters());
  return out.str();
}

std::string policy_to_toml(const AnyPolicy& policy) {
  return std::visit([](const auto& p) { return policy_to_toml(p); }, policy);
}

AnyPolicy parse_policy_toml(const std::string& text, const std::string& source) {
  return tomlio::policy_from_table(tomlio::parse_document(text, source), "");
}

AnyPolicy load_policy_toml(const std::string& path) {
  return parse_policy_toml(read_text_file(path), path);
}

}  // namespace aispo
