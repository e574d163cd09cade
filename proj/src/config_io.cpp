#include "aispo/config_io.hpp"

#include "aispo/errors.hpp"
#include "aispo/mdp_io.hpp"
#include "io_internal.hpp"

namespace aispo {

using namespace tomlio;

namespace {

template <class T>
void assign(T& field, std::optional<T> v) {
  if (v) field = std::move(*v);
}

int read_int(const toml::table& t, std::string_view key, std::string_view ctx, int fallback) {
  auto v = get_integer(t, key, ctx);
  return v ? to_int(*v, ctx, key) : fallback;
}

long long read_long(const toml::table& t, std::string_view key, std::string_view ctx,
                    long long fallback) {
  auto v = get_integer(t, key, ctx);
  return v ? static_cast<long long>(*v) : fallback;
}

std::uint64_t read_seed(const toml::table& t, std::string_view ctx, std::uint64_t fallback) {
  auto v = get_integer(t, "seed", ctx);
  if (!v) return fallback;
  if (*v < 0) throw ValidationError("field '" + qualified(ctx, "seed") + "' must be non-negative");
  return static_cast<std::uint64_t>(*v);
}

Decay read_decay(const toml::table& t, std::string_view key, Decay fallback) {
  auto v = get_string(t, key, "");
  if (!v) return fallback;
  if (*v == "linear") return Decay::kLinearToZero;
  if (*v == "constant") return Decay::kConstant;
  throw ValidationError("field '" + std::string(key) + "' must be \"linear\" or \"constant\"");
}

AlphaSchedule read_schedule(const std::vector<double>& suffix, std::string_view field) {
  try {
    return AlphaSchedule(suffix);
  } catch (const ValidationError& e) {
    throw ValidationError("field '" + std::string(field) + "': " + e.what());
  }
}

PointMassParams read_point_mass(const toml::table& t, std::string_view ctx) {
  check_keys(t, {"kind", "dt", "action_cost", "episode_length", "action_bound", "goal"}, ctx);
  PointMassParams p;
  assign(p.dt, get_real(t, "dt", ctx));
  assign(p.action_cost, get_real(t, "action_cost", ctx));
  p.episode_length = read_int(t, "episode_length", ctx, p.episode_length);
  assign(p.action_bound, get_real(t, "action_bound", ctx));
  if (auto goal = get_real_array(t, "goal", ctx)) {
    if (goal->size() != 2) throw ValidationError("field '" + qualified(ctx, "goal") + "' must have 2 entries");
    p.goal = Eigen::Vector2d((*goal)[0], (*goal)[1]);
  }
  auto bad = [&](std::string_view key, const char* what) {
    throw ValidationError("field '" + qualified(ctx, key) + "' " + what);
  };
  if (!(p.dt > 0.0 && std::isfinite(p.dt))) bad("dt", "must be positive");
  if (!(p.action_cost >= 0.0 && std::isfinite(p.action_cost))) bad("action_cost", "must be non-negative");
  if (p.episode_length < 1) bad("episode_length", "must be positive");
  if (!(p.action_bound > 0.0 && std::isfinite(p.action_bound))) bad("action_bound", "must be positive");
  if (!p.goal.allFinite()) bad("goal", "must be finite");
  return p;
}

NChainEnvSpec read_nchain(const toml::table& t, std::string_view ctx,
                          std::initializer_list<std::string_view> keys) {
  check_keys(t, keys, ctx);
  NChainEnvSpec spec;
  spec.n_states = read_int(t, "n_states", ctx, spec.n_states);
  assign(spec.slip, get_real(t, "slip", ctx));
  if (spec.n_states < 2) throw ValidationError("field '" + qualified(ctx, "n_states") + "' must be at least 2");
  if (!(spec.slip >= 0.0 && spec.slip <= 1.0)) {
    throw ValidationError("field '" + qualified(ctx, "slip") + "' must lie in [0, 1]");
  }
  return spec;
}

}  // namespace

TrainConfig parse_train_config(const std::string& text, const std::string& source) {
  const toml::table doc = parse_document(text, source);
  check_keys(doc,
             {"learning_rate", "adam_epsilon", "minibatch_size", "updates_per_batch",
              "batch_transitions", "clip_omega", "gamma", "gae_lambda", "schedule", "lr_decay",
              "clip_decay", "discount_weighting", "total_timesteps", "seed", "horizon",
              "value_learning_rate", "value_epochs", "env"},
             "");
  TrainConfig cfg;
  OptimConfig& c = cfg.optim;
  assign(c.learning_rate, get_real(doc, "learning_rate", ""));
  assign(c.adam_epsilon, get_real(doc, "adam_epsilon", ""));
  c.minibatch_size = read_int(doc, "minibatch_size", "", c.minibatch_size);
  c.updates_per_batch = read_int(doc, "updates_per_batch", "", c.updates_per_batch);
  c.batch_transitions = read_int(doc, "batch_transitions", "", c.batch_transitions);
  assign(c.clip_omega, get_real(doc, "clip_omega", ""));
  assign(c.gamma, get_real(doc, "gamma", ""));
  assign(c.gae_lambda, get_real(doc, "gae_lambda", ""));
  if (auto s = get_real_array(doc, "schedule", "")) c.schedule = read_schedule(*s, "schedule");
  c.lr_decay = read_decay(doc, "lr_decay", c.lr_decay);
  c.clip_decay = read_decay(doc, "clip_decay", c.clip_decay);
  assign(c.discount_weighting, get_bool(doc, "discount_weighting", ""));
  c.total_timesteps = read_long(doc, "total_timesteps", "", c.total_timesteps);
  c.seed = read_seed(doc, "", c.seed);
  c.horizon = read_int(doc, "horizon", "", c.horizon);
  assign(c.value_learning_rate, get_real(doc, "value_learning_rate", ""));
  c.value_epochs = read_int(doc, "value_epochs", "", c.value_epochs);
  validate_config(c);

  if (const toml::table* env = get_table(doc, "env", "")) {
    const std::string kind = require(get_string(*env, "kind", "env"), "env", "kind");
    if (kind == "nchain") {
      cfg.env = read_nchain(*env, "env", {"kind", "n_states", "slip"});
    } else if (kind == "point_mass") {
      cfg.env = read_point_mass(*env, "env");
    } else {
      throw ValidationError("field 'env.kind' must be \"nchain\" or \"point_mass\"");
    }
  }
  return cfg;
}

SweepConfig parse_sweep_config(const std::string& text, const std::string& source) {
  const toml::table doc = parse_document(text, source);
  check_keys(doc,
             {"pi_right", "pi_tilde_right_grid", "beta_grid", "n_trajectories", "n_replicates",
              "horizon", "seed", "schedule_template", "beta_fills_prefix", "dispersion",
              "nchain_states", "slip", "gamma"},
             "");
  SweepConfig c;
  assign(c.pi_right, get_real(doc, "pi_right", ""));
  assign(c.pi_tilde_right_grid, get_real_array(doc, "pi_tilde_right_grid", ""));
  assign(c.beta_grid, get_real_array(doc, "beta_grid", ""));
  c.n_trajectories = read_long(doc, "n_trajectories", "", c.n_trajectories);
  c.n_replicates = read_int(doc, "n_replicates", "", c.n_replicates);
  c.horizon = read_int(doc, "horizon", "", c.horizon);
  c.seed = read_seed(doc, "", c.seed);
  if (const toml::node* node = doc.get("schedule_template")) {
    const toml::array* arr = node->as_array();
    if (!arr) throw ValidationError("field 'schedule_template' must be an array");
    c.schedule_template.clear();
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const toml::node& item = (*arr)[i];
      if (auto s = item.value_exact<std::string>(); s && *s == "beta") {
        c.schedule_template.push_back(std::nullopt);
      } else if (auto v = as_real(item)) {
        c.schedule_template.push_back(*v);
      } else {
        throw ValidationError("field 'schedule_template[" + std::to_string(i) +
                              "]' must be a number or \"beta\"");
      }
    }
  }
  assign(c.beta_fills_prefix, get_bool(doc, "beta_fills_prefix", ""));
  if (auto d = get_string(doc, "dispersion", "")) {
    if (*d == "per_trajectory") {
      c.dispersion = Dispersion::kPerTrajectory;
    } else if (*d == "per_replicate") {
      c.dispersion = Dispersion::kPerReplicate;
    } else {
      throw ValidationError("field 'dispersion' must be \"per_trajectory\" or \"per_replicate\"");
    }
  }
  c.nchain_states = read_int(doc, "nchain_states", "", c.nchain_states);
  assign(c.slip, get_real(doc, "slip", ""));
  assign(c.gamma, get_real(doc, "gamma", ""));
  validate_sweep_config(c);
  return c;
}

CheckConfig parse_check_config(const std::string& text, const std::string& source) {
  const toml::table doc = parse_document(text, source);
  check_keys(doc,
             {"seed", "fault", "sigma", "nchain_states", "slip", "gamma", "horizon", "pi_right",
              "pi_tilde_right_grid", "random_instances", "random_states", "random_actions",
              "random_gamma", "identity_tolerance", "value_iteration_tolerance", "is_trajectories",
              "bound_trajectories", "gradient_trajectories", "bound_pi_tilde_right",
              "bound_schedules", "consistency_schedules", "enumeration_instances",
              "enumeration_horizon", "enumeration_gamma", "gradient_points", "fd_step",
              "fd_tolerance"},
             "");
  CheckConfig c;
  c.seed = read_seed(doc, "", c.seed);
  if (auto f = get_string(doc, "fault", "")) {
    if (*f == "none") {
      c.fault = OracleFault::kNone;
    } else if (*f == "occupancy_scale") {
      c.fault = OracleFault::kOccupancyScale;
    } else {
      throw ValidationError("field 'fault' must be \"none\" or \"occupancy_scale\"");
    }
  }
  assign(c.sigma, get_real(doc, "sigma", ""));
  c.nchain_states = read_int(doc, "nchain_states", "", c.nchain_states);
  assign(c.slip, get_real(doc, "slip", ""));
  assign(c.gamma, get_real(doc, "gamma", ""));
  c.horizon = read_int(doc, "horizon", "", c.horizon);
  assign(c.pi_right, get_real(doc, "pi_right", ""));
  assign(c.pi_tilde_right_grid, get_real_array(doc, "pi_tilde_right_grid", ""));
  c.random_instances = read_int(doc, "random_instances", "", c.random_instances);
  c.random_states = read_int(doc, "random_states", "", c.random_states);
  c.random_actions = read_int(doc, "random_actions", "", c.random_actions);
  assign(c.random_gamma, get_real(doc, "random_gamma", ""));
  assign(c.identity_tolerance, get_real(doc, "identity_tolerance", ""));
  assign(c.value_iteration_tolerance, get_real(doc, "value_iteration_tolerance", ""));
  c.is_trajectories = read_long(doc, "is_trajectories", "", c.is_trajectories);
  c.bound_trajectories = read_long(doc, "bound_trajectories", "", c.bound_trajectories);
  c.gradient_trajectories = read_long(doc, "gradient_trajectories", "", c.gradient_trajectories);
  assign(c.bound_pi_tilde_right, get_real(doc, "bound_pi_tilde_right", ""));
  assign(c.bound_schedules, get_real_matrix(doc, "bound_schedules", ""));
  assign(c.consistency_schedules, get_real_matrix(doc, "consistency_schedules", ""));
  c.enumeration_instances = read_int(doc, "enumeration_instances", "", c.enumeration_instances);
  c.enumeration_horizon = read_int(doc, "enumeration_horizon", "", c.enumeration_horizon);
  assign(c.enumeration_gamma, get_real(doc, "enumeration_gamma", ""));
  c.gradient_points = read_int(doc, "gradient_points", "", c.gradient_points);
  assign(c.fd_step, get_real(doc, "fd_step", ""));
  assign(c.fd_tolerance, get_real(doc, "fd_tolerance", ""));
  validate_check_config(c);
  return c;
}

SolveInput parse_solve_input(const std::string& text, const std::string& source) {
  const toml::table doc = parse_document(text, source);
  const toml::table* mdp_table = get_table(doc, "mdp", "");
  const toml::table* nchain_table = get_table(doc, "nchain", "");
  const toml::table* policy_table = get_table(doc, "policy", "");

  if (!mdp_table && !nchain_table) {
    return SolveInput{mdp_from_table(doc, ""), std::nullopt};
  }
  check_keys(doc, {"mdp", "nchain", "policy"}, "");
  if (mdp_table && nchain_table) throw ValidationError("give either [mdp] or [nchain], not both");

  std::optional<TabularMdp> mdp;
  if (mdp_table) {
    mdp = mdp_from_table(*mdp_table, "mdp");
  } else {
    const NChainEnvSpec spec = read_nchain(*nchain_table, "nchain", {"n_states", "slip", "gamma"});
    const double gamma = require(get_real(*nchain_table, "gamma", "nchain"), "nchain", "gamma");
    mdp = nchain_new(spec.n_states, spec.slip, gamma);
  }

  std::optional<PolicyTable> policy;
  if (policy_table) {
    const int S = mdp->n_states();
    const int A = mdp->n_actions();
    if (policy_table->contains("architecture")) {
      AnyPolicy p = policy_from_table(*policy_table, "policy");
      const auto* tab = std::get_if<TabularSoftmaxPolicy>(&p);
      if (!tab) throw ValidationError("field 'policy.architecture.kind' must be \"tabular_softmax\"");
      policy = tab->probabilities();
    } else {
      check_keys(*policy_table, {"probabilities", "state_independent"}, "policy");
      if (auto rows = get_real_matrix(*policy_table, "probabilities", "policy")) {
        if (static_cast<int>(rows->size()) != S) {
          throw ValidationError("field 'policy.probabilities' must have one row per state");
        }
        PolicyTable table(S, A);
        for (int s = 0; s < S; ++s) {
          if (static_cast<int>((*rows)[s].size()) != A) {
            throw ValidationError("field 'policy.probabilities[" + std::to_string(s) +
                                  "]' must have one entry per action");
          }
          for (int a = 0; a < A; ++a) table(s, a) = (*rows)[s][a];
        }
        policy = table;
      } else if (auto dist = get_real_array(*policy_table, "state_independent", "policy")) {
        if (static_cast<int>(dist->size()) != A) {
          throw ValidationError("field 'policy.state_independent' must have one entry per action");
        }
        PolicyTable table(S, A);
        for (int s = 0; s < S; ++s) {
          for (int a = 0; a < A; ++a) table(s, a) = (*dist)[a];
        }
        policy = table;
      } else {
        throw ValidationError("table 'policy' needs 'probabilities', 'state_independent' or a serialized policy");
      }
    }
    try {
      validate_policy(*mdp, *policy);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("field 'policy': ") + e.what());
    }
  }
  return SolveInput{std::move(*mdp), std::move(policy)};
}

PolicyTable policy_table_from_file(const std::string& path) {
  AnyPolicy p = load_policy_toml(path);
  const auto* tab = std::get_if<TabularSoftmaxPolicy>(&p);
  if (!tab) throw ValidationError(path + ": field 'architecture.kind' must be \"tabular_softmax\"");
  return tab->probabilities();
}

}  // namespace aispo
