#include "pedflow/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pedflow/errors.hpp"
#include "pedflow/tasks.hpp"

namespace pedflow::run {

using nlohmann::json;

namespace {

json placement_to_json(const grid::PlacementPlan& plan) {
  json arr = json::array();
  for (const grid::GroupPlacement& g : plan.groups) {
    arr.push_back({{"count", g.count},
                   {"group_id", g.group_id},
                   {"target", g.target == grid::TargetDirection::kRight ? "right" : "left"},
                   {"x0", g.region.x0},
                   {"y0", g.region.y0},
                   {"x1", g.region.x1},
                   {"y1", g.region.y1},
                   {"fill_from_right", g.region.fill_from_right}});
  }
  return arr;
}

json config_to_json(const TrialConfig& c) {
  json j;
  j["schema_version"] = 1;
  j["task"] = c.task;
  j["map"] = c.map_path;
  j["n_agent"] = c.n_agent;
  j["n_episodes"] = c.n_episodes;
  j["t_max"] = c.t_max;
  j["group_mode"] = lspi::to_string(c.group_mode);
  j["n_trials"] = c.n_trials;
  j["master_seed"] = c.master_seed;
  j["jobs"] = c.jobs;
  j["log_trajectories"] = c.log_trajectories;
  j["checkpoint_every"] = c.checkpoint_every;
  j["memory_budget_bytes"] = c.memory_budget_bytes;
  j["esn"] = json{{"n_res", c.n_res},
                  {"alpha", c.alpha},
                  {"p_s1_in", c.profile.p_s1_in},
                  {"p_s2_in", c.profile.p_s2_in},
                  {"p_s3_in", c.profile.p_s3_in},
                  {"p_sb_in", c.profile.p_sb_in},
                  {"p_s_res", c.profile.p_s_res},
                  {"sigma_in_o", c.profile.sigma_in_o},
                  {"sigma_in_a", c.profile.sigma_in_a},
                  {"sigma_in_b", c.profile.sigma_in_b},
                  {"sigma_res_0", c.profile.sigma_res_0},
                  {"rho", c.profile.rho_target}};
  j["lspi"] = json{{"gamma", c.lspi.gamma},
                   {"lambda", c.lspi.lambda},
                   {"beta", c.lspi.beta},
                   {"epsilon0", c.lspi.epsilon0},
                   {"delta_epsilon", c.lspi.delta_epsilon},
                   {"epsilon_min", c.lspi.epsilon_min}};
  if (c.placement.has_value()) j["placement"] = placement_to_json(*c.placement);
  return j;
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw std::invalid_argument(key + ": " + why);
}

void check_known_keys(const json& obj, const std::set<std::string>& allowed,
                      const std::string& prefix) {
  for (const auto& [key, value] : obj.items())
    if (allowed.find(key) == allowed.end()) bad_key(prefix + key, "unknown key");
}

template <typename T>
void read_field(const json& obj, const std::string& prefix, const std::string& key,
                T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad_key(prefix + key, "invalid value type");
  }
}

grid::PlacementPlan placement_from_json(const json& arr) {
  if (!arr.is_array()) bad_key("placement", "must be an array of group placements");
  grid::PlacementPlan plan;
  int index = 0;
  for (const json& entry : arr) {
    const std::string prefix = "placement[" + std::to_string(index) + "].";
    if (!entry.is_object()) bad_key("placement[" + std::to_string(index) + "]",
                                    "must be an object");
    check_known_keys(entry,
                     {"count", "group_id", "target", "x0", "y0", "x1", "y1",
                      "fill_from_right"},
                     prefix);
    grid::GroupPlacement g;
    read_field(entry, prefix, "count", g.count);
    read_field(entry, prefix, "group_id", g.group_id);
    std::string target = "right";
    read_field(entry, prefix, "target", target);
    if (target == "right") {
      g.target = grid::TargetDirection::kRight;
    } else if (target == "left") {
      g.target = grid::TargetDirection::kLeft;
    } else {
      bad_key(prefix + "target", "must be right or left");
    }
    read_field(entry, prefix, "x0", g.region.x0);
    read_field(entry, prefix, "y0", g.region.y0);
    read_field(entry, prefix, "x1", g.region.x1);
    read_field(entry, prefix, "y1", g.region.y1);
    read_field(entry, prefix, "fill_from_right", g.region.fill_from_right);
    plan.groups.push_back(g);
    ++index;
  }
  return plan;
}

void apply_overrides(json& j, const std::vector<std::string>& overrides) {
  for (const std::string& assignment : overrides) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("override '" + assignment +
                                  "': expected key.path=value");
    std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    for (char& c : path)
      if (c == '.') c = '/';
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // bare strings are allowed unquoted
    }
    j[json::json_pointer("/" + path)] = parsed;
  }
}

}  // namespace

TrialConfig parse_trial_config(const std::string& json_text,
                               const std::vector<std::string>& overrides) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse failure: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  apply_overrides(j, overrides);

  check_known_keys(j,
                   {"schema_version", "task", "map", "n_agent", "n_episodes", "t_max",
                    "group_mode", "n_trials", "master_seed", "jobs", "log_trajectories",
                    "checkpoint_every", "memory_budget_bytes", "esn", "lspi",
                    "placement"},
                   "");

  int schema_version = 1;
  read_field(j, "", "schema_version", schema_version);
  if (schema_version != 1) bad_key("schema_version", "unsupported version");

  TrialConfig c;
  read_field(j, "", "task", c.task);
  read_field(j, "", "map", c.map_path);
  read_field(j, "", "n_agent", c.n_agent);
  read_field(j, "", "n_episodes", c.n_episodes);
  read_field(j, "", "t_max", c.t_max);
  if (j.contains("group_mode")) {
    std::string mode;
    read_field(j, "", "group_mode", mode);
    try {
      c.group_mode = lspi::group_mode_from_string(mode);
    } catch (const std::invalid_argument&) {
      bad_key("group_mode", "must be shared_within_group, independent, or "
                            "shared_across_groups");
    }
  }
  read_field(j, "", "n_trials", c.n_trials);
  read_field(j, "", "master_seed", c.master_seed);
  read_field(j, "", "jobs", c.jobs);
  read_field(j, "", "log_trajectories", c.log_trajectories);
  read_field(j, "", "checkpoint_every", c.checkpoint_every);
  read_field(j, "", "memory_budget_bytes", c.memory_budget_bytes);

  if (j.contains("esn")) {
    const json& e = j.at("esn");
    if (!e.is_object()) bad_key("esn", "must be an object");
    check_known_keys(e,
                     {"n_res", "alpha", "p_s1_in", "p_s2_in", "p_s3_in", "p_sb_in",
                      "p_s_res", "sigma_in_o", "sigma_in_a", "sigma_in_b",
                      "sigma_res_0", "rho"},
                     "esn.");
    read_field(e, "esn.", "n_res", c.n_res);
    read_field(e, "esn.", "alpha", c.alpha);
    read_field(e, "esn.", "p_s1_in", c.profile.p_s1_in);
    read_field(e, "esn.", "p_s2_in", c.profile.p_s2_in);
    read_field(e, "esn.", "p_s3_in", c.profile.p_s3_in);
    read_field(e, "esn.", "p_sb_in", c.profile.p_sb_in);
    read_field(e, "esn.", "p_s_res", c.profile.p_s_res);
    read_field(e, "esn.", "sigma_in_o", c.profile.sigma_in_o);
    read_field(e, "esn.", "sigma_in_a", c.profile.sigma_in_a);
    read_field(e, "esn.", "sigma_in_b", c.profile.sigma_in_b);
    read_field(e, "esn.", "sigma_res_0", c.profile.sigma_res_0);
    read_field(e, "esn.", "rho", c.profile.rho_target);
  }
  if (j.contains("lspi")) {
    const json& l = j.at("lspi");
    if (!l.is_object()) bad_key("lspi", "must be an object");
    check_known_keys(l,
                     {"gamma", "lambda", "beta", "epsilon0", "delta_epsilon",
                      "epsilon_min"},
                     "lspi.");
    read_field(l, "lspi.", "gamma", c.lspi.gamma);
    read_field(l, "lspi.", "lambda", c.lspi.lambda);
    read_field(l, "lspi.", "beta", c.lspi.beta);
    read_field(l, "lspi.", "epsilon0", c.lspi.epsilon0);
    read_field(l, "lspi.", "delta_epsilon", c.lspi.delta_epsilon);
    read_field(l, "lspi.", "epsilon_min", c.lspi.epsilon_min);
  }
  if (j.contains("placement")) c.placement = placement_from_json(j.at("placement"));
  return c;
}

TrialConfig load_trial_config(const std::string& path,
                              const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_trial_config(buffer.str(), overrides);
}

std::string to_canonical_json(const TrialConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

std::uint64_t config_hash(const TrialConfig& config) {
  json j = config_to_json(config);
  j.erase("master_seed");
  j.erase("jobs");
  j.erase("checkpoint_every");
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (const char c : dump) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash_hex(const TrialConfig& config) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = config_hash(config);
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i) {
    hex[i] = digits[h & 0xF];
    h >>= 4;
  }
  return hex;
}

TaskSetup resolve_task(const TrialConfig& config) {
  TaskSetup setup;
  if (!config.map_path.empty()) {
    setup.map = grid::load_map_file(config.map_path);
    if (!config.placement.has_value())
      throw std::invalid_argument("placement: required when a custom map is set");
  } else if (config.task == "task1") {
    setup.map = grid::tasks::task1_map();
  } else if (config.task == "task2") {
    setup.map = grid::tasks::task2_map();
  } else {
    throw std::invalid_argument("task: must be task1 or task2");
  }

  if (config.placement.has_value()) {
    setup.plan = *config.placement;
  } else {
    setup.plan = config.task == "task1" ? grid::tasks::task1_plan(config.n_agent)
                                        : grid::tasks::task2_plan(config.n_agent);
  }

  int total = 0;
  for (const grid::GroupPlacement& g : setup.plan.groups) {
    total += g.count;
    setup.n_groups = std::max(setup.n_groups, g.group_id + 1);
  }
  if (total != config.n_agent)
    throw std::invalid_argument("placement: group counts must sum to n_agent");
  return setup;
}

std::vector<ConfigIssue> validate_config(const TrialConfig& config) {
  std::vector<ConfigIssue> issues;
  auto error = [&issues](const std::string& message) {
    issues.push_back({ConfigIssue::Severity::kError, message});
  };
  auto warning = [&issues](const std::string& message) {
    issues.push_back({ConfigIssue::Severity::kWarning, message});
  };

  if (config.task != "task1" && config.task != "task2")
    error("task: must be task1 or task2");
  if (config.n_agent < 1) error("n_agent: must be >= 1");
  if (config.t_max < 1) error("t_max: must be >= 1");
  if (config.n_episodes < 0) error("n_episodes: must be >= 0");
  if (config.n_trials < 1) error("n_trials: must be >= 1");
  if (config.jobs < 0) error("jobs: must be >= 0");
  if (config.checkpoint_every < 1) error("checkpoint_every: must be >= 1");
  if (config.n_res < 1) error("esn.n_res: must be >= 1");
  if (!(config.alpha > 0.0 && config.alpha <= 1.0))
    error("esn.alpha: must be in (0,1]");
  try {
    config.profile.validate();
  } catch (const std::invalid_argument& e) {
    error(std::string("esn.") + e.what());
  }
  if (!(config.lspi.gamma > 0.0 && config.lspi.gamma < 1.0))
    error("lspi.gamma: must be in (0,1)");
  if (!(config.lspi.lambda > 0.0 && config.lspi.lambda <= 1.0))
    error("lspi.lambda: must be in (0,1]");
  if (!(config.lspi.beta > 0.0)) error("lspi.beta: must be > 0");
  if (!(config.lspi.epsilon0 >= 0.0 && config.lspi.epsilon0 <= 1.0))
    error("lspi.epsilon0: must be in [0,1]");
  if (!(config.lspi.delta_epsilon > 0.0 && config.lspi.delta_epsilon <= 1.0))
    error("lspi.delta_epsilon: must be in (0,1]");
  if (!(config.lspi.epsilon_min >= 0.0 && config.lspi.epsilon_min <= config.lspi.epsilon0))
    error("lspi.epsilon_min: must be in [0, epsilon0]");
  if (!issues.empty() &&
      std::any_of(issues.begin(), issues.end(), [](const ConfigIssue& i) {
        return i.severity == ConfigIssue::Severity::kError;
      }))
    return issues;  // range errors make the checks below meaningless

  TaskSetup setup;
  bool resolved = false;
  try {
    setup = resolve_task(config);
    resolved = true;
  } catch (const ParseError& e) {
    error(std::string("map: ") + e.what());
  } catch (const std::exception& e) {
    error(e.what());
  }

  if (resolved) {
    try {
      grid::place_agents_checkerboard(setup.map, setup.plan);
    } catch (const CapacityError& e) {
      error(std::string("placement: ") + e.what());
    } catch (const std::exception& e) {
      error(std::string("placement: ") + e.what());
    }

    if (config.task == "task2" && config.n_agent % 2 != 0 &&
        !config.placement.has_value())
      warning("n_agent: odd count splits unevenly between the two groups");

    int n_units = 1;
    switch (config.group_mode) {
      case lspi::GroupMode::kSharedWithinGroup: n_units = setup.n_groups; break;
      case lspi::GroupMode::kIndependent: n_units = config.n_agent; break;
      case lspi::GroupMode::kSharedAcrossGroups: n_units = 1; break;
    }
    if (config.group_mode == lspi::GroupMode::kSharedAcrossGroups &&
        setup.n_groups < 2)
      warning("group_mode: shared_across_groups with a single group only adds a "
              "constant input");

    const double dim = static_cast<double>(config.n_res) + 1.0;
    const double accumulator_bytes = static_cast<double>(n_units) * dim * dim * 8.0;
    if (accumulator_bytes > static_cast<double>(config.memory_budget_bytes)) {
      std::ostringstream msg;
      msg << "memory: " << n_units << " accumulator matrices of dim " << dim
          << " need ~" << static_cast<std::uint64_t>(accumulator_bytes / (1 << 20))
          << " MiB, budget is " << (config.memory_budget_bytes >> 20) << " MiB";
      warning(msg.str());
    }
  }
  return issues;
}

}  // namespace pedflow::run
