#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pedflow/esn.hpp"
#include "pedflow/gridworld.hpp"
#include "pedflow/lspi.hpp"

namespace pedflow::run {

struct LspiConfig {
  double gamma = 0.95;
  double lambda = 0.95;
  double beta = 1e-4;
  double epsilon0 = 1.0;
  double delta_epsilon = 0.95;
  double epsilon_min = 0.02;
};

/// Everything a batch of trials depends on. Full-scale values are the
/// defaults; jobs and checkpoint_every are execution details and do not
/// enter the config hash.
struct TrialConfig {
  std::string task = "task1";  // task1 | task2
  std::string map_path;        // empty = built-in map of the task
  int n_agent = 12;
  int n_episodes = 250;
  int t_max = 500;
  lspi::GroupMode group_mode = lspi::GroupMode::kSharedWithinGroup;

  int n_res = 1024;
  double alpha = 0.8;
  esn::SparsityProfile profile{};
  LspiConfig lspi{};

  std::uint64_t master_seed = 1;
  int n_trials = 8;
  int jobs = 0;  // 0 = hardware concurrency
  bool log_trajectories = false;
  int checkpoint_every = 50;
  std::uint64_t memory_budget_bytes = 512ull << 20;

  /// Optional placement override (required when map_path is set).
  /// Group counts must sum to n_agent.
  std::optional<grid::PlacementPlan> placement;
};

/// Parse a JSON config, apply `--set key.path=value` overrides, fill
/// defaults. Unknown keys and malformed values raise std::invalid_argument
/// naming the offending key.
TrialConfig parse_trial_config(const std::string& json_text,
                               const std::vector<std::string>& overrides = {});
TrialConfig load_trial_config(const std::string& path,
                              const std::vector<std::string>& overrides = {});

/// Canonical JSON rendering: sorted keys, stable number formatting.
std::string to_canonical_json(const TrialConfig& config);

/// FNV-1a 64 over the canonical JSON, excluding execution details
/// (master_seed, jobs, checkpoint_every).
std::uint64_t config_hash(const TrialConfig& config);
std::string config_hash_hex(const TrialConfig& config);

struct ConfigIssue {
  enum class Severity { kError, kWarning };
  Severity severity;
  std::string message;
};

/// Dry-run checks: value ranges, map load, placement capacity, memory
/// estimate for the group mode. Never throws for reportable problems.
std::vector<ConfigIssue> validate_config(const TrialConfig& config);

/// Map plus placement plan the config resolves to.
struct TaskSetup {
  grid::MapSpec map;
  grid::PlacementPlan plan;
  int n_groups = 1;
};

TaskSetup resolve_task(const TrialConfig& config);

}  // namespace pedflow::run
