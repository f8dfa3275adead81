#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pedflow/config.hpp"
#include "pedflow/esn.hpp"
#include "pedflow/gridworld.hpp"
#include "pedflow/lspi.hpp"
#include "pedflow/rng.hpp"
#include "pedflow/trajectory.hpp"

namespace pedflow::run {

struct EpisodeRecord {
  int episode_index = 0;
  std::vector<long long> agent_rewards;  // episode totals
  double mean_reward = 0.0;
  long long best_reward = 0;
  long long worst_reward = 0;
  double epsilon_at_start = 0.0;
  double duration_seconds = 0.0;  // wall clock; kept out of deterministic outputs
};

struct TrialResult {
  int trial_index = 0;
  std::uint64_t trial_seed = 0;
  std::vector<EpisodeRecord> records;
  bool completed = false;
  std::string error;
};

/// Stream ids under a trial seed.
namespace trial_stream {
inline constexpr std::uint64_t kWeights = 0;
inline constexpr std::uint64_t kAgentBase = 1000;  // + agent id
}  // namespace trial_stream

/// Trial i draws its seed from the master seed independently of n_trials.
std::uint64_t trial_seed(std::uint64_t master_seed, int trial_index);

/// One trial: environment, shared weight bundle, per-unit accumulators,
/// epsilon schedule, per-agent action streams. Owns its directory when one
/// is given (records.csv, checkpoint.bin, trajectories.bin) and resumes
/// from an existing checkpoint automatically.
class TrialRunner {
 public:
  TrialRunner(const TrialConfig& config, int trial_index, std::string trial_dir = "");
  ~TrialRunner();

  /// Runs the remaining episodes; returns all records (including restored
  /// ones after a resume).
  TrialResult run();

  /// One episode: t_max environment steps, the terminal reservoir update,
  /// then per-unit accumulate / solve / forget and the epsilon decay.
  EpisodeRecord run_episode();

  /// Persist the full training state to <trial_dir>/checkpoint.bin.
  /// No-op without a trial directory.
  void save_checkpoint() const { write_checkpoint(); }

  int episodes_done() const { return episodes_done_; }
  const esn::WeightBundle& bundle() const { return bundle_; }
  const lspi::Accumulators& accumulators(int unit) const { return units_.at(unit); }
  const lspi::EpsilonSchedule& schedule() const { return schedule_; }
  const grid::Environment& environment() const { return env_; }
  const lspi::Grouping& grouping() const { return grouping_; }
  const std::vector<EpisodeRecord>& records() const { return records_; }
  std::uint64_t seed() const { return trial_seed_; }

 private:
  TrialConfig config_;
  int trial_index_;
  std::string dir_;
  std::uint64_t trial_seed_;
  TaskSetup setup_;
  grid::Environment env_;
  lspi::Grouping grouping_;
  esn::WeightBundle bundle_;
  std::vector<lspi::Accumulators> units_;
  lspi::EpsilonSchedule schedule_;
  std::vector<Rng> agent_rngs_;
  Eigen::MatrixXd states_;      // n_res x n_agent, column per agent
  Eigen::MatrixXd group_tags_;  // 2 x n_agent one-hot columns (cross-group mode)
  std::vector<lspi::EpisodeTrace> traces_;
  std::vector<EpisodeRecord> records_;
  std::unique_ptr<io::TrajectoryWriter> trajectory_;
  int episodes_done_ = 0;

  void select_and_commit(Eigen::MatrixXd& obs_cols, std::vector<grid::Action>& actions);
  bool try_resume();
  void open_trajectory(bool resumed);
  void write_checkpoint() const;
  io::TrajectoryHeader trajectory_header() const;
};

/// records.csv schema: episode,epsilon,mean_reward,best_reward,worst_reward,v_bar
void write_records_csv(const std::string& path, const std::vector<EpisodeRecord>& records,
                       int t_max);
std::vector<EpisodeRecord> read_records_csv(const std::string& path);

struct BatchResult {
  std::string run_dir;
  std::vector<TrialResult> trials;
  int completed_trials = 0;
  bool single_trial = false;
};

/// Runs n_trials trials (in parallel up to the jobs bound), writes per-trial
/// records plus the aggregate curve.csv and manifest.json when run_dir is
/// non-empty. Trials that fail are reported in the result and skipped in the
/// aggregate.
BatchResult run_batch(const TrialConfig& config, const std::string& run_dir);

}  // namespace pedflow::run
