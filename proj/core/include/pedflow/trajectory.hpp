#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "pedflow/gridworld.hpp"

namespace pedflow::io {

/// Binary per-trial trajectory log, one snapshot per environment step.
///
/// Layout: magic "PFTRAJ01", u32 width, u32 height, u32 n_agents, u32 t_max,
/// u8 group id per agent, then per episode: u32 episode index followed by
/// t_max snapshots of n_agents (u16 x, u16 y) pairs. Snapshot t holds the
/// positions the agents acted from at step t.
struct TrajectoryHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t n_agents = 0;
  std::uint32_t t_max = 0;
  std::vector<std::uint8_t> group_of;
};

std::size_t trajectory_episode_stride(const TrajectoryHeader& header);

class TrajectoryWriter {
 public:
  /// Creates or truncates the file and writes the header.
  TrajectoryWriter(const std::string& path, const TrajectoryHeader& header);

  /// Reopens an existing file for append, keeping the first
  /// episodes_to_keep episodes. The stored header must match.
  TrajectoryWriter(const std::string& path, const TrajectoryHeader& header,
                   int episodes_to_keep);

  void begin_episode(int episode_index);
  void record_snapshot(const std::vector<grid::AgentState>& agents);
  void end_episode();  // verifies exactly t_max snapshots were recorded
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  TrajectoryHeader header_;
  int snapshots_in_episode_ = -1;  // -1 = outside an episode
  std::string path_;
};

struct TrajectorySnapshot {
  int episode_index = 0;
  int t = 0;
  std::vector<std::pair<std::uint16_t, std::uint16_t>> positions;  // per agent
};

class TrajectoryReader {
 public:
  explicit TrajectoryReader(const std::string& path);

  const TrajectoryHeader& header() const { return header_; }
  int n_episodes() const { return n_episodes_; }

  /// Sequentially visits every stored snapshot.
  void scan(const std::function<void(const TrajectorySnapshot&)>& fn) const;

 private:
  std::string path_;
  TrajectoryHeader header_;
  std::size_t data_start_ = 0;
  int n_episodes_ = 0;
};

}  // namespace pedflow::io
