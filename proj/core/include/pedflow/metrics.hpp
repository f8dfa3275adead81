#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pedflow/gridworld.hpp"
#include "pedflow/runner.hpp"
#include "pedflow/trajectory.hpp"

namespace pedflow::metrics {

/// Shortest round-trip decimal rendering (std::to_chars); the one double
/// formatter used in every CSV so outputs are byte-stable.
std::string format_double(double value);

struct LearningCurvePoint {
  int episode = 0;
  double mean = 0.0;
  double best = 0.0;
  double worst = 0.0;
  double se_mean = 0.0;
  double se_best = 0.0;
  double se_worst = 0.0;
};

/// Across-trial average of the per-episode mean/best/worst rewards with
/// standard errors (sample std / sqrt(n); zero for a single trial).
std::vector<LearningCurvePoint> learning_curve(
    const std::vector<std::vector<run::EpisodeRecord>>& trials);

/// v = mean episode reward / t_max; bounded by 1 in these tasks.
double average_velocity(double mean_episode_reward, int t_max);

/// rho = n_agent / number of walkable cells.
double average_density(int n_agent, const grid::MapSpec& map);

struct FundamentalPoint {
  int n_agent = 0;
  double rho_bar = 0.0;
  double v_bar = 0.0;
  double se = 0.0;
};

/// Mean velocity over an inclusive episode window (0-based indices),
/// averaged across trials with its standard error.
FundamentalPoint fundamental_point(
    const std::vector<std::vector<run::EpisodeRecord>>& trials, int n_agent,
    const grid::MapSpec& map, int t_max, int episode_from, int episode_to);

/// Inclusive snapshot windows, 0-based on both axes.
struct Window {
  int t_from = 0;
  int t_to = 0;
  int episode_from = 0;
  int episode_to = 0;
};

/// Per-cell, per-group mean occupancy over a window. Each group plane sums
/// to that group's agent count.
struct DensityMap {
  int width = 0;
  int height = 0;
  int n_groups = 0;
  std::vector<double> mean_occupancy;  // group-major planes, row-major cells

  double at(int group, int x, int y) const {
    return mean_occupancy[(static_cast<std::size_t>(group) * height + y) * width + x];
  }
  double plane_sum(int group) const;
};

/// Averages occupancy indicators over every stored snapshot inside the
/// window. Throws std::invalid_argument when the window selects nothing.
DensityMap accumulate_density(const io::TrajectoryReader& reader, const Window& window);

// CSV/PGM emitters. Curves: episode,mean,best,worst,se_mean,se_best,se_worst.
// Diagram: n_agent,rho_bar,v_bar,se. Density CSV: x,y,mean_occupancy.
// Density PGM: P5, 16 bit, row-major, value = round(65535 * occupancy / max).
void write_curve_csv(const std::string& path,
                     const std::vector<LearningCurvePoint>& points);
std::vector<LearningCurvePoint> read_curve_csv(const std::string& path);

void write_diagram_csv(const std::string& path,
                       const std::vector<FundamentalPoint>& points);

void write_density_csv(const std::string& path, const DensityMap& map, int group);
void write_density_pgm(const std::string& path, const DensityMap& map, int group);

/// JSON descriptor written next to emitted metrics files.
struct MetricsSidecar {
  Window window;
  std::string config_hash_hex;
  std::vector<std::uint64_t> trial_seeds;
  std::string source;
};

void write_sidecar(const std::string& path, const MetricsSidecar& sidecar);

}  // namespace pedflow::metrics
