#include "pedflow/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace pedflow::metrics {

std::string format_double(double value) {
  char buffer[32];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buffer, end);
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_and_se(const std::vector<double>& values) {
  MeanSe out;
  const std::size_t n = values.size();
  if (n == 0) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(n - 1)) /
             std::sqrt(static_cast<double>(n));
  }
  return out;
}

}  // namespace

std::vector<LearningCurvePoint> learning_curve(
    const std::vector<std::vector<run::EpisodeRecord>>& trials) {
  if (trials.empty()) throw std::invalid_argument("learning_curve: no trials");
  const std::size_t n_episodes = trials[0].size();
  for (const auto& records : trials)
    if (records.size() != n_episodes)
      throw std::invalid_argument("learning_curve: trials cover different episode counts");

  std::vector<LearningCurvePoint> curve;
  curve.reserve(n_episodes);
  std::vector<double> means(trials.size()), bests(trials.size()), worsts(trials.size());
  for (std::size_t e = 0; e < n_episodes; ++e) {
    for (std::size_t t = 0; t < trials.size(); ++t) {
      means[t] = trials[t][e].mean_reward;
      bests[t] = static_cast<double>(trials[t][e].best_reward);
      worsts[t] = static_cast<double>(trials[t][e].worst_reward);
    }
    const MeanSe m = mean_and_se(means);
    const MeanSe b = mean_and_se(bests);
    const MeanSe w = mean_and_se(worsts);
    LearningCurvePoint point;
    point.episode = trials[0][e].episode_index;
    point.mean = m.mean;
    point.best = b.mean;
    point.worst = w.mean;
    point.se_mean = m.se;
    point.se_best = b.se;
    point.se_worst = w.se;
    curve.push_back(point);
  }
  return curve;
}

double average_velocity(double mean_episode_reward, int t_max) {
  if (t_max <= 0) throw std::invalid_argument("average_velocity: t_max must be > 0");
  return mean_episode_reward / static_cast<double>(t_max);
}

double average_density(int n_agent, const grid::MapSpec& map) {
  const int walkable = map.walkable_count();
  if (walkable <= 0) throw std::invalid_argument("average_density: no walkable cells");
  return static_cast<double>(n_agent) / static_cast<double>(walkable);
}

FundamentalPoint fundamental_point(
    const std::vector<std::vector<run::EpisodeRecord>>& trials, int n_agent,
    const grid::MapSpec& map, int t_max, int episode_from, int episode_to) {
  if (trials.empty()) throw std::invalid_argument("fundamental_point: no trials");
  if (episode_from < 0 || episode_to < episode_from)
    throw std::invalid_argument("fundamental_point: bad episode window");

  std::vector<double> per_trial;
  per_trial.reserve(trials.size());
  for (const auto& records : trials) {
    if (episode_to >= static_cast<int>(records.size()))
      throw std::invalid_argument("fundamental_point: window beyond recorded episodes");
    double sum = 0.0;
    for (int e = episode_from; e <= episode_to; ++e)
      sum += average_velocity(records[e].mean_reward, t_max);
    per_trial.push_back(sum / static_cast<double>(episode_to - episode_from + 1));
  }
  const MeanSe agg = mean_and_se(per_trial);

  FundamentalPoint point;
  point.n_agent = n_agent;
  point.rho_bar = average_density(n_agent, map);
  point.v_bar = agg.mean;
  point.se = agg.se;
  return point;
}

double DensityMap::plane_sum(int group) const {
  double sum = 0.0;
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  for (std::size_t i = 0; i < plane; ++i)
    sum += mean_occupancy[static_cast<std::size_t>(group) * plane + i];
  return sum;
}

DensityMap accumulate_density(const io::TrajectoryReader& reader, const Window& window) {
  const io::TrajectoryHeader& header = reader.header();
  DensityMap map;
  map.width = static_cast<int>(header.width);
  map.height = static_cast<int>(header.height);
  map.n_groups = 0;
  for (std::uint8_t g : header.group_of)
    map.n_groups = std::max(map.n_groups, static_cast<int>(g) + 1);
  map.mean_occupancy.assign(
      static_cast<std::size_t>(map.n_groups) * map.width * map.height, 0.0);

  long long snapshots = 0;
  reader.scan([&](const io::TrajectorySnapshot& snap) {
    if (snap.episode_index < window.episode_from ||
        snap.episode_index > window.episode_to)
      return;
    if (snap.t < window.t_from || snap.t > window.t_to) return;
    ++snapshots;
    for (std::size_t a = 0; a < snap.positions.size(); ++a) {
      const int group = header.group_of[a];
      const auto [x, y] = snap.positions[a];
      map.mean_occupancy[(static_cast<std::size_t>(group) * map.height + y) *
                             map.width +
                         x] += 1.0;
    }
  });
  if (snapshots == 0)
    throw std::invalid_argument("accumulate_density: window selects no snapshots");
  const double scale = 1.0 / static_cast<double>(snapshots);
  for (double& v : map.mean_occupancy) v *= scale;
  return map;
}

void write_curve_csv(const std::string& path,
                     const std::vector<LearningCurvePoint>& points) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("curve: cannot open for write: " + path);
  out << "episode,mean,best,worst,se_mean,se_best,se_worst\n";
  for (const LearningCurvePoint& p : points) {
    out << p.episode << ',' << format_double(p.mean) << ',' << format_double(p.best)
        << ',' << format_double(p.worst) << ',' << format_double(p.se_mean) << ','
        << format_double(p.se_best) << ',' << format_double(p.se_worst) << '\n';
  }
  if (!out) throw std::runtime_error("curve: write failed: " + path);
}

std::vector<LearningCurvePoint> read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("curve: cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("curve: empty file: " + path);

  std::vector<LearningCurvePoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    LearningCurvePoint p;
    std::getline(row, field, ',');
    p.episode = std::stoi(field);
    std::getline(row, field, ',');
    p.mean = std::stod(field);
    std::getline(row, field, ',');
    p.best = std::stod(field);
    std::getline(row, field, ',');
    p.worst = std::stod(field);
    std::getline(row, field, ',');
    p.se_mean = std::stod(field);
    std::getline(row, field, ',');
    p.se_best = std::stod(field);
    std::getline(row, field, ',');
    p.se_worst = std::stod(field);
    points.push_back(p);
  }
  return points;
}

void write_diagram_csv(const std::string& path,
                       const std::vector<FundamentalPoint>& points) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("diagram: cannot open for write: " + path);
  out << "n_agent,rho_bar,v_bar,se\n";
  for (const FundamentalPoint& p : points) {
    out << p.n_agent << ',' << format_double(p.rho_bar) << ','
        << format_double(p.v_bar) << ',' << format_double(p.se) << '\n';
  }
  if (!out) throw std::runtime_error("diagram: write failed: " + path);
}

void write_density_csv(const std::string& path, const DensityMap& map, int group) {
  if (group < 0 || group >= map.n_groups)
    throw std::invalid_argument("density: group out of range");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("density: cannot open for write: " + path);
  out << "x,y,mean_occupancy\n";
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      out << x << ',' << y << ',' << format_double(map.at(group, x, y)) << '\n';
  if (!out) throw std::runtime_error("density: write failed: " + path);
}

void write_density_pgm(const std::string& path, const DensityMap& map, int group) {
  if (group < 0 || group >= map.n_groups)
    throw std::invalid_argument("density: group out of range");
  double max_value = 0.0;
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) max_value = std::max(max_value, map.at(group, x, y));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("density: cannot open for write: " + path);
  out << "P5\n" << map.width << ' ' << map.height << "\n65535\n";
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const double scaled =
          max_value > 0.0 ? 65535.0 * map.at(group, x, y) / max_value : 0.0;
      const auto pixel = static_cast<std::uint16_t>(std::lround(scaled));
      const char bytes[2] = {static_cast<char>((pixel >> 8) & 0xFF),
                             static_cast<char>(pixel & 0xFF)};  // PGM is big-endian
      out.write(bytes, 2);
    }
  }
  if (!out) throw std::runtime_error("density: write failed: " + path);
}

void write_sidecar(const std::string& path, const MetricsSidecar& sidecar) {
  nlohmann::json j;
  j["window"] = {{"t_from", sidecar.window.t_from},
                 {"t_to", sidecar.window.t_to},
                 {"episode_from", sidecar.window.episode_from},
                 {"episode_to", sidecar.window.episode_to}};
  j["config_hash"] = sidecar.config_hash_hex;
  j["trial_seeds"] = sidecar.trial_seeds;
  j["source"] = sidecar.source;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("sidecar: cannot open for write: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("sidecar: write failed: " + path);
}

}  // namespace pedflow::metrics
