// pedflow: configure, run, resume, and post-process grid-world pedestrian
// experiments. Exit codes: 0 success, 1 configuration/validation failure,
// 2 runtime failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "pedflow/config.hpp"
#include "pedflow/errors.hpp"
#include "pedflow/metrics.hpp"
#include "pedflow/runner.hpp"
#include "pedflow/tasks.hpp"
#include "pedflow/version.hpp"

namespace fs = std::filesystem;
using namespace pedflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string output_root() {
  if (const char* env = std::getenv("PEDFLOW_OUTPUT_ROOT")) return env;
  return "runs";
}

run::TrialConfig load_config_or_die(const std::string& path,
                                    const std::vector<std::string>& overrides) {
  return run::load_trial_config(path, overrides);
}

int report_validation(const run::TrialConfig& config) {
  const std::vector<run::ConfigIssue> issues = run::validate_config(config);
  int errors = 0;
  for (const run::ConfigIssue& issue : issues) {
    if (issue.severity == run::ConfigIssue::Severity::kError) {
      std::cout << "[error] " << issue.message << "\n";
      ++errors;
    } else {
      std::cout << "[warn]  " << issue.message << "\n";
    }
  }
  if (errors == 0) std::cout << "[ok] configuration valid\n";
  return errors;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            std::string out_dir, int jobs, bool log_trajectories) {
  run::TrialConfig config = load_config_or_die(config_path, overrides);
  if (jobs > 0) config.jobs = jobs;
  if (log_trajectories) config.log_trajectories = true;

  const std::vector<run::ConfigIssue> issues = run::validate_config(config);
  for (const run::ConfigIssue& issue : issues) {
    if (issue.severity == run::ConfigIssue::Severity::kError) {
      std::cerr << "error: " << issue.message << "\n";
      return kExitValidation;
    }
    std::cerr << "warning: " << issue.message << "\n";
  }

  if (out_dir.empty())
    out_dir = output_root() + "/" + run::config_hash_hex(config) + "-s" +
              std::to_string(config.master_seed);
  if (fs::exists(out_dir + "/manifest.json")) {
    std::cerr << "error: " << out_dir
              << " already holds a finished run; use `pedflow resume --run " << out_dir
              << "` or pick --out\n";
    return kExitValidation;
  }

  const run::BatchResult result = run::run_batch(config, out_dir);
  std::cout << "run directory: " << out_dir << "\n";
  std::cout << "trials completed: " << result.completed_trials << "/"
            << config.n_trials << "\n";
  return result.completed_trials == config.n_trials ? kExitOk : kExitRuntime;
}

int cmd_resume(const std::string& run_dir, int jobs) {
  const std::string config_path = run_dir + "/config.json";
  if (!fs::exists(config_path)) {
    std::cerr << "error: " << config_path << " not found\n";
    return kExitValidation;
  }
  run::TrialConfig config = run::load_trial_config(config_path);
  if (jobs > 0) config.jobs = jobs;

  const run::BatchResult result = run::run_batch(config, run_dir);
  std::cout << "run directory: " << run_dir << "\n";
  std::cout << "trials completed: " << result.completed_trials << "/"
            << config.n_trials << "\n";
  return result.completed_trials == config.n_trials ? kExitOk : kExitRuntime;
}

struct LoadedRun {
  run::TrialConfig config;
  std::vector<std::vector<run::EpisodeRecord>> trials;
  std::vector<std::string> trial_dirs;
  std::vector<std::uint64_t> seeds;
};

LoadedRun load_run(const std::string& run_dir) {
  LoadedRun loaded;
  loaded.config = run::load_trial_config(run_dir + "/config.json");
  for (int i = 0; i < loaded.config.n_trials; ++i) {
    const std::string trial_dir = run_dir + "/trial_" + std::to_string(i);
    const std::string records = trial_dir + "/records.csv";
    if (!fs::exists(records))
      throw std::runtime_error("missing " + records + " (incomplete run?)");
    loaded.trials.push_back(run::read_records_csv(records));
    loaded.trial_dirs.push_back(trial_dir);
    loaded.seeds.push_back(run::trial_seed(loaded.config.master_seed, i));
  }
  return loaded;
}

metrics::Window default_window(const run::TrialConfig& config, int t_from, int t_to,
                               int ep_from, int ep_to) {
  metrics::Window window;
  window.t_from = t_from >= 0 ? t_from : std::min(100, config.t_max - 1);
  window.t_to = t_to >= 0 ? t_to : config.t_max - 1;
  window.episode_from =
      ep_from >= 0 ? ep_from : std::max(0, config.n_episodes - 100);
  window.episode_to = ep_to >= 0 ? ep_to : config.n_episodes - 1;
  return window;
}

int cmd_metrics(const std::vector<std::string>& run_dirs, const std::string& which,
                std::string out_dir, int t_from, int t_to, int ep_from, int ep_to) {
  if (run_dirs.empty()) {
    std::cerr << "error: at least one --run directory required\n";
    return kExitValidation;
  }
  if (out_dir.empty()) out_dir = run_dirs.front() + "/metrics";
  fs::create_directories(out_dir);

  if (which == "curves") {
    const LoadedRun loaded = load_run(run_dirs.front());
    metrics::write_curve_csv(out_dir + "/curve.csv",
                             metrics::learning_curve(loaded.trials));
    metrics::MetricsSidecar sidecar;
    sidecar.window = default_window(loaded.config, t_from, t_to, ep_from, ep_to);
    sidecar.config_hash_hex = run::config_hash_hex(loaded.config);
    sidecar.trial_seeds = loaded.seeds;
    sidecar.source = run_dirs.front();
    metrics::write_sidecar(out_dir + "/curve.json", sidecar);
    std::cout << out_dir << "/curve.csv\n";
    return kExitOk;
  }

  if (which == "diagram") {
    std::vector<metrics::FundamentalPoint> points;
    metrics::MetricsSidecar sidecar;
    for (const std::string& run_dir : run_dirs) {
      const LoadedRun loaded = load_run(run_dir);
      const run::TaskSetup setup = run::resolve_task(loaded.config);
      const metrics::Window window =
          default_window(loaded.config, t_from, t_to, ep_from, ep_to);
      points.push_back(metrics::fundamental_point(
          loaded.trials, loaded.config.n_agent, setup.map, loaded.config.t_max,
          window.episode_from, window.episode_to));
      sidecar.window = window;
      sidecar.config_hash_hex = run::config_hash_hex(loaded.config);
      for (std::uint64_t s : loaded.seeds) sidecar.trial_seeds.push_back(s);
    }
    std::sort(points.begin(), points.end(),
              [](const metrics::FundamentalPoint& a, const metrics::FundamentalPoint& b) {
                return a.n_agent < b.n_agent;
              });
    metrics::write_diagram_csv(out_dir + "/diagram.csv", points);
    sidecar.source = run_dirs.front();
    metrics::write_sidecar(out_dir + "/diagram.json", sidecar);
    std::cout << out_dir << "/diagram.csv\n";
    return kExitOk;
  }

  if (which == "colormap") {
    const LoadedRun loaded = load_run(run_dirs.front());
    const metrics::Window window =
        default_window(loaded.config, t_from, t_to, ep_from, ep_to);
    for (int i = 0; i < loaded.config.n_trials; ++i) {
      const std::string traj = loaded.trial_dirs[i] + "/trajectories.bin";
      if (!fs::exists(traj)) {
        std::cerr << "error: " << traj
                  << " not found; rerun with --log-trajectories (or set "
                     "log_trajectories in the config) to record positions\n";
        return kExitRuntime;
      }
      const io::TrajectoryReader reader(traj);
      const metrics::DensityMap density = metrics::accumulate_density(reader, window);
      for (int g = 0; g < density.n_groups; ++g) {
        const std::string stem = out_dir + "/density_trial" + std::to_string(i) +
                                 "_group" + std::to_string(g);
        metrics::write_density_csv(stem + ".csv", density, g);
        metrics::write_density_pgm(stem + ".pgm", density, g);
      }
    }
    metrics::MetricsSidecar sidecar;
    sidecar.window = window;
    sidecar.config_hash_hex = run::config_hash_hex(loaded.config);
    sidecar.trial_seeds = loaded.seeds;
    sidecar.source = run_dirs.front();
    metrics::write_sidecar(out_dir + "/density.json", sidecar);
    std::cout << out_dir << "\n";
    return kExitOk;
  }

  std::cerr << "error: --which must be curves, colormap, or diagram\n";
  return kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grid-world pedestrian dynamics with reservoir agents"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string run_dir;
  std::vector<std::string> run_dirs;
  std::string which = "curves";
  int jobs = 0;
  bool log_trajectories = false;
  int t_from = -1, t_to = -1, ep_from = -1, ep_to = -1;

  CLI::App* run_cmd = app.add_subcommand("run", "execute a batch of trials");
  run_cmd->add_option("--config", config_path, "JSON config path")->required();
  run_cmd->add_option("--set", overrides, "override config keys (key.path=value)");
  run_cmd->add_option("--out", out_dir, "run directory (default: hash under output root)");
  run_cmd->add_option("--jobs", jobs, "parallel trial workers (default: all cores)");
  run_cmd->add_flag("--log-trajectories", log_trajectories,
                    "record per-step positions (needed for colormaps)");

  CLI::App* resume_cmd = app.add_subcommand("resume", "continue an interrupted run");
  resume_cmd->add_option("--run", run_dir, "run directory")->required();
  resume_cmd->add_option("--jobs", jobs, "parallel trial workers");

  CLI::App* metrics_cmd =
      app.add_subcommand("metrics", "derive curves, colormaps, or the fundamental diagram");
  metrics_cmd->add_option("--run", run_dirs, "run directories (several for diagram)")
      ->required();
  metrics_cmd->add_option("--which", which, "curves | colormap | diagram");
  metrics_cmd->add_option("--out", out_dir, "output directory (default: <run>/metrics)");
  metrics_cmd->add_option("--t-from", t_from, "snapshot window start (default 100)");
  metrics_cmd->add_option("--t-to", t_to, "snapshot window end (default t_max-1)");
  metrics_cmd->add_option("--ep-from", ep_from,
                          "episode window start, 0-based (default: last 100)");
  metrics_cmd->add_option("--ep-to", ep_to, "episode window end (default: last episode)");

  CLI::App* validate_cmd = app.add_subcommand("validate", "dry-run configuration checks");
  validate_cmd->add_option("--config", config_path, "JSON config path")->required();
  validate_cmd->add_option("--set", overrides, "override config keys (key.path=value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (run_cmd->parsed())
      return cmd_run(config_path, overrides, out_dir, jobs, log_trajectories);
    if (resume_cmd->parsed()) return cmd_resume(run_dir, jobs);
    if (metrics_cmd->parsed())
      return cmd_metrics(run_dirs, which, out_dir, t_from, t_to, ep_from, ep_to);
    if (validate_cmd->parsed()) {
      const run::TrialConfig config = load_config_or_die(config_path, overrides);
      return report_validation(config) == 0 ? kExitOk : kExitValidation;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << " (line " << e.line() << ", column "
              << e.column() << ")\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
