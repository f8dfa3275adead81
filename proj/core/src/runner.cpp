#include "pedflow/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "pedflow/checkpoint.hpp"
#include "pedflow/errors.hpp"
#include "pedflow/metrics.hpp"
#include "pedflow/version.hpp"

namespace pedflow::run {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t trial_seed(std::uint64_t master_seed, int trial_index) {
  return derive_stream(master_seed, static_cast<std::uint64_t>(trial_index));
}

namespace {

lspi::Grouping make_grouping(const TrialConfig& config, const grid::Environment& env) {
  std::vector<int> group_of(env.n_agents());
  for (int i = 0; i < env.n_agents(); ++i) group_of[i] = env.agents()[i].group_id;
  return lspi::Grouping(config.group_mode, std::move(group_of));
}

std::string checkpoint_path(const std::string& dir) { return dir + "/checkpoint.bin"; }
std::string trajectory_path(const std::string& dir) { return dir + "/trajectories.bin"; }

}  // namespace

TrialRunner::TrialRunner(const TrialConfig& config, int trial_index,
                         std::string trial_dir)
    : config_(config),
      trial_index_(trial_index),
      dir_(std::move(trial_dir)),
      trial_seed_(trial_seed(config.master_seed, trial_index)),
      setup_(resolve_task(config)),
      env_(setup_.map, setup_.plan),
      grouping_(make_grouping(config, env_)),
      bundle_(esn::build_weight_bundle(
          config.n_res, config.profile,
          derive_stream(trial_seed_, trial_stream::kWeights), config.alpha,
          grouping_.n_units(), grouping_.uses_group_tag())),
      schedule_{config.lspi.epsilon0, config.lspi.epsilon0, config.lspi.delta_epsilon,
                config.lspi.epsilon_min} {
  const int n = env_.n_agents();
  units_.reserve(grouping_.n_units());
  for (int u = 0; u < grouping_.n_units(); ++u)
    units_.emplace_back(config_.n_res + 1, config_.lspi.beta, u);

  agent_rngs_.reserve(n);
  for (int i = 0; i < n; ++i)
    agent_rngs_.emplace_back(derive_stream(trial_seed_, trial_stream::kAgentBase + i));

  states_ = Eigen::MatrixXd::Zero(config_.n_res, n);
  traces_.resize(n);

  if (grouping_.uses_group_tag()) {
    group_tags_.resize(esn::kNumGroups, n);
    for (int i = 0; i < n; ++i) group_tags_.col(i) = grouping_.group_tag(i);
  }
}

TrialRunner::~TrialRunner() = default;

void TrialRunner::select_and_commit(Eigen::MatrixXd& obs_cols,
                                    std::vector<grid::Action>& actions) {
  const int n = env_.n_agents();
  for (int i = 0; i < n; ++i) obs_cols.col(i) = env_.observe(i).bits;

  const Eigen::MatrixXd* tags = grouping_.uses_group_tag() ? &group_tags_ : nullptr;
  const Eigen::MatrixXd x_in =
      esn::input_preactivations(obs_cols, states_, bundle_, tags);

  for (int i = 0; i < n; ++i) {
    const esn::CandidateEvaluation eval =
        esn::finish_candidates(x_in.col(i), states_.col(i), bundle_, grouping_.unit_of(i));
    const int action = lspi::epsilon_greedy(eval.q, schedule_.epsilon, agent_rngs_[i]);
    states_.col(i) = eval.states.col(action);
    actions[i] = static_cast<grid::Action>(action);
  }
}

EpisodeRecord TrialRunner::run_episode() {
  const auto start = std::chrono::steady_clock::now();
  const int n = env_.n_agents();
  const int n_res = config_.n_res;

  env_.reset();
  states_.setZero();
  for (lspi::EpisodeTrace& trace : traces_) trace.clear();

  EpisodeRecord record;
  record.episode_index = episodes_done_;
  record.epsilon_at_start = schedule_.epsilon;

  Eigen::MatrixXd obs_cols(esn::kObsDim, n);
  std::vector<grid::Action> actions(n);
  Eigen::VectorXd x_hat(n_res + 1);
  x_hat(n_res) = 1.0;

  for (int t = 0; t < config_.t_max; ++t) {
    if (trajectory_) trajectory_->record_snapshot(env_.agents());
    select_and_commit(obs_cols, actions);
    const grid::Environment::StepResult result = env_.step(actions);
    for (int i = 0; i < n; ++i) {
      x_hat.head(n_res) = states_.col(i);
      traces_[i].record(x_hat, result.rewards[i]);
    }
  }

  // terminal reservoir update: one more selection to produce x_hat(t_max),
  // no environment step, zero reward
  select_and_commit(obs_cols, actions);
  for (int i = 0; i < n; ++i) {
    x_hat.head(n_res) = states_.col(i);
    traces_[i].record(x_hat, 0.0);
  }

  // episode-end training block, unit by unit: accumulate, solve, forget
  for (int u = 0; u < grouping_.n_units(); ++u) {
    std::vector<const lspi::EpisodeTrace*> unit_traces;
    for (int member : grouping_.members_of_unit(u))
      unit_traces.push_back(&traces_[member]);
    units_[u].add_episode(lspi::build_episode_batch(unit_traces, config_.lspi.gamma));

    double condition = 0.0;
    bundle_.w_out[u] = lspi::solve_output_weights(units_[u], &condition);
    if (condition > lspi::kConditionWarn)
      std::cerr << "[pedflow] warning: trial " << trial_index_ << " unit " << u
                << " condition estimate " << condition << "\n";
    units_[u].forget(config_.lspi.lambda);
  }
  schedule_.decay();

  record.agent_rewards.resize(n);
  for (int i = 0; i < n; ++i) {
    const grid::AgentState& agent = env_.agents()[i];
    record.agent_rewards[i] = agent.cumulative_reward;
    // the reward definition makes episode totals equal signed displacement
    const long long displacement = agent.target == grid::TargetDirection::kRight
                                       ? agent.net_dx
                                       : -agent.net_dx;
    if (agent.cumulative_reward != displacement)
      throw std::logic_error("run_episode: reward/displacement identity violated");
  }
  record.best_reward = *std::max_element(record.agent_rewards.begin(),
                                         record.agent_rewards.end());
  record.worst_reward = *std::min_element(record.agent_rewards.begin(),
                                          record.agent_rewards.end());
  double sum = 0.0;
  for (long long r : record.agent_rewards) sum += static_cast<double>(r);
  record.mean_reward = sum / n;
  record.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  records_.push_back(record);
  ++episodes_done_;
  return record;
}

io::TrajectoryHeader TrialRunner::trajectory_header() const {
  io::TrajectoryHeader header;
  header.width = static_cast<std::uint32_t>(setup_.map.width);
  header.height = static_cast<std::uint32_t>(setup_.map.height);
  header.n_agents = static_cast<std::uint32_t>(env_.n_agents());
  header.t_max = static_cast<std::uint32_t>(config_.t_max);
  header.group_of.resize(env_.n_agents());
  for (int i = 0; i < env_.n_agents(); ++i)
    header.group_of[i] = static_cast<std::uint8_t>(env_.agents()[i].group_id);
  return header;
}

void TrialRunner::open_trajectory(bool resumed) {
  if (dir_.empty() || !config_.log_trajectories) return;
  const std::string path = trajectory_path(dir_);
  if (resumed && episodes_done_ > 0) {
    if (!fs::exists(path))
      throw std::runtime_error("resume: " + path +
                               " is missing but the checkpoint has episodes");
    trajectory_ = std::make_unique<io::TrajectoryWriter>(path, trajectory_header(),
                                                         episodes_done_);
  } else {
    trajectory_ = std::make_unique<io::TrajectoryWriter>(path, trajectory_header());
  }
}

void TrialRunner::write_checkpoint() const {
  if (dir_.empty()) return;
  fs::create_directories(dir_);
  io::TensorFile file;
  file.put_scalar("meta/format", 1.0);
  file.put_u64("meta/config_hash", {config_hash(config_)});
  file.put_u64("meta/trial_seed", {trial_seed_});
  file.put_scalar("meta/trial_index", trial_index_);
  file.put_scalar("meta/episodes_done", episodes_done_);
  file.put_scalar("meta/epsilon", schedule_.epsilon);
  file.put_scalar("meta/n_units", grouping_.n_units());
  file.put_scalar("meta/n_agents", env_.n_agents());

  file.put("weights/w_in_o", bundle_.w_in_o);
  file.put("weights/w_in_a", bundle_.w_in_a);
  file.put("weights/w_in_b", bundle_.w_in_b);
  file.put("weights/w_res", bundle_.w_res);
  if (bundle_.has_group_input()) file.put("weights/w_in_g", bundle_.w_in_g);
  file.put_scalar("weights/alpha", bundle_.alpha);

  for (int u = 0; u < grouping_.n_units(); ++u) {
    const std::string prefix = "unit" + std::to_string(u) + "/";
    file.put(prefix + "a_tilde", units_[u].a_tilde());
    file.put(prefix + "b_tilde", units_[u].b_tilde());
    file.put(prefix + "w_out", bundle_.w_out[u]);
    file.put_scalar(prefix + "episodes_seen", units_[u].episodes_seen());
  }

  std::vector<std::uint64_t> rng_states;
  rng_states.reserve(agent_rngs_.size() * 4);
  for (const Rng& rng : agent_rngs_)
    for (std::uint64_t word : rng.state()) rng_states.push_back(word);
  file.put_u64("agents/rng_states", rng_states);

  const int n = env_.n_agents();
  Eigen::MatrixXd rewards(episodes_done_, n);
  Eigen::MatrixXd epsilons(episodes_done_, 1);
  for (int e = 0; e < episodes_done_; ++e) {
    for (int i = 0; i < n; ++i)
      rewards(e, i) = static_cast<double>(records_[e].agent_rewards[i]);
    epsilons(e, 0) = records_[e].epsilon_at_start;
  }
  file.put("records/agent_rewards", rewards);
  file.put("records/epsilon_at_start", epsilons);

  const std::string path = checkpoint_path(dir_);
  const std::string tmp = path + ".tmp";
  file.write(tmp);
  fs::rename(tmp, path);
}

bool TrialRunner::try_resume() {
  if (dir_.empty() || !fs::exists(checkpoint_path(dir_))) return false;
  const io::TensorFile file = io::TensorFile::read(checkpoint_path(dir_));

  if (file.get_u64("meta/config_hash")[0] != config_hash(config_))
    throw std::runtime_error("checkpoint: config hash mismatch in " + dir_);
  if (file.get_u64("meta/trial_seed")[0] != trial_seed_)
    throw std::runtime_error("checkpoint: trial seed mismatch in " + dir_);
  const int n = env_.n_agents();
  if (static_cast<int>(file.get_scalar("meta/n_agents")) != n ||
      static_cast<int>(file.get_scalar("meta/n_units")) != grouping_.n_units())
    throw std::runtime_error("checkpoint: shape mismatch in " + dir_);

  episodes_done_ = static_cast<int>(file.get_scalar("meta/episodes_done"));
  schedule_.epsilon = file.get_scalar("meta/epsilon");

  bundle_.w_in_o = file.get("weights/w_in_o");
  bundle_.w_in_a = file.get("weights/w_in_a");
  bundle_.w_in_b = file.get("weights/w_in_b");
  bundle_.w_res = file.get("weights/w_res");
  if (bundle_.has_group_input()) bundle_.w_in_g = file.get("weights/w_in_g");

  for (int u = 0; u < grouping_.n_units(); ++u) {
    const std::string prefix = "unit" + std::to_string(u) + "/";
    units_[u].restore(file.get(prefix + "a_tilde"), file.get(prefix + "b_tilde"),
                      static_cast<int>(file.get_scalar(prefix + "episodes_seen")));
    bundle_.w_out[u] = file.get(prefix + "w_out");
  }

  const std::vector<std::uint64_t>& rng_states = file.get_u64("agents/rng_states");
  if (rng_states.size() != static_cast<std::size_t>(n) * 4)
    throw std::runtime_error("checkpoint: rng state size mismatch in " + dir_);
  for (int i = 0; i < n; ++i)
    agent_rngs_[i].set_state({rng_states[4 * i], rng_states[4 * i + 1],
                              rng_states[4 * i + 2], rng_states[4 * i + 3]});

  const Eigen::MatrixXd& rewards = file.get("records/agent_rewards");
  const Eigen::MatrixXd& epsilons = file.get("records/epsilon_at_start");
  records_.clear();
  for (int e = 0; e < episodes_done_; ++e) {
    EpisodeRecord record;
    record.episode_index = e;
    record.epsilon_at_start = epsilons(e, 0);
    record.agent_rewards.resize(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      record.agent_rewards[i] = static_cast<long long>(rewards(e, i));
      sum += rewards(e, i);
    }
    record.mean_reward = sum / n;
    record.best_reward = *std::max_element(record.agent_rewards.begin(),
                                           record.agent_rewards.end());
    record.worst_reward = *std::min_element(record.agent_rewards.begin(),
                                            record.agent_rewards.end());
    records_.push_back(std::move(record));
  }
  return true;
}

TrialResult TrialRunner::run() {
  TrialResult result;
  result.trial_index = trial_index_;
  result.trial_seed = trial_seed_;
  try {
    if (!dir_.empty()) fs::create_directories(dir_);
    const bool resumed = try_resume();
    open_trajectory(resumed);

    while (episodes_done_ < config_.n_episodes) {
      if (trajectory_) trajectory_->begin_episode(episodes_done_);
      run_episode();
      if (trajectory_) {
        trajectory_->end_episode();
        trajectory_->flush();
      }
      if (!dir_.empty() && (episodes_done_ % config_.checkpoint_every == 0 ||
                            episodes_done_ == config_.n_episodes))
        write_checkpoint();
    }

    if (!dir_.empty()) {
      write_checkpoint();
      write_records_csv(dir_ + "/records.csv", records_, config_.t_max);
    }
    result.records = records_;
    result.completed = true;
  } catch (const std::exception& e) {
    result.completed = false;
    result.error = e.what();
  }
  return result;
}

void write_records_csv(const std::string& path,
                       const std::vector<EpisodeRecord>& records, int t_max) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("records: cannot open for write: " + path);
  out << "episode,epsilon,mean_reward,best_reward,worst_reward,v_bar\n";
  for (const EpisodeRecord& r : records) {
    out << r.episode_index << ',' << metrics::format_double(r.epsilon_at_start) << ','
        << metrics::format_double(r.mean_reward) << ',' << r.best_reward << ','
        << r.worst_reward << ','
        << metrics::format_double(r.mean_reward / static_cast<double>(t_max)) << '\n';
  }
  if (!out) throw std::runtime_error("records: write failed: " + path);
}

std::vector<EpisodeRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("records: cannot open: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("records: empty file: " + path);

  std::vector<EpisodeRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    EpisodeRecord r;
    std::getline(row, field, ',');
    r.episode_index = std::stoi(field);
    std::getline(row, field, ',');
    r.epsilon_at_start = std::stod(field);
    std::getline(row, field, ',');
    r.mean_reward = std::stod(field);
    std::getline(row, field, ',');
    r.best_reward = std::stoll(field);
    std::getline(row, field, ',');
    r.worst_reward = std::stoll(field);
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buffer[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buffer;
}

void write_manifest(const TrialConfig& config, const std::string& run_dir,
                    const BatchResult& result) {
  json manifest;
  manifest["tool_version"] = kVersion;
  manifest["config_hash"] = config_hash_hex(config);
  manifest["master_seed"] = config.master_seed;
  manifest["created_utc"] = utc_timestamp();
  manifest["n_trials"] = config.n_trials;
  manifest["single_trial"] = result.single_trial;
  json seeds = json::array();
  json status = json::array();
  json dirs = json::array();
  for (const TrialResult& trial : result.trials) {
    seeds.push_back(trial.trial_seed);
    status.push_back(trial.completed ? "completed" : ("failed: " + trial.error));
    dirs.push_back("trial_" + std::to_string(trial.trial_index));
  }
  manifest["trial_seeds"] = seeds;
  manifest["trial_status"] = status;
  manifest["outputs"] = {{"config", "config.json"},
                         {"curve", "curve.csv"},
                         {"trial_dirs", dirs}};
  std::ofstream out(run_dir + "/manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << "\n";
}

}  // namespace

BatchResult run_batch(const TrialConfig& config, const std::string& run_dir) {
  {
    const std::vector<ConfigIssue> issues = validate_config(config);
    for (const ConfigIssue& issue : issues)
      if (issue.severity == ConfigIssue::Severity::kError)
        throw std::invalid_argument(issue.message);
  }

  BatchResult result;
  result.run_dir = run_dir;
  result.single_trial = config.n_trials == 1;
  result.trials.resize(config.n_trials);

  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    std::ofstream out(run_dir + "/config.json", std::ios::binary | std::ios::trunc);
    out << to_canonical_json(config);
  }

  unsigned jobs = config.jobs > 0 ? static_cast<unsigned>(config.jobs)
                                  : std::thread::hardware_concurrency();
  if (jobs == 0) jobs = 1;
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(config.n_trials));

  std::atomic<int> next_trial{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next_trial.fetch_add(1);
      if (i >= config.n_trials) return;
      const std::string trial_dir =
          run_dir.empty() ? "" : run_dir + "/trial_" + std::to_string(i);
      TrialRunner runner(config, i, trial_dir);
      result.trials[i] = runner.run();
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::vector<std::vector<EpisodeRecord>> completed;
  for (const TrialResult& trial : result.trials) {
    if (trial.completed) {
      ++result.completed_trials;
      completed.push_back(trial.records);
    } else {
      std::cerr << "[pedflow] warning: trial " << trial.trial_index
                << " failed: " << trial.error << "\n";
    }
  }

  if (!run_dir.empty()) {
    if (!completed.empty() && config.n_episodes > 0)
      metrics::write_curve_csv(run_dir + "/curve.csv",
                               metrics::learning_curve(completed));
    write_manifest(config, run_dir, result);
  }
  return result;
}

}  // namespace pedflow::run
