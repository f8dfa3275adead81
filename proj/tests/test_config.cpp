#include <doctest.h>

#include <string>

#include "pedflow/config.hpp"

using namespace pedflow;
using run::TrialConfig;

namespace {

bool has_error(const std::vector<run::ConfigIssue>& issues, const std::string& needle) {
  for (const run::ConfigIssue& issue : issues)
    if (issue.severity == run::ConfigIssue::Severity::kError &&
        issue.message.find(needle) != std::string::npos)
      return true;
  return false;
}

bool has_warning(const std::vector<run::ConfigIssue>& issues, const std::string& needle) {
  for (const run::ConfigIssue& issue : issues)
    if (issue.severity == run::ConfigIssue::Severity::kWarning &&
        issue.message.find(needle) != std::string::npos)
      return true;
  return false;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults survive an empty object and carry the full-scale values") {
    const TrialConfig c = run::parse_trial_config("{}");
    CHECK(c.task == "task1");
    CHECK(c.n_res == 1024);
    CHECK(c.alpha == 0.8);
    CHECK(c.profile.p_s1_in == 0.6);
    CHECK(c.profile.p_s2_in == 0.8);
    CHECK(c.profile.p_s3_in == 0.9);
    CHECK(c.profile.p_sb_in == 0.9);
    CHECK(c.profile.p_s_res == 0.9);
    CHECK(c.profile.sigma_in_a == 2.0);
    CHECK(c.profile.rho_target == 0.95);
    CHECK(c.t_max == 500);
    CHECK(c.lspi.gamma == 0.95);
    CHECK(c.lspi.lambda == 0.95);
    CHECK(c.lspi.beta == 1e-4);
    CHECK(c.lspi.epsilon0 == 1.0);
    CHECK(c.lspi.delta_epsilon == 0.95);
    CHECK(c.lspi.epsilon_min == 0.02);
    CHECK(c.n_episodes == 250);
    CHECK(c.n_trials == 8);
    CHECK(run::validate_config(c).empty());
  }

  TEST_CASE("unknown keys are named") {
    CHECK_THROWS_WITH_AS(run::parse_trial_config(R"({"gamma": 0.9})"),
                         doctest::Contains("gamma"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(run::parse_trial_config(R"({"esn": {"nres": 10}})"),
                         doctest::Contains("esn.nres"), std::invalid_argument);
  }

  TEST_CASE("overrides reach nested keys and appear in the canonical dump") {
    const TrialConfig c =
        run::parse_trial_config("{}", {"n_agent=40", "esn.n_res=256", "task=task2"});
    CHECK(c.n_agent == 40);
    CHECK(c.n_res == 256);
    CHECK(c.task == "task2");
    CHECK(run::to_canonical_json(c).find("\"n_agent\": 40") != std::string::npos);
  }

  TEST_CASE("range errors name the offending key") {
    const TrialConfig c = run::parse_trial_config("{}", {"lspi.gamma=1.5"});
    CHECK(has_error(run::validate_config(c), "lspi.gamma"));

    const TrialConfig bad_rho = run::parse_trial_config("{}", {"esn.rho=1.0"});
    CHECK(has_error(run::validate_config(bad_rho), "esn.rho_target"));

    const TrialConfig bad_order =
        run::parse_trial_config("{}", {"esn.p_s1_in=0.95"});
    CHECK(has_error(run::validate_config(bad_order), "esn.p_s"));
  }

  TEST_CASE("capacity failures are reported, not thrown") {
    const TrialConfig c =
        run::parse_trial_config("{}", {"task=task2", "n_agent=200"});
    CHECK(has_error(run::validate_config(c), "placement"));
  }

  TEST_CASE("independent mode at scale warns about accumulator memory") {
    const TrialConfig c = run::parse_trial_config(
        "{}", {"task=task2", "n_agent=64", "group_mode=independent"});
    // 64 * 1025^2 * 8 bytes is just over the 512 MiB default budget
    CHECK(has_warning(run::validate_config(c), "memory"));

    const TrialConfig small = run::parse_trial_config(
        "{}", {"task=task2", "n_agent=64", "group_mode=independent",
               "esn.n_res=256"});
    CHECK(!has_warning(run::validate_config(small), "memory"));
  }

  TEST_CASE("hash ignores execution details but tracks substance") {
    const TrialConfig base = run::parse_trial_config("{}");
    const TrialConfig reseeded = run::parse_trial_config("{}", {"master_seed=99"});
    const TrialConfig rejobbed =
        run::parse_trial_config("{}", {"jobs=7", "checkpoint_every=3"});
    const TrialConfig retasked = run::parse_trial_config("{}", {"n_agent=13"});
    CHECK(run::config_hash(base) == run::config_hash(reseeded));
    CHECK(run::config_hash(base) == run::config_hash(rejobbed));
    CHECK(run::config_hash(base) != run::config_hash(retasked));
    CHECK(run::config_hash_hex(base).size() == 16);
  }

  TEST_CASE("canonical json round-trips through the parser") {
    const TrialConfig c = run::parse_trial_config(
        "{}", {"task=task2", "n_agent=32", "esn.n_res=128", "master_seed=5"});
    const TrialConfig back = run::parse_trial_config(run::to_canonical_json(c));
    CHECK(run::config_hash(c) == run::config_hash(back));
    CHECK(back.n_agent == 32);
    CHECK(back.master_seed == 5);
  }

  TEST_CASE("custom maps demand an explicit placement") {
    const std::string map = std::string(PEDFLOW_SOURCE_DIR) + "/maps/task1_fork.map";
    const TrialConfig c = run::parse_trial_config("{}", {"map=" + map});
    CHECK_THROWS_AS(run::resolve_task(c), std::invalid_argument);

    const TrialConfig missing = run::parse_trial_config("{}", {"map=/nonexistent.map"});
    CHECK_THROWS_AS(run::resolve_task(missing), std::runtime_error);
  }

  TEST_CASE("placement override is honored and checked") {
    const std::string json = R"({
      "task": "task2", "n_agent": 4,
      "placement": [
        {"count": 2, "group_id": 0, "target": "right", "x0": 0, "y0": 0, "x1": 5, "y1": 7},
        {"count": 2, "group_id": 1, "target": "left", "x0": 14, "y0": 0, "x1": 19, "y1": 7,
         "fill_from_right": true}
      ]})";
    const TrialConfig c = run::parse_trial_config(json);
    const run::TaskSetup setup = run::resolve_task(c);
    CHECK(setup.n_groups == 2);
    CHECK(setup.plan.groups[1].region.fill_from_right);

    const TrialConfig wrong_sum = run::parse_trial_config(json, {"n_agent=5"});
    CHECK_THROWS_AS(run::resolve_task(wrong_sum), std::invalid_argument);
  }
}
