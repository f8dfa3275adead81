#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "pedflow/errors.hpp"
#include "pedflow/lspi.hpp"
#include "pedflow/rng.hpp"

using namespace pedflow;
using lspi::Accumulators;
using lspi::EpisodeTrace;

namespace {

Eigen::VectorXd augmented(std::initializer_list<double> reservoir) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(reservoir.size()) + 1);
  Eigen::Index i = 0;
  for (double x : reservoir) v(i++) = x;
  v(i) = 1.0;
  return v;
}

EpisodeTrace random_trace(int length, int dim, Rng& rng) {
  EpisodeTrace trace;
  for (int t = 0; t < length; ++t) {
    Eigen::VectorXd f(dim);
    for (int i = 0; i < dim; ++i) f(i) = rng.gaussian();
    trace.features.push_back(f);
    trace.rewards.push_back(t + 1 < length ? rng.gaussian() : 0.0);
  }
  return trace;
}

// direct evaluation of the discounted double sum, including the decayed
// regularization term: A = sum_n lambda^{n_l - n} S_n + lambda^{n_l - 1} beta I
void direct_sums(const std::vector<std::vector<EpisodeTrace>>& episodes, double gamma,
                 double lambda, double beta, Eigen::MatrixXd& a_direct,
                 Eigen::RowVectorXd& b_direct) {
  const int n_l = static_cast<int>(episodes.size());
  const Eigen::Index dim = episodes[0][0].features[0].size();
  a_direct = std::pow(lambda, n_l - 1) * beta *
             Eigen::MatrixXd::Identity(dim, dim);
  b_direct = Eigen::RowVectorXd::Zero(dim);
  for (int n = 1; n <= n_l; ++n) {
    const double weight = std::pow(lambda, n_l - n);
    for (const EpisodeTrace& trace : episodes[n - 1]) {
      const int t_max = trace.length() - 1;
      for (int t = 0; t <= t_max; ++t) {
        const Eigen::VectorXd& x = trace.features[t];
        Eigen::VectorXd bootstrap = Eigen::VectorXd::Zero(dim);
        if (t < t_max) bootstrap = gamma * trace.features[t + 1];
        a_direct += weight * (x - bootstrap) * x.transpose();
        b_direct += weight * trace.rewards[t] * x.transpose();
      }
    }
  }
}

}  // namespace

TEST_SUITE("lspi") {
  TEST_CASE("epsilon-greedy is greedy at epsilon 0 with lowest-index ties") {
    Rng rng(1);
    Eigen::VectorXd q(4);
    q << 0.1, 0.7, 0.7, -1.0;
    for (int i = 0; i < 100; ++i) CHECK(lspi::epsilon_greedy(q, 0.0, rng) == 1);
  }

  TEST_CASE("epsilon-greedy at epsilon 1 is uniform (chi-square at 99%)") {
    Rng rng(2);
    Eigen::VectorXd q(4);
    q << 0.0, 5.0, -2.0, 1.0;
    const int n = 100000;
    int counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < n; ++i) ++counts[lspi::epsilon_greedy(q, 1.0, rng)];
    double chi_square = 0.0;
    const double expected = n / 4.0;
    for (int c : counts) chi_square += (c - expected) * (c - expected) / expected;
    CHECK(chi_square < 11.345);  // chi-square(3 dof) 99th percentile
    for (int c : counts) CHECK(std::abs(c / static_cast<double>(n) - 0.25) < 0.01);
  }

  TEST_CASE("epsilon-greedy mixture probability at epsilon 0.02") {
    Rng rng(3);
    Eigen::VectorXd q(4);
    q << 0.0, 0.0, 9.0, 0.0;
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i)
      if (lspi::epsilon_greedy(q, 0.02, rng) == 2) ++hits;
    // P(max) = 1 - eps + eps/4 = 0.985
    CHECK(std::abs(hits / static_cast<double>(n) - 0.985) < 0.005);
  }

  TEST_CASE("epsilon-greedy rejects bad input") {
    Rng rng(4);
    CHECK_THROWS_AS(lspi::epsilon_greedy(Eigen::VectorXd(), 0.5, rng),
                    std::invalid_argument);
    Eigen::VectorXd q(2);
    q << 0.0, 1.0;
    CHECK_THROWS_AS(lspi::epsilon_greedy(q, 1.5, rng), std::invalid_argument);
  }

  TEST_CASE("record enforces the augmented-feature contract") {
    EpisodeTrace trace;
    trace.record(augmented({0.5, -0.25}), 1.0);
    CHECK(trace.length() == 1);
    Eigen::VectorXd bad(3);
    bad << 0.5, -0.25, 0.99;
    CHECK_THROWS_AS(trace.record(bad, 0.0), std::logic_error);

    // t_max steps plus the terminal record
    EpisodeTrace full;
    const int t_max = 7;
    for (int t = 0; t < t_max; ++t) full.record(augmented({double(t)}), 1.0);
    full.record(augmented({double(t_max)}), 0.0);
    CHECK(full.length() == t_max + 1);
    CHECK(full.rewards.back() == 0.0);
  }

  TEST_CASE("two-step episode expands to the hand-computed update") {
    // one agent, t_max = 1: x_hat(0) = (e1; 1), x_hat(1) = (e2; 1), r_0 = 1
    const double gamma = 0.95;
    const double beta = 1e-4;
    EpisodeTrace trace;
    trace.record(augmented({1.0, 0.0}), 1.0);
    trace.record(augmented({0.0, 1.0}), 0.0);

    Accumulators acc(3, beta);
    acc.add_episode(lspi::build_episode_batch({&trace}, gamma));

    const Eigen::VectorXd x0 = augmented({1.0, 0.0});
    const Eigen::VectorXd x1 = augmented({0.0, 1.0});
    const Eigen::MatrixXd expected_a = beta * Eigen::MatrixXd::Identity(3, 3) +
                                       (x0 - gamma * x1) * x0.transpose() +
                                       x1 * x1.transpose();
    const Eigen::RowVectorXd expected_b = x0.transpose();
    CHECK((acc.a_tilde() - expected_a).lpNorm<Eigen::Infinity>() < 1e-15);
    CHECK((acc.b_tilde() - expected_b).lpNorm<Eigen::Infinity>() < 1e-15);
    CHECK(acc.episodes_seen() == 1);
  }

  TEST_CASE("terminal rows add pure outer products and nothing to B") {
    Rng rng(9);
    EpisodeTrace trace = random_trace(6, 4, rng);
    const lspi::EpisodeBatch batch = lspi::build_episode_batch({&trace}, 0.9);
    // last row: y1 == y2 == x_hat(t_max), reward 0
    CHECK(batch.y1.row(5) == batch.y2.row(5));
    CHECK(batch.r(5) == 0.0);
    CHECK(batch.y2.row(5) == trace.features[5].transpose());
  }

  TEST_CASE("zero rewards leave B untouched") {
    Rng rng(10);
    EpisodeTrace trace = random_trace(5, 3, rng);
    for (double& r : trace.rewards) r = 0.0;
    Accumulators acc(3, 1e-4);
    acc.add_episode(lspi::build_episode_batch({&trace}, 0.9));
    CHECK(acc.b_tilde().isZero(0.0));
  }

  TEST_CASE("incremental accumulation equals the direct double sum") {
    const double gamma = 0.95, lambda = 0.95, beta = 1e-4;
    Rng rng(11);
    std::vector<std::vector<EpisodeTrace>> episodes;
    for (int e = 0; e < 3; ++e) {
      std::vector<EpisodeTrace> agents;
      for (int j = 0; j < 2; ++j) agents.push_back(random_trace(5, 9, rng));
      episodes.push_back(std::move(agents));
    }

    // the procedure: add, (solve), forget after each episode
    Accumulators acc(9, beta);
    for (int e = 0; e < 3; ++e) {
      if (e > 0) acc.forget(lambda);  // forgetting applied after episodes 1..e-1
      acc.add_episode(lspi::build_episode_batch(
          {&episodes[e][0], &episodes[e][1]}, gamma));
    }

    Eigen::MatrixXd a_direct;
    Eigen::RowVectorXd b_direct;
    direct_sums(episodes, gamma, lambda, beta, a_direct, b_direct);

    const double rel_a = (acc.a_tilde() - a_direct).norm() / a_direct.norm();
    const double rel_b = (acc.b_tilde() - b_direct).norm() / b_direct.norm();
    CHECK(rel_a < 1e-10);
    CHECK(rel_b < 1e-10);
  }

  TEST_CASE("batch construction validates its inputs") {
    Rng rng(12);
    EpisodeTrace a = random_trace(5, 3, rng);
    EpisodeTrace b = random_trace(6, 3, rng);
    CHECK_THROWS_AS(lspi::build_episode_batch({&a, &b}, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(lspi::build_episode_batch({}, 0.9), std::invalid_argument);
    EpisodeTrace bad = random_trace(5, 3, rng);
    bad.rewards.back() = 1.0;
    CHECK_THROWS_AS(lspi::build_episode_batch({&bad}, 0.9), std::invalid_argument);
  }

  TEST_CASE("identity and diagonal solves") {
    Accumulators acc(3, 1.0);  // A = I
    Eigen::MatrixXd y1 = Eigen::MatrixXd::Zero(1, 3);
    // craft B directly through one fake episode: y1 = 0 rows keep A = I
    lspi::EpisodeBatch batch;
    batch.y1 = Eigen::MatrixXd::Zero(1, 3);
    batch.y2 = Eigen::MatrixXd::Zero(1, 3);
    batch.r = Eigen::VectorXd::Zero(1);
    acc.add_episode(batch);
    CHECK(lspi::solve_output_weights(acc).isZero(0.0));

    // B = b with A = I returns b itself
    lspi::EpisodeBatch inject;
    inject.y1 = Eigen::MatrixXd::Zero(1, 3);
    inject.y2.resize(1, 3);
    inject.y2 << 1.0, 2.0, -3.0;
    inject.r.resize(1);
    inject.r << 1.0;
    acc.add_episode(inject);
    const Eigen::RowVectorXd w = lspi::solve_output_weights(acc);
    CHECK((w - inject.y2.row(0)).lpNorm<Eigen::Infinity>() < 1e-12);

    // diagonal: A = 2 I, B = (4, 6) -> w = (2, 3)
    Accumulators diagonal(2, 2.0);
    lspi::EpisodeBatch db;
    db.y1 = Eigen::MatrixXd::Zero(1, 2);
    db.y2.resize(1, 2);
    db.y2 << 4.0, 6.0;
    db.r.resize(1);
    db.r << 1.0;
    diagonal.add_episode(db);
    const Eigen::RowVectorXd wd = lspi::solve_output_weights(diagonal);
    CHECK(wd(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(wd(1) == doctest::Approx(3.0).epsilon(1e-12));
  }

  TEST_CASE("solve reports conditioning and refuses singular systems") {
    Accumulators acc(4, 1e-16);
    double condition = 0.0;
    // beta*I alone: perfectly conditioned, solution zero
    CHECK(lspi::solve_output_weights(acc, &condition).isZero(0.0));
    CHECK(condition == doctest::Approx(1.0));

    // rank-1 data over a vanishing-beta floor drives the condition estimate up
    lspi::EpisodeBatch batch;
    batch.y1.resize(1, 4);
    batch.y1 << 1.0, 1.0, 1.0, 1.0;
    batch.y2 = batch.y1;
    batch.r.resize(1);
    batch.r << 1.0;
    acc.add_episode(batch);
    CHECK_THROWS_AS(lspi::solve_output_weights(acc), SingularityError);
    try {
      lspi::solve_output_weights(acc);
    } catch (const SingularityError& e) {
      CHECK(e.condition_estimate() > lspi::kConditionLimit);
    }
  }

  TEST_CASE("tabular chain: LSPI solve matches policy evaluation") {
    // 5-state chain, actions {left, right}, fixed always-right policy.
    // Features: one-hot over (state, action) pairs, dim 10.
    const int n_states = 5;
    const double gamma = 0.9;
    auto feature = [&](int s, int a) {
      Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * n_states);
      f(2 * s + a) = 1.0;
      return f;
    };
    auto step_right = [&](int s) { return std::min(s + 1, n_states - 1); };
    auto reward = [&](int s, int next) { return (next == 4 && s != 4) ? 1.0 : 0.0; };

    Accumulators acc(2 * n_states, 1e-10);
    const int t_max = 10;
    for (int start = 0; start < n_states; ++start) {
      EpisodeTrace trace;
      int s = start;
      for (int t = 0; t < t_max; ++t) {
        const int next = step_right(s);
        trace.features.push_back(feature(s, 1));
        trace.rewards.push_back(reward(s, next));
        s = next;
      }
      trace.features.push_back(feature(s, 1));  // terminal selection
      trace.rewards.push_back(0.0);
      acc.add_episode(lspi::build_episode_batch({&trace}, gamma));
      // lambda = 1: no forgetting
    }
    const Eigen::RowVectorXd w = lspi::solve_output_weights(acc);

    // independent oracle: iterate the fixed-policy Bellman equation
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n_states);
    for (int iter = 0; iter < 2000; ++iter) {
      Eigen::VectorXd next(n_states);
      for (int s = 0; s < n_states; ++s) {
        const int nxt = step_right(s);
        next(s) = reward(s, nxt) + gamma * v(nxt);
      }
      if ((next - v).lpNorm<Eigen::Infinity>() < 1e-14) {
        v = next;
        break;
      }
      v = next;
    }
    for (int s = 0; s < n_states; ++s) {
      const double q = w.dot(feature(s, 1));
      CHECK(std::abs(q - v(s)) < 1e-6);
    }
  }

  TEST_CASE("forgetting order and scaling") {
    Accumulators acc(2, 0.5);
    acc.forget(1.0);
    CHECK((acc.a_tilde() - 0.5 * Eigen::MatrixXd::Identity(2, 2)).isZero(0.0));
    acc.forget(0.95);
    acc.forget(0.95);
    CHECK(acc.a_tilde()(0, 0) == doctest::Approx(0.5 * 0.9025).epsilon(1e-12));

    // the solve sees the un-forgotten matrices: feed data, solve, then forget
    Accumulators fresh(2, 1e-8);
    lspi::EpisodeBatch batch;
    batch.y1.resize(2, 2);
    batch.y1 << 1.0, 0.0, 0.0, 1.0;
    batch.y2 = batch.y1;
    batch.r.resize(2);
    batch.r << 2.0, 3.0;
    fresh.add_episode(batch);
    const Eigen::RowVectorXd before = lspi::solve_output_weights(fresh);
    fresh.forget(0.5);
    const Eigen::RowVectorXd after = lspi::solve_output_weights(fresh);
    // scaling both matrices leaves the solution unchanged; the order matters
    // only for what accumulates next
    CHECK((before - after).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(fresh.a_tilde()(0, 0) == doctest::Approx(0.5 * (1e-8 + 1.0)));
  }

  TEST_CASE("epsilon schedule decays geometrically and freezes") {
    lspi::EpsilonSchedule schedule{1.0, 1.0, 0.95, 0.02};
    schedule.decay();
    CHECK(schedule.epsilon == doctest::Approx(0.95).epsilon(1e-15));

    lspi::EpsilonSchedule at_floor{0.02, 1.0, 0.95, 0.02};
    at_floor.decay();
    CHECK(at_floor.epsilon == 0.02);  // strict inequality: no decay at the floor

    lspi::EpsilonSchedule full{1.0, 1.0, 0.95, 0.02};
    int decays = 0;
    double previous = full.epsilon;
    for (int episode = 0; episode < 250; ++episode) {
      full.decay();
      if (full.epsilon != previous) ++decays;
      CHECK(full.epsilon <= previous);  // non-increasing
      previous = full.epsilon;
    }
    CHECK(decays == 77);
    CHECK(full.epsilon == doctest::Approx(0.0193).epsilon(1e-3));
    CHECK(full.epsilon <= 0.02);
    CHECK(full.epsilon >= 0.95 * 0.02);  // bounded below by delta * epsilon_min
  }

  TEST_CASE("grouping partitions agents in every mode") {
    const std::vector<int> groups = {0, 0, 1, 1, 0};
    for (lspi::GroupMode mode :
         {lspi::GroupMode::kSharedWithinGroup, lspi::GroupMode::kIndependent,
          lspi::GroupMode::kSharedAcrossGroups}) {
      const lspi::Grouping grouping(mode, groups);
      std::vector<int> seen(grouping.n_agents(), 0);
      for (int u = 0; u < grouping.n_units(); ++u)
        for (int member : grouping.members_of_unit(u)) ++seen[member];
      for (int count : seen) CHECK(count == 1);  // exactly one unit per agent
    }
    CHECK(lspi::Grouping(lspi::GroupMode::kSharedWithinGroup, groups).n_units() == 2);
    CHECK(lspi::Grouping(lspi::GroupMode::kIndependent, groups).n_units() == 5);
    CHECK(lspi::Grouping(lspi::GroupMode::kSharedAcrossGroups, groups).n_units() == 1);

    const lspi::Grouping cross(lspi::GroupMode::kSharedAcrossGroups, groups);
    CHECK(cross.group_tag(0) == Eigen::Vector2d(1.0, 0.0));
    CHECK(cross.group_tag(2) == Eigen::Vector2d(0.0, 1.0));
  }

  TEST_CASE("group mode names round-trip") {
    for (lspi::GroupMode mode :
         {lspi::GroupMode::kSharedWithinGroup, lspi::GroupMode::kIndependent,
          lspi::GroupMode::kSharedAcrossGroups})
      CHECK(lspi::group_mode_from_string(lspi::to_string(mode)) == mode);
    CHECK_THROWS_AS(lspi::group_mode_from_string("nope"), std::invalid_argument);
  }
}
