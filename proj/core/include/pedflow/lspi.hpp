#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "pedflow/rng.hpp"

namespace pedflow::lspi {

inline constexpr double kConditionWarn = 1e12;
inline constexpr double kConditionLimit = 1e14;
inline constexpr double kResidualTolerance = 1e-8;

/// Epsilon-greedy action selection: argmax with probability 1 - epsilon
/// (ties broken by lowest index), uniform random with probability epsilon.
/// Consumes one uniform draw, plus one more when exploring.
int epsilon_greedy(const Eigen::Ref<const Eigen::VectorXd>& q_values, double epsilon,
                   Rng& rng);

/// Geometric epsilon decay, frozen once the threshold is reached.
struct EpsilonSchedule {
  double epsilon = 1.0;
  double epsilon0 = 1.0;
  double delta_epsilon = 0.95;
  double epsilon_min = 0.02;

  /// epsilon <- delta * epsilon, only while epsilon > epsilon_min
  /// (strict inequality).
  void decay() {
    if (epsilon > epsilon_min) epsilon *= delta_epsilon;
  }
};

/// One agent's experience over one episode: feature rows x_hat(t) for
/// t = 0..t_max and the matching rewards (terminal reward is 0 by
/// convention).
struct EpisodeTrace {
  std::vector<Eigen::VectorXd> features;
  std::vector<double> rewards;

  /// Append one (x_hat, reward) pair. x_hat must end in exactly 1
  /// (reservoir activation augmented with the readout bias slot).
  void record(const Eigen::VectorXd& x_hat, double reward);

  int length() const { return static_cast<int>(features.size()); }
  void clear();
};

/// Episode-end staging matrices. Rows are ordered time-major, agent-minor;
/// the final block of rows (one per agent) holds the terminal features with
/// no bootstrap term and zero reward.
struct EpisodeBatch {
  Eigen::MatrixXd y1;  // rows (x_hat(t) - gamma x_hat(t+1))^T, then x_hat(t_max)^T
  Eigen::MatrixXd y2;  // rows x_hat(t)^T
  Eigen::VectorXd r;   // rewards, trailing zeros

  Eigen::Index rows() const { return y2.rows(); }
};

/// Assemble the episode batch for one learning unit from its members'
/// traces. All traces must have equal length (>= 2) and equal feature
/// dimension, and end with a zero terminal reward.
EpisodeBatch build_episode_batch(const std::vector<const EpisodeTrace*>& traces,
                                 double gamma);

/// Per-unit accumulators driving the closed-form readout solve.
/// A starts at beta * I and both matrices are scaled by the forgetting
/// factor after every solve.
class Accumulators {
 public:
  Accumulators(int dim, double beta, int group_id = 0);

  /// A += Y1^T Y2, B += R^T Y2; counts one more episode.
  void add_episode(const EpisodeBatch& batch);

  /// Scale both matrices by lambda in (0,1].
  void forget(double lambda);

  const Eigen::MatrixXd& a_tilde() const { return a_; }
  const Eigen::RowVectorXd& b_tilde() const { return b_; }
  int episodes_seen() const { return episodes_; }
  int group_id() const { return group_id_; }
  int dim() const { return static_cast<int>(a_.rows()); }
  double beta() const { return beta_; }

  /// Checkpoint restore; shapes must match the constructed dimension.
  void restore(Eigen::MatrixXd a, Eigen::RowVectorXd b, int episodes_seen);

 private:
  Eigen::MatrixXd a_;
  Eigen::RowVectorXd b_;
  int episodes_ = 0;
  int group_id_ = 0;
  double beta_ = 0.0;
};

/// Readout row W = B A^{-1}, computed as the solution of A^T W^T = B^T by
/// dense LU with partial pivoting (A is not symmetric in general). One step
/// of iterative refinement is applied if the residual bound
/// ||W A - B||_inf <= 1e-8 ||B||_inf is not met on the first solve.
///
/// Throws SingularityError (carrying the 1-norm condition estimate) when the
/// factorization degenerates, the condition estimate exceeds 1e14, or the
/// residual bound cannot be met. The condition estimate is always reported
/// through condition_estimate when given.
Eigen::RowVectorXd solve_output_weights(const Accumulators& acc,
                                        double* condition_estimate = nullptr);

/// How experience is pooled across agents.
enum class GroupMode {
  kSharedWithinGroup,   // one learning unit per reward group
  kIndependent,         // one learning unit per agent
  kSharedAcrossGroups,  // a single unit; group identity enters via a one-hot input
};

std::string to_string(GroupMode mode);
GroupMode group_mode_from_string(const std::string& name);

/// Maps agents to reward groups and learning units under a group mode.
class Grouping {
 public:
  Grouping(GroupMode mode, std::vector<int> group_of);

  GroupMode mode() const { return mode_; }
  int n_agents() const { return static_cast<int>(group_of_.size()); }
  int n_groups() const { return n_groups_; }
  int n_units() const;
  int group_of(int agent) const { return group_of_.at(agent); }
  int unit_of(int agent) const;

  /// Agents of one learning unit, in agent order.
  std::vector<int> members_of_unit(int unit) const;

  bool uses_group_tag() const { return mode_ == GroupMode::kSharedAcrossGroups; }

  /// One-hot group identity fed to the network in cross-group mode.
  Eigen::Vector2d group_tag(int agent) const;

 private:
  GroupMode mode_;
  std::vector<int> group_of_;
  int n_groups_ = 0;
};

}  // namespace pedflow::lspi
