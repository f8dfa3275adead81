#include "pedflow/lspi.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pedflow/errors.hpp"

namespace pedflow::lspi {

int epsilon_greedy(const Eigen::Ref<const Eigen::VectorXd>& q_values, double epsilon,
                   Rng& rng) {
  if (q_values.size() == 0)
    throw std::invalid_argument("epsilon_greedy: empty q_values");
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("epsilon_greedy: epsilon must be in [0,1]");

  if (rng.uniform01() < epsilon)
    return static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(q_values.size())));

  int best = 0;
  for (int i = 1; i < q_values.size(); ++i)
    if (q_values(i) > q_values(best)) best = i;  // strict: ties keep the lowest index
  return best;
}

void EpisodeTrace::record(const Eigen::VectorXd& x_hat, double reward) {
  if (x_hat.size() == 0 || x_hat(x_hat.size() - 1) != 1.0)
    throw std::logic_error("EpisodeTrace::record: feature vector must end in exactly 1");
  features.push_back(x_hat);
  rewards.push_back(reward);
}

void EpisodeTrace::clear() {
  features.clear();
  rewards.clear();
}

EpisodeBatch build_episode_batch(const std::vector<const EpisodeTrace*>& traces,
                                 double gamma) {
  if (traces.empty()) throw std::invalid_argument("build_episode_batch: no traces");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("build_episode_batch: gamma must be in (0,1)");

  const int n_traces = static_cast<int>(traces.size());
  const int length = traces[0]->length();
  if (length < 2)
    throw std::invalid_argument("build_episode_batch: traces need at least 2 records");
  const Eigen::Index dim = traces[0]->features[0].size();

  for (const EpisodeTrace* trace : traces) {
    if (trace->length() != length)
      throw std::invalid_argument("build_episode_batch: trace length mismatch");
    if (static_cast<int>(trace->rewards.size()) != length)
      throw std::invalid_argument("build_episode_batch: rewards/features length mismatch");
    for (const auto& f : trace->features)
      if (f.size() != dim)
        throw std::invalid_argument("build_episode_batch: feature dimension mismatch");
    if (trace->rewards.back() != 0.0)
      throw std::invalid_argument("build_episode_batch: terminal reward must be 0");
  }

  EpisodeBatch batch;
  const int rows = n_traces * length;
  batch.y1.resize(rows, dim);
  batch.y2.resize(rows, dim);
  batch.r.resize(rows);

  // time-major, agent-minor row order
  for (int t = 0; t < length; ++t) {
    for (int j = 0; j < n_traces; ++j) {
      const int row = t * n_traces + j;
      const EpisodeTrace& trace = *traces[j];
      batch.y2.row(row) = trace.features[t];
      if (t + 1 < length) {
        batch.y1.row(row) = trace.features[t] - gamma * trace.features[t + 1];
      } else {
        batch.y1.row(row) = trace.features[t];  // terminal: no bootstrap term
      }
      batch.r(row) = trace.rewards[t];
    }
  }
  return batch;
}

Accumulators::Accumulators(int dim, double beta, int group_id)
    : group_id_(group_id), beta_(beta) {
  if (dim <= 0) throw std::invalid_argument("Accumulators: dim must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("Accumulators: beta must be > 0");
  a_ = beta * Eigen::MatrixXd::Identity(dim, dim);
  b_ = Eigen::RowVectorXd::Zero(dim);
}

void Accumulators::add_episode(const EpisodeBatch& batch) {
  if (batch.y1.cols() != a_.cols() || batch.y2.cols() != a_.cols())
    throw std::invalid_argument("Accumulators::add_episode: dimension mismatch");
  if (batch.y1.rows() != batch.y2.rows() || batch.r.size() != batch.y2.rows())
    throw std::invalid_argument("Accumulators::add_episode: batch row mismatch");
  a_.noalias() += batch.y1.transpose() * batch.y2;
  b_.noalias() += batch.r.transpose() * batch.y2;
  ++episodes_;
}

void Accumulators::forget(double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw std::invalid_argument("Accumulators::forget: lambda must be in (0,1]");
  a_ *= lambda;
  b_ *= lambda;
}

void Accumulators::restore(Eigen::MatrixXd a, Eigen::RowVectorXd b, int episodes_seen) {
  if (a.rows() != a_.rows() || a.cols() != a_.cols() || b.size() != b_.size())
    throw std::invalid_argument("Accumulators::restore: shape mismatch");
  if (episodes_seen < 0)
    throw std::invalid_argument("Accumulators::restore: negative episode count");
  a_ = std::move(a);
  b_ = std::move(b);
  episodes_ = episodes_seen;
}

Eigen::RowVectorXd solve_output_weights(const Accumulators& acc,
                                        double* condition_estimate) {
  const Eigen::MatrixXd& a = acc.a_tilde();
  const Eigen::RowVectorXd& b = acc.b_tilde();

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a.transpose());
  const double rcond = lu.rcond();
  const double condition =
      rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (condition_estimate != nullptr) *condition_estimate = condition;

  if (!(condition < kConditionLimit))
    throw SingularityError("solve_output_weights: condition estimate " +
                               std::to_string(condition) + " exceeds limit",
                           condition);

  Eigen::RowVectorXd w = lu.solve(b.transpose()).transpose();

  const double bound = kResidualTolerance * b.cwiseAbs().maxCoeff();
  double residual = (w * a - b).cwiseAbs().maxCoeff();
  if (residual > bound) {
    // one step of iterative refinement
    const Eigen::RowVectorXd correction =
        lu.solve((b - w * a).transpose()).transpose();
    w += correction;
    residual = (w * a - b).cwiseAbs().maxCoeff();
    if (residual > bound)
      throw SingularityError("solve_output_weights: residual " +
                                 std::to_string(residual) + " above bound " +
                                 std::to_string(bound),
                             condition);
  }
  return w;
}

std::string to_string(GroupMode mode) {
  switch (mode) {
    case GroupMode::kSharedWithinGroup: return "shared_within_group";
    case GroupMode::kIndependent: return "independent";
    case GroupMode::kSharedAcrossGroups: return "shared_across_groups";
  }
  return "unknown";
}

GroupMode group_mode_from_string(const std::string& name) {
  if (name == "shared_within_group") return GroupMode::kSharedWithinGroup;
  if (name == "independent") return GroupMode::kIndependent;
  if (name == "shared_across_groups") return GroupMode::kSharedAcrossGroups;
  throw std::invalid_argument("group_mode: unknown mode '" + name + "'");
}

Grouping::Grouping(GroupMode mode, std::vector<int> group_of)
    : mode_(mode), group_of_(std::move(group_of)) {
  if (group_of_.empty()) throw std::invalid_argument("Grouping: no agents");
  for (int g : group_of_) {
    if (g < 0) throw std::invalid_argument("Grouping: negative group id");
    n_groups_ = std::max(n_groups_, g + 1);
  }
  if (mode_ == GroupMode::kSharedAcrossGroups && n_groups_ > 2)
    throw std::invalid_argument(
        "Grouping: shared_across_groups supports at most two groups");
}

int Grouping::n_units() const {
  switch (mode_) {
    case GroupMode::kSharedWithinGroup: return n_groups_;
    case GroupMode::kIndependent: return n_agents();
    case GroupMode::kSharedAcrossGroups: return 1;
  }
  return 0;
}

int Grouping::unit_of(int agent) const {
  switch (mode_) {
    case GroupMode::kSharedWithinGroup: return group_of_.at(agent);
    case GroupMode::kIndependent: return agent;
    case GroupMode::kSharedAcrossGroups: return 0;
  }
  return 0;
}

std::vector<int> Grouping::members_of_unit(int unit) const {
  std::vector<int> members;
  for (int agent = 0; agent < n_agents(); ++agent)
    if (unit_of(agent) == unit) members.push_back(agent);
  return members;
}

Eigen::Vector2d Grouping::group_tag(int agent) const {
  const int g = group_of_.at(agent);
  if (g >= 2) throw std::logic_error("Grouping::group_tag: group id out of range");
  return g == 0 ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, 1.0);
}

}  // namespace pedflow::lspi
