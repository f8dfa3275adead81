#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "pedflow/rng.hpp"

namespace pedflow::esn {

/// Local observation window: 11x11 cells, 2 channels per cell.
inline constexpr int kWindow = 11;
inline constexpr int kObsDim = kWindow * kWindow * 2;  // 242
inline constexpr int kNumActions = 4;
inline constexpr int kNumGroups = 2;

/// Flat index of (window row, window col, channel) in an observation vector.
/// Row-major over the window, channels interleaved per cell
/// (channel 0 = agent-occupied, channel 1 = wall).
constexpr int obs_index(int row, int col, int channel) {
  return 2 * (row * kWindow + col) + channel;
}

/// Concentric square rings of the window: 0 for the 3x3 core, 1 for the
/// 7x7 band around it, 2 for the 11x11 rim.
int window_ring(int row, int col);

/// Sparsities and scales of the fixed random matrices.
struct SparsityProfile {
  double p_s1_in = 0.6;  // observation columns in the 3x3 core
  double p_s2_in = 0.8;  // observation columns in the 7x7 band
  double p_s3_in = 0.9;  // observation columns in the 11x11 rim
  double p_sb_in = 0.9;  // bias vector
  double p_s_res = 0.9;  // recurrent matrix
  double sigma_in_o = 1.0;
  double sigma_in_a = 2.0;
  double sigma_in_b = 1.0;
  double sigma_res_0 = 1.0;
  double rho_target = 0.95;  // spectral radius of the rescaled recurrent matrix

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Per-column sparsity of the observation input matrix under a profile,
/// indexed like an observation vector (both channels of a cell share the
/// cell's ring).
std::vector<double> observation_sparsity(const SparsityProfile& profile);

/// Entries are zero with the column's sparsity probability, otherwise drawn
/// from a zero-mean gaussian with the given standard deviation. Entries are
/// generated column by column (column-major draw order).
Eigen::MatrixXd generate_sparse_matrix(int rows, int cols,
                                       const std::vector<double>& sparsity_per_column,
                                       double sigma, Rng& rng);

/// Uniform-sparsity convenience overload.
Eigen::MatrixXd generate_sparse_matrix(int rows, int cols, double sparsity,
                                       double sigma, Rng& rng);

/// Largest eigenvalue magnitude of a square matrix, computed by restarted
/// Arnoldi iteration (handles complex dominant pairs, unlike plain power
/// iteration). Deterministic for a given matrix.
double spectral_radius(const Eigen::MatrixXd& m, double tol = 1e-10,
                       int max_restarts = 200);

/// Returns (rho_target / spectral_radius(w0)) * w0.
/// Throws std::invalid_argument on non-square input and
/// std::domain_error when w0 has zero spectral radius.
Eigen::MatrixXd rescale_spectral_radius(const Eigen::MatrixXd& w0, double rho_target);

/// All fixed random matrices plus the per-unit trainable readout rows.
/// Immutable during an episode; readout rows are replaced between episodes.
struct WeightBundle {
  Eigen::MatrixXd w_in_o;  // n_res x 242
  Eigen::MatrixXd w_in_a;  // n_res x 4, dense
  Eigen::MatrixXd w_in_g;  // n_res x 2, dense; empty unless group input enabled
  Eigen::VectorXd w_in_b;  // n_res
  Eigen::MatrixXd w_res;   // n_res x n_res, spectral radius = rho_target
  double alpha = 0.8;      // leaking rate

  /// One scalar readout row of length n_res + 1 (reservoir + bias slot)
  /// per learning unit.
  std::vector<Eigen::RowVectorXd> w_out;

  int n_res() const { return static_cast<int>(w_res.rows()); }
  bool has_group_input() const { return w_in_g.size() > 0; }
};

/// Stream ids for the matrix generators (children of a bundle seed).
namespace weight_stream {
inline constexpr std::uint64_t kInObs = 0;
inline constexpr std::uint64_t kInAction = 1;
inline constexpr std::uint64_t kInBias = 2;
inline constexpr std::uint64_t kReservoir = 3;
inline constexpr std::uint64_t kInGroup = 4;
}  // namespace weight_stream

/// Build all fixed matrices from a seed. Each matrix has its own derived
/// stream, so any one of them is unchanged if the others grow or shrink.
/// Readout rows start at zero (one per unit).
WeightBundle build_weight_bundle(int n_res, const SparsityProfile& profile,
                                 std::uint64_t seed, double alpha, int n_units,
                                 bool with_group_input);

/// Leaky reservoir activation of one agent. Zeroed at every episode start.
struct ReservoirState {
  Eigen::VectorXd x;
  int owner = -1;

  explicit ReservoirState(int n_res = 0, int owner_id = -1)
      : x(Eigen::VectorXd::Zero(n_res)), owner(owner_id) {}
  void reset() { x.setZero(); }
};

struct CandidateEvaluation {
  Eigen::Vector4d q;       // Q value per action
  Eigen::MatrixXd states;  // n_res x 4, post-leak candidate state per action
};

/// Action-independent part of the pre-activation:
///   w_in_o * obs + w_in_b + w_res * x  (+ w_in_g * group_tag)
/// One column per agent; obs and state columns are matched by position.
/// group_tags may be null when the bundle has no group input.
Eigen::MatrixXd input_preactivations(const Eigen::MatrixXd& obs_cols,
                                     const Eigen::MatrixXd& state_cols,
                                     const WeightBundle& weights,
                                     const Eigen::MatrixXd* group_tags);

/// Per-action completion: X~(a) = relu(x_in + w_in_a col a),
/// X-(a) = alpha X~(a) + (1 - alpha) x, Q(a) = w_out . (X-(a); 1).
CandidateEvaluation finish_candidates(const Eigen::Ref<const Eigen::VectorXd>& x_in,
                                      const Eigen::Ref<const Eigen::VectorXd>& state_x,
                                      const WeightBundle& weights,
                                      int output_unit);

/// Q values and candidate states for all actions of one agent.
/// group_tag must be present exactly when the bundle has a group input.
CandidateEvaluation evaluate_candidates(const Eigen::Ref<const Eigen::VectorXd>& obs,
                                        const ReservoirState& state,
                                        const WeightBundle& weights,
                                        int output_unit,
                                        const Eigen::Vector2d* group_tag = nullptr);

/// Replace the reservoir state by the chosen candidate.
void commit_action(ReservoirState& state, const Eigen::MatrixXd& candidate_states,
                   int chosen_action);

}  // namespace pedflow::esn
