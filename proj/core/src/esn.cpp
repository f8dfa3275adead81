#include "pedflow/esn.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace pedflow::esn {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

int window_ring(int row, int col) {
  const int half = kWindow / 2;
  const int dr = std::abs(row - half);
  const int dc = std::abs(col - half);
  const int d = std::max(dr, dc);
  if (d <= 1) return 0;
  if (d <= 3) return 1;
  return 2;
}

void SparsityProfile::validate() const {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(p_s1_in)) throw std::invalid_argument("p_s1_in: must be in [0,1]");
  if (!in_unit(p_s2_in)) throw std::invalid_argument("p_s2_in: must be in [0,1]");
  if (!in_unit(p_s3_in)) throw std::invalid_argument("p_s3_in: must be in [0,1]");
  if (!in_unit(p_sb_in)) throw std::invalid_argument("p_sb_in: must be in [0,1]");
  if (!in_unit(p_s_res)) throw std::invalid_argument("p_s_res: must be in [0,1]");
  if (!(p_s1_in <= p_s2_in && p_s2_in <= p_s3_in))
    throw std::invalid_argument("p_s1_in/p_s2_in/p_s3_in: must be non-decreasing");
  if (!(sigma_in_o > 0.0)) throw std::invalid_argument("sigma_in_o: must be > 0");
  if (!(sigma_in_a > 0.0)) throw std::invalid_argument("sigma_in_a: must be > 0");
  if (!(sigma_in_b > 0.0)) throw std::invalid_argument("sigma_in_b: must be > 0");
  if (!(sigma_res_0 > 0.0)) throw std::invalid_argument("sigma_res_0: must be > 0");
  if (!(rho_target > 0.0 && rho_target < 1.0))
    throw std::invalid_argument("rho_target: must be in (0,1)");
}

std::vector<double> observation_sparsity(const SparsityProfile& profile) {
  const double by_ring[3] = {profile.p_s1_in, profile.p_s2_in, profile.p_s3_in};
  std::vector<double> sparsity(kObsDim);
  for (int row = 0; row < kWindow; ++row)
    for (int col = 0; col < kWindow; ++col)
      for (int ch = 0; ch < 2; ++ch)
        sparsity[obs_index(row, col, ch)] = by_ring[window_ring(row, col)];
  return sparsity;
}

Eigen::MatrixXd generate_sparse_matrix(int rows, int cols,
                                       const std::vector<double>& sparsity_per_column,
                                       double sigma, Rng& rng) {
  require(rows > 0 && cols > 0, "generate_sparse_matrix: dimensions must be positive");
  require(static_cast<int>(sparsity_per_column.size()) == cols,
          "generate_sparse_matrix: one sparsity per column required");
  require(sigma > 0.0, "generate_sparse_matrix: sigma must be > 0");
  for (double p : sparsity_per_column)
    require(p >= 0.0 && p <= 1.0, "generate_sparse_matrix: sparsity must be in [0,1]");

  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    const double p = sparsity_per_column[c];
    for (int r = 0; r < rows; ++r) {
      m(r, c) = rng.uniform01() < p ? 0.0 : rng.gaussian(sigma);
    }
  }
  return m;
}

Eigen::MatrixXd generate_sparse_matrix(int rows, int cols, double sparsity,
                                       double sigma, Rng& rng) {
  require(rows > 0 && cols > 0, "generate_sparse_matrix: dimensions must be positive");
  return generate_sparse_matrix(rows, cols, std::vector<double>(cols, sparsity),
                                sigma, rng);
}

namespace {

struct ArnoldiResult {
  double value = 0.0;  // largest converged |Ritz value|
  bool converged = false;
};

// One restarted Arnoldi sweep from a given start vector. Only a converged
// Ritz pair (residual below tol * scale) or an exactly invariant subspace
// yields a trusted value: magnitudes of unconverged Ritz values of a
// non-normal matrix routinely overshoot the spectral radius.
ArnoldiResult arnoldi_from(const Eigen::MatrixXd& m, Eigen::VectorXd v, int krylov,
                           double tol, int max_restarts) {
  const int n = static_cast<int>(m.rows());
  ArnoldiResult result;
  for (int restart = 0; restart < max_restarts; ++restart) {
    Eigen::MatrixXd basis(n, krylov + 1);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(krylov + 1, krylov);
    basis.col(0) = v;

    int k = krylov;
    bool breakdown = false;
    for (int j = 0; j < krylov; ++j) {
      Eigen::VectorXd w = m * basis.col(j);
      // modified Gram-Schmidt with one reorthogonalization pass
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const double h = basis.col(i).dot(w);
          hess(i, j) += h;
          w -= h * basis.col(i);
        }
      }
      const double norm = w.norm();
      hess(j + 1, j) = norm;
      if (norm <= 1e-14 * std::max(1.0, hess.topLeftCorner(j + 1, j + 1).norm())) {
        k = j + 1;
        breakdown = true;
        break;
      }
      basis.col(j + 1) = w / norm;
    }

    Eigen::EigenSolver<Eigen::MatrixXd> eig(hess.topLeftCorner(k, k));
    int dominant = 0;
    double top = 0.0;
    for (int i = 0; i < k; ++i) {
      const double mag = std::abs(eig.eigenvalues()(i));
      if (mag > top) {
        top = mag;
        dominant = i;
      }
    }

    if (breakdown) {
      // the subspace is invariant: its Ritz values are true eigenvalues
      result.value = top;
      result.converged = true;
      return result;
    }

    const Eigen::VectorXcd ritz = eig.eigenvectors().col(dominant);
    const double residual = hess(k, k - 1) * std::abs(ritz(k - 1));
    result.value = top;
    if (residual <= tol * std::max(top, 1.0)) {
      result.converged = true;
      return result;
    }

    // restart from the dominant Ritz vector (its real part spans the
    // invariant plane when the dominant eigenvalue is a complex pair)
    Eigen::VectorXd next = (basis.leftCols(k) * ritz).real();
    if (next.norm() <= 1e-14) next = (basis.leftCols(k) * ritz).imag();
    v = next.normalized();
  }
  return result;  // best effort, flagged unconverged
}

}  // namespace

double spectral_radius(const Eigen::MatrixXd& m, double tol, int max_restarts) {
  require(m.rows() == m.cols(), "spectral_radius: matrix must be square");
  require(m.rows() > 0, "spectral_radius: matrix must be non-empty");
  const int n = static_cast<int>(m.rows());
  if (n == 1) return std::abs(m(0, 0));

  const int krylov = std::min(n, 48);

  // several independent deterministic starts; a single restarted sweep can
  // lock onto a subdominant eigenvalue when the moduli are clustered
  double best_converged = -1.0;
  double best_any = 0.0;
  for (std::uint64_t attempt = 0; attempt < 3; ++attempt) {
    Rng rng(derive_stream(0x9E3779B97F4A7C15ULL,
                          static_cast<std::uint64_t>(n) * 8 + attempt));
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.gaussian();
    v.normalize();
    const ArnoldiResult result =
        arnoldi_from(m, std::move(v), krylov, tol, max_restarts);
    best_any = std::max(best_any, result.value);
    if (result.converged) best_converged = std::max(best_converged, result.value);
  }
  return best_converged >= 0.0 ? best_converged : best_any;
}

Eigen::MatrixXd rescale_spectral_radius(const Eigen::MatrixXd& w0, double rho_target) {
  require(w0.rows() == w0.cols(), "rescale_spectral_radius: matrix must be square");
  const double rho0 = spectral_radius(w0);
  if (!(rho0 > 0.0))
    throw std::domain_error("rescale_spectral_radius: zero spectral radius");
  return (rho_target / rho0) * w0;
}

WeightBundle build_weight_bundle(int n_res, const SparsityProfile& profile,
                                 std::uint64_t seed, double alpha, int n_units,
                                 bool with_group_input) {
  profile.validate();
  require(n_res > 0, "build_weight_bundle: n_res must be positive");
  require(n_units > 0, "build_weight_bundle: n_units must be positive");
  require(alpha > 0.0 && alpha <= 1.0, "build_weight_bundle: alpha must be in (0,1]");

  WeightBundle bundle;
  bundle.alpha = alpha;

  Rng rng_obs(derive_stream(seed, weight_stream::kInObs));
  bundle.w_in_o = generate_sparse_matrix(n_res, kObsDim, observation_sparsity(profile),
                                         profile.sigma_in_o, rng_obs);

  Rng rng_action(derive_stream(seed, weight_stream::kInAction));
  bundle.w_in_a =
      generate_sparse_matrix(n_res, kNumActions, 0.0, profile.sigma_in_a, rng_action);

  Rng rng_bias(derive_stream(seed, weight_stream::kInBias));
  bundle.w_in_b = generate_sparse_matrix(n_res, 1, profile.p_sb_in, profile.sigma_in_b,
                                         rng_bias)
                      .col(0);

  Rng rng_res(derive_stream(seed, weight_stream::kReservoir));
  const Eigen::MatrixXd w0 = generate_sparse_matrix(n_res, n_res, profile.p_s_res,
                                                    profile.sigma_res_0, rng_res);
  bundle.w_res = rescale_spectral_radius(w0, profile.rho_target);

  if (with_group_input) {
    Rng rng_group(derive_stream(seed, weight_stream::kInGroup));
    // same scale as the action input
    bundle.w_in_g =
        generate_sparse_matrix(n_res, kNumGroups, 0.0, profile.sigma_in_a, rng_group);
  }

  bundle.w_out.assign(n_units, Eigen::RowVectorXd::Zero(n_res + 1));
  return bundle;
}

Eigen::MatrixXd input_preactivations(const Eigen::MatrixXd& obs_cols,
                                     const Eigen::MatrixXd& state_cols,
                                     const WeightBundle& weights,
                                     const Eigen::MatrixXd* group_tags) {
  const int n_res = weights.n_res();
  require(obs_cols.rows() == weights.w_in_o.cols(),
          "input_preactivations: observation dimension mismatch");
  require(state_cols.rows() == n_res, "input_preactivations: state dimension mismatch");
  require(state_cols.cols() == obs_cols.cols(),
          "input_preactivations: column count mismatch");
  require((group_tags != nullptr) == weights.has_group_input(),
          "input_preactivations: group tag must be present iff the bundle has a group input");
  if (group_tags != nullptr) {
    require(group_tags->rows() == kNumGroups && group_tags->cols() == obs_cols.cols(),
            "input_preactivations: group tag dimension mismatch");
  }

  Eigen::MatrixXd x_in = weights.w_in_o * obs_cols;
  x_in.noalias() += weights.w_res * state_cols;
  x_in.colwise() += weights.w_in_b;
  if (group_tags != nullptr) x_in.noalias() += weights.w_in_g * (*group_tags);
  return x_in;
}

CandidateEvaluation finish_candidates(const Eigen::Ref<const Eigen::VectorXd>& x_in,
                                      const Eigen::Ref<const Eigen::VectorXd>& state_x,
                                      const WeightBundle& weights, int output_unit) {
  const int n_res = weights.n_res();
  require(x_in.size() == n_res, "finish_candidates: preactivation dimension mismatch");
  require(state_x.size() == n_res, "finish_candidates: state dimension mismatch");
  require(output_unit >= 0 && output_unit < static_cast<int>(weights.w_out.size()),
          "finish_candidates: output unit out of range");

  const Eigen::RowVectorXd& readout = weights.w_out[output_unit];
  const double alpha = weights.alpha;

  CandidateEvaluation eval;
  eval.states.resize(n_res, kNumActions);
  for (int a = 0; a < kNumActions; ++a) {
    eval.states.col(a) =
        alpha * (x_in + weights.w_in_a.col(a)).cwiseMax(0.0) + (1.0 - alpha) * state_x;
    eval.q(a) = readout.head(n_res).dot(eval.states.col(a)) + readout(n_res);
  }
  return eval;
}

CandidateEvaluation evaluate_candidates(const Eigen::Ref<const Eigen::VectorXd>& obs,
                                        const ReservoirState& state,
                                        const WeightBundle& weights, int output_unit,
                                        const Eigen::Vector2d* group_tag) {
  Eigen::MatrixXd tags;
  const Eigen::MatrixXd* tags_ptr = nullptr;
  if (group_tag != nullptr) {
    tags = *group_tag;
    tags_ptr = &tags;
  }
  const Eigen::MatrixXd x_in = input_preactivations(obs, state.x, weights, tags_ptr);
  return finish_candidates(x_in.col(0), state.x, weights, output_unit);
}

void commit_action(ReservoirState& state, const Eigen::MatrixXd& candidate_states,
                   int chosen_action) {
  require(chosen_action >= 0 && chosen_action < candidate_states.cols(),
          "commit_action: action index out of range");
  require(candidate_states.rows() == state.x.size(),
          "commit_action: candidate dimension mismatch");
  state.x = candidate_states.col(chosen_action);
}

}  // namespace pedflow::esn
