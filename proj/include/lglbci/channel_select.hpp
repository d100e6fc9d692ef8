#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "lglbci/spd.hpp"

namespace lgl {

// N x N geodesic (AIRM) distances between samples. Throws NotPositiveDefinite.
Matrix geodesic_matrix(std::span<const Matrix> samples);

// N x N distances ||W^T (log X_i - log X_j) W||_F.
Matrix tangent_distance_matrix(std::span<const Matrix> samples, const Matrix& w);
Matrix tangent_distance_matrix_from_logs(std::span<const Matrix> logs, const Matrix& w);

// -1/2 H (dist .^ 2) H
Matrix gamma(const Matrix& dist);

// -sum_ij (gamma_G)_ij D_ij W W^T D_ij^T with D_ij = log X_i - log X_j.
Matrix assemble_L(std::span<const Matrix> logs, const Matrix& gamma_g, const Matrix& w);

struct TraceMaximiser {
  Matrix w;      // M x m, eigenvectors of the m largest eigenvalues
  double trace;  // tr(W^T L W)
};
// Throws ConvergenceFailure, DimensionMismatch.
TraceMaximiser update_W(const Matrix& l_matrix, Eigen::Index m);

enum class ChannelRule { RowNorm, ArgmaxEntry };

struct SelectionOptions {
  Eigen::Index m = 0;
  int max_iters = 20;
  double tol = 1e-6;
  ChannelRule rule = ChannelRule::RowNorm;
  double monotone_slack = 1e-9;
};

struct SelectionTransform {
  Matrix w_hat;                              // M x m, orthonormal columns
  std::vector<std::size_t> selected_channels;  // sorted
  Matrix l_matrix;                           // last assembled L
  int iterations_run = 0;
  std::vector<double> objective_trace;       // tr(W_0^T L(W_0) W_0), then tr(W_{t+1}^T L(W_t) W_{t+1})
  double initial_gamma_gap = 0.0;            // ||gamma_G - gamma_D(W_0)||_F
  double final_gamma_gap = 0.0;

  // Columns of the identity at the selected channels (M x m).
  Matrix selection_matrix(Eigen::Index channels) const;
};

// Alternates assemble_L / update_W from W_0 = first m identity columns.
// With labels, each class is replaced by its Karcher mean first.
// Throws ConvergenceFailure when the objective decreases beyond the slack.
SelectionTransform fit_selection(std::span<const Matrix> samples, std::optional<std::span<const std::uint32_t>> labels,
                                 const SelectionOptions& options);

std::vector<std::size_t> channels_from_eigenvectors(const Matrix& w, ChannelRule rule);

// K heads, each an M x m orthonormal map V -> W_k^T V W_k.
struct MbtHeads {
  std::vector<Matrix> heads;
  std::size_t size() const { return heads.size(); }
};

// First head is the channel-selection matrix; later heads are random
// orthonormal mixes within the selected channels.
MbtHeads init_heads(const SelectionTransform& selection, Eigen::Index channels, std::size_t k, std::mt19937_64& rng);

// Output index [input][head] -> m x m.
std::vector<std::vector<Matrix>> mbt_apply(const MbtHeads& heads, std::span<const Matrix> tangent);

}  // namespace lgl
