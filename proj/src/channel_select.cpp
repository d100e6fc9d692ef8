#include "lglbci/channel_select.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "lglbci/error.hpp"
#include "lglbci/stiefel.hpp"

namespace lgl {

Matrix geodesic_matrix(std::span<const Matrix> samples) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  Matrix g = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = airm_distance(SpdMatrix(samples[static_cast<std::size_t>(i)]),
                                     SpdMatrix(samples[static_cast<std::size_t>(j)]));
      g(i, j) = d;
      g(j, i) = d;
    }
  }
  return g;
}

Matrix tangent_distance_matrix_from_logs(std::span<const Matrix> logs, const Matrix& w) {
  const auto n = static_cast<Eigen::Index>(logs.size());
  std::vector<Matrix> projected;
  projected.reserve(logs.size());
  for (const auto& l : logs) projected.push_back(w.transpose() * l * w);
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (projected[static_cast<std::size_t>(i)] - projected[static_cast<std::size_t>(j)]).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Matrix tangent_distance_matrix(std::span<const Matrix> samples, const Matrix& w) {
  std::vector<Matrix> logs;
  logs.reserve(samples.size());
  for (const auto& x : samples) logs.push_back(spd_log(SpdMatrix(x)).mat());
  return tangent_distance_matrix_from_logs(logs, w);
}

Matrix gamma(const Matrix& dist) {
  const Matrix h = centering_matrix(dist.rows()).mat();
  return symmetrize(-0.5 * h * dist.array().square().matrix() * h);
}

Matrix assemble_L(std::span<const Matrix> logs, const Matrix& gamma_g, const Matrix& w) {
  const auto n = logs.size();
  const auto dim = logs.empty() ? Eigen::Index(0) : logs.front().rows();
  Matrix l = Matrix::Zero(dim, dim);
  // Delta_ji = -Delta_ij, so each unordered pair contributes twice.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double weight = gamma_g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                            gamma_g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      if (weight == 0.0) continue;
      const Matrix dw = (logs[i] - logs[j]) * w;
      l.noalias() -= weight * (dw * dw.transpose());
    }
  }
  return symmetrize(l);
}

TraceMaximiser update_W(const Matrix& l_matrix, Eigen::Index m) {
  if (m < 1 || m > l_matrix.rows()) throw Error(ErrorCode::DimensionMismatch, "m must lie in [1, M]");
  const auto eig = sym_eig(symmetrize(l_matrix));
  TraceMaximiser out{eig.vectors.leftCols(m), eig.values.head(m).sum()};
  return out;
}

std::vector<std::size_t> channels_from_eigenvectors(const Matrix& w, ChannelRule rule) {
  const auto channels = static_cast<std::size_t>(w.rows());
  const auto m = static_cast<std::size_t>(w.cols());
  std::vector<std::size_t> chosen;
  if (rule == ChannelRule::RowNorm) {
    const Vector norms = w.rowwise().norm();
    std::vector<std::size_t> order(channels);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return norms[static_cast<Eigen::Index>(a)] > norms[static_cast<Eigen::Index>(b)];
    });
    chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  } else {
    std::vector<bool> taken(channels, false);
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t best = channels;
      double best_value = -1.0;
      for (std::size_t r = 0; r < channels; ++r) {
        const double v = std::abs(w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
        if (!taken[r] && v > best_value) {
          best = r;
          best_value = v;
        }
      }
      taken[best] = true;
      chosen.push_back(best);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

Matrix SelectionTransform::selection_matrix(Eigen::Index channels) const {
  Matrix e = Matrix::Zero(channels, static_cast<Eigen::Index>(selected_channels.size()));
  for (std::size_t k = 0; k < selected_channels.size(); ++k) {
    e(static_cast<Eigen::Index>(selected_channels[k]), static_cast<Eigen::Index>(k)) = 1.0;
  }
  return e;
}

SelectionTransform fit_selection(std::span<const Matrix> samples, std::optional<std::span<const std::uint32_t>> labels,
                                 const SelectionOptions& options) {
  std::vector<Matrix> points;
  if (labels) {
    if (labels->size() != samples.size()) throw Error(ErrorCode::DimensionMismatch, "one label per sample");
    std::map<std::uint32_t, std::vector<Matrix>> by_class;
    for (std::size_t i = 0; i < samples.size(); ++i) by_class[(*labels)[i]].push_back(samples[i]);
    for (const auto& [label, members] : by_class) points.push_back(karcher_mean(members));
  } else {
    points.assign(samples.begin(), samples.end());
  }
  if (points.size() < 2) throw Error(ErrorCode::InsufficientData, "channel selection needs at least two points");
  const auto channels = points.front().rows();
  const auto m = options.m;
  if (m < 1 || m > channels) throw Error(ErrorCode::InvalidConfig, "m must lie in [1, M]");

  std::vector<Matrix> logs;
  logs.reserve(points.size());
  for (const auto& p : points) logs.push_back(spd_log(SpdMatrix(p)).mat());
  const Matrix gamma_g = gamma(geodesic_matrix(points));

  SelectionTransform out;
  Matrix w = Matrix::Identity(channels, m);
  out.initial_gamma_gap = (gamma_g - gamma(tangent_distance_matrix_from_logs(logs, w))).norm();

  auto objective = [&](const Matrix& l, const Matrix& wt) { return (wt.transpose() * l * wt).trace(); };
  auto record = [&](double value) {
    if (!out.objective_trace.empty()) {
      const double prev = out.objective_trace.back();
      if (value < prev - options.monotone_slack * std::max(1.0, std::abs(prev))) {
        throw Error(ErrorCode::ConvergenceFailure, "selection objective fell from " + std::to_string(prev) + " to " +
                                                       std::to_string(value));
      }
    }
    out.objective_trace.push_back(value);
  };

  // tr(V^T L(W) V) is symmetric in V and W, so the maximum found by each
  // update, tr(W_{t+1}^T L(W_t) W_{t+1}), cannot fall; tr(W_t^T L(W_t) W_t)
  // on its own can.
  Matrix l = assemble_L(logs, gamma_g, w);
  record(objective(l, w));
  for (int t = 0; t < options.max_iters; ++t) {
    const auto best = update_W(l, m);
    const double delta = (best.w * best.w.transpose() - w * w.transpose()).norm();
    w = best.w;
    out.iterations_run = t + 1;
    record(best.trace);
    l = assemble_L(logs, gamma_g, w);
    if (delta < options.tol) break;
  }

  out.w_hat = w;
  out.l_matrix = l;
  out.selected_channels = channels_from_eigenvectors(w, options.rule);
  out.final_gamma_gap = (gamma_g - gamma(tangent_distance_matrix_from_logs(logs, w))).norm();
  return out;
}

MbtHeads init_heads(const SelectionTransform& selection, Eigen::Index channels, std::size_t k, std::mt19937_64& rng) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "need at least one MBT head");
  const Matrix base = selection.selection_matrix(channels);
  MbtHeads heads;
  heads.heads.push_back(base);
  for (std::size_t h = 1; h < k; ++h) {
    heads.heads.push_back(base * stiefel::random_orthonormal(base.cols(), base.cols(), rng));
  }
  return heads;
}

std::vector<std::vector<Matrix>> mbt_apply(const MbtHeads& heads, std::span<const Matrix> tangent) {
  std::vector<std::vector<Matrix>> out(tangent.size());
  for (std::size_t i = 0; i < tangent.size(); ++i) {
    out[i].reserve(heads.size());
    for (const auto& w : heads.heads) out[i].push_back(w.transpose() * tangent[i] * w);
  }
  return out;
}

}  // namespace lgl
