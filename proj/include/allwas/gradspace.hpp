#pragma once

// Gradient-space geometry: one discrete measure per pool sample, and the
// pairwise Wasserstein matrix the coreset objective reads.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "allwas/transport.hpp"

namespace allwas {

/// Support rows are per-class gradient vectors g_c, weights are the predicted
/// class probabilities.
using GradientMeasure = DiscreteMeasure;

struct DistanceMatrix {
  Eigen::MatrixXd values;
  /// ids[r] is the caller's sample id for row/column r.
  std::vector<std::size_t> ids;

  std::size_t size() const { return ids.size(); }
  double operator()(std::size_t i, std::size_t j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

struct PairwiseOptions {
  double p = 2.0;
  /// Absolute eps for every pair; unset uses the per-pair median rule.
  std::optional<double> epsilon;
  double eps_scale = 0.05;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
};

/// Symmetric matrix of Sinkhorn W_p^p between every pair of measures.
/// `ids` labels the rows (defaults to 0..n-1). Bitwise-identical measures
/// get an exact 0. The diagonal is 0.
DistanceMatrix pairwise_wasserstein(std::span<const GradientMeasure> grads,
                                    const PairwiseOptions& options = {},
                                    std::span<const std::size_t> ids = {});

/// Seeded uniform subsample of `count` positions out of n, sorted ascending;
/// all positions when count >= n.
std::vector<std::size_t> subsample_positions(std::size_t n, std::size_t count, std::uint64_t seed);

/// Subsamples the measures (when `subsample` is set) and then computes the
/// pairwise matrix; `ids` of the result record the survivors' original ids.
DistanceMatrix pairwise_wasserstein(std::span<const GradientMeasure> grads,
                                    std::span<const std::size_t> ids,
                                    std::optional<std::size_t> subsample, std::uint64_t seed,
                                    const PairwiseOptions& options = {});

/// Writes the matrix as CSV with a leading id column and an id header row.
void dump_distance_csv(const DistanceMatrix& matrix, const std::filesystem::path& path);

}  // namespace allwas
