#pragma once

// Acquisition functions over an unlabeled pool. A pool carries embeddings and
// ids only, so no strategy can read a true label.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "allwas/gradspace.hpp"
#include "allwas/model.hpp"

namespace allwas {

struct PoolView {
  std::span<const ExampleEmbedding> embeddings;
  std::span<const std::size_t> ids;

  std::size_t size() const { return ids.size(); }
};

struct AllwasOptions {
  PairwiseOptions ot;
  /// Pool candidates kept for the O(N^2) distance pass; unset keeps all.
  std::optional<std::size_t> subsample = 2000;
  /// Defaults to default_s0_cost of the distance matrix.
  std::optional<double> s0_cost;
  /// When set, every distance matrix is written here as CSV.
  std::optional<std::filesystem::path> dump_distances;
};

struct StrategyOptions {
  std::size_t dropout_passes = 10;
  AllwasOptions allwas;
};

std::vector<std::size_t> acquire_random(const PoolView& pool, std::size_t k, std::uint64_t seed);

/// Smallest max-class probability first; ties by id.
std::vector<std::size_t> acquire_least_confidence(const ClassifierHead& head, const PoolView& pool,
                                                  std::size_t k);

/// Least confidence on the mean of `passes` dropout-active predictions.
std::vector<std::size_t> acquire_mc_dropout(const ClassifierHead& head, const PoolView& pool,
                                            std::size_t k, std::size_t passes, std::uint64_t seed);

/// sum_c p_c ||g_c||.
double expected_gradient_length(const ClassifierHead& head, const ExampleEmbedding& x);

/// Largest expected gradient length first; ties by id.
std::vector<std::size_t> acquire_egl(const ClassifierHead& head, const PoolView& pool, std::size_t k);

/// Greedy k-center on pooled embeddings, seeded with the labeled centers.
std::vector<std::size_t> acquire_kcenter(const PoolView& pool,
                                         std::span<const ExampleEmbedding> labeled, std::size_t k);

/// Gradient measures -> pairwise Sinkhorn distances over pool u labeled ->
/// greedy facility location warm-started with the labeled set. Returns the
/// appended pool ids in greedy order.
std::vector<std::size_t> acquire_allwas(const ClassifierHead& head, const PoolView& pool,
                                        const PoolView& labeled, std::size_t k,
                                        const AllwasOptions& options, std::uint64_t seed);

/// Names accepted by acquire(): random lc dropout egl kcenter allwas.
const std::vector<std::string>& strategy_names();
bool is_known_strategy(std::string_view name);

std::vector<std::size_t> acquire(std::string_view strategy, const ClassifierHead& head,
                                 const PoolView& pool, const PoolView& labeled, std::size_t k,
                                 const StrategyOptions& options, std::uint64_t seed);

}  // namespace allwas
