#pragma once

// Over-sampling of a labeled set: Wasserstein barycenters of token clouds with
// lambda-mixed soft labels, and a per-class Gaussian KDE baseline.

#include <cstdint>
#include <span>
#include <vector>

#include "allwas/model.hpp"
#include "allwas/transport.hpp"

namespace allwas {

enum class LambdaScheme { kUniformSimplex, kDirichlet };
enum class Pairing { kWithinClassMinorityWeighted, kAnyPair };

struct AugmentationConfig {
  std::size_t factor = 20;
  std::size_t group_size = 2;
  LambdaScheme lambda_scheme = LambdaScheme::kUniformSimplex;
  double dirichlet_alpha = 1.0;
  Pairing pairing = Pairing::kWithinClassMinorityWeighted;
  std::uint64_t seed = 0;
  BarycenterOptions barycenter;

  void validate() const;
};

struct SyntheticExample {
  ExampleEmbedding x;
  SoftLabel y;
  /// Indices into the labeled span the example was built from.
  std::vector<std::size_t> parents;
  std::vector<double> lambdas;
};

/// sum_i lambdas[i] * labeled[parents[i]].y, accumulated in parent order.
SoftLabel mix_labels(std::span<const TrainingExample> labeled, std::span<const std::size_t> parents,
                     std::span<const double> lambdas);

/// Probability of drawing each class (indexed by argmax label). Within-class
/// mode weights classes by inverse frequency over classes with at least
/// `min_members` members; any-pair mode by frequency.
std::vector<double> class_sampling_weights(std::span<const TrainingExample> labeled,
                                           Pairing pairing, std::size_t min_members = 1);

/// factor * |labeled| barycentric samples; deterministic per cfg.seed.
std::vector<SyntheticExample> augment_wasserstein(std::span<const TrainingExample> labeled,
                                                  const AugmentationConfig& cfg);

/// factor * |labeled| draws from per-class Gaussian KDEs over pooled
/// embeddings (Scott bandwidth per dimension, floored at 1e-3), each a
/// single-row token matrix with a one-hot label.
std::vector<SyntheticExample> augment_l2_kde(std::span<const TrainingExample> labeled,
                                             const AugmentationConfig& cfg);

inline constexpr double kKdeBandwidthFloor = 1e-3;

}  // namespace allwas
