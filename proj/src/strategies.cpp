#include "allwas/strategies.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

#include "allwas/coreset.hpp"
#include "allwas/error.hpp"
#include "allwas/parallel.hpp"
#include "allwas/random.hpp"

namespace allwas {
namespace {

void check_k(const PoolView& pool, std::size_t k) {
  if (pool.embeddings.size() != pool.ids.size()) {
    throw DataError("pool embeddings and ids differ in length");
  }
  if (k > pool.size()) {
    std::ostringstream msg;
    msg << "cannot acquire " << k << " samples from a pool of " << pool.size();
    throw DataError(msg.str());
  }
}

// Top-k by score (descending when `largest`), ties broken by id.
std::vector<std::size_t> top_k(const PoolView& pool, const std::vector<double>& score, std::size_t k,
                               bool largest) {
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return largest ? score[a] > score[b] : score[a] < score[b];
    return pool.ids[a] < pool.ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(pool.ids[order[i]]);
  return out;
}

}  // namespace

std::vector<std::size_t> acquire_random(const PoolView& pool, std::size_t k, std::uint64_t seed) {
  check_k(pool, k);
  Rng rng(derive_seed(seed, {0x7a4d}));
  std::vector<std::size_t> out;
  out.reserve(k);
  for (auto pos : rng.sample_without_replacement(pool.size(), k)) out.push_back(pool.ids[pos]);
  return out;
}

std::vector<std::size_t> acquire_least_confidence(const ClassifierHead& head, const PoolView& pool,
                                                  std::size_t k) {
  check_k(pool, k);
  std::vector<double> confidence(pool.size());
  parallel_for(pool.size(), [&](std::size_t i) {
    confidence[i] = head.predict_proba(pool.embeddings[i]).probs.maxCoeff();
  });
  return top_k(pool, confidence, k, false);
}

std::vector<std::size_t> acquire_mc_dropout(const ClassifierHead& head, const PoolView& pool,
                                            std::size_t k, std::size_t passes, std::uint64_t seed) {
  check_k(pool, k);
  if (passes == 0) throw ConfigError("dropout passes must be >= 1");
  std::vector<double> confidence(pool.size());
  parallel_for(pool.size(), [&](std::size_t i) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(head.num_classes()));
    for (std::size_t t = 0; t < passes; ++t) {
      mean += head.predict_proba(pool.embeddings[i], true, derive_seed(seed, {pool.ids[i], t})).probs;
    }
    mean /= static_cast<double>(passes);
    confidence[i] = mean.maxCoeff();
  });
  return top_k(pool, confidence, k, false);
}

double expected_gradient_length(const ClassifierHead& head, const ExampleEmbedding& x) {
  const GradientMeasure g = head.last_layer_gradients(x);
  return (g.weights.array() * g.support.rowwise().norm().array()).sum();
}

std::vector<std::size_t> acquire_egl(const ClassifierHead& head, const PoolView& pool, std::size_t k) {
  check_k(pool, k);
  std::vector<double> score(pool.size());
  parallel_for(pool.size(), [&](std::size_t i) { score[i] = expected_gradient_length(head, pool.embeddings[i]); });
  return top_k(pool, score, k, true);
}

std::vector<std::size_t> acquire_kcenter(const PoolView& pool,
                                         std::span<const ExampleEmbedding> labeled, std::size_t k) {
  check_k(pool, k);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> nearest(pool.size(), inf);
  for (const auto& center : labeled) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      nearest[i] = std::min(nearest[i], (pool.embeddings[i].pooled - center.pooled).norm());
    }
  }
  std::vector<char> taken(pool.size(), 0);
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i]) continue;
      if (best == pool.size() || nearest[i] > nearest[best] ||
          (nearest[i] == nearest[best] && pool.ids[i] < pool.ids[best])) {
        best = i;
      }
    }
    taken[best] = 1;
    out.push_back(pool.ids[best]);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      nearest[i] = std::min(nearest[i], (pool.embeddings[i].pooled - pool.embeddings[best].pooled).norm());
    }
  }
  return out;
}

std::vector<std::size_t> acquire_allwas(const ClassifierHead& head, const PoolView& pool,
                                        const PoolView& labeled, std::size_t k,
                                        const AllwasOptions& options, std::uint64_t seed) {
  check_k(pool, k);
  if (labeled.embeddings.size() != labeled.ids.size()) {
    throw DataError("labeled embeddings and ids differ in length");
  }
  // Candidates are taken in id order so neither the subsample nor greedy
  // tie-breaking depends on how the pool happens to be ordered.
  std::vector<std::size_t> by_id(pool.size());
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(), [&](auto a, auto b) { return pool.ids[a] < pool.ids[b]; });
  auto kept = subsample_positions(pool.size(), options.subsample.value_or(pool.size()), seed);
  if (kept.size() < k) throw DataError("pool subsample is smaller than k");
  for (auto& pos : kept) pos = by_id[pos];

  // Ground set: kept pool candidates, then the labeled set (the warm start).
  std::vector<GradientMeasure> grads(kept.size() + labeled.size());
  std::vector<std::size_t> ids(grads.size());
  parallel_for(grads.size(), [&](std::size_t i) {
    if (i < kept.size()) {
      grads[i] = head.last_layer_gradients(pool.embeddings[kept[i]]);
      ids[i] = pool.ids[kept[i]];
    } else {
      grads[i] = head.last_layer_gradients(labeled.embeddings[i - kept.size()]);
      ids[i] = labeled.ids[i - kept.size()];
    }
  });

  const DistanceMatrix matrix = pairwise_wasserstein(grads, options.ot, ids);
  if (options.dump_distances) dump_distance_csv(matrix, *options.dump_distances);

  std::vector<std::size_t> warm(labeled.size());
  std::iota(warm.begin(), warm.end(), kept.size());
  const double s0 = options.s0_cost.value_or(default_s0_cost(matrix));
  const SelectionState state = greedy_select(matrix, k, warm, s0);
  std::vector<std::size_t> out;
  out.reserve(k);
  for (auto pos : state.appended) out.push_back(matrix.ids[pos]);
  return out;
}

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names{"random", "lc", "dropout", "egl", "kcenter", "allwas"};
  return names;
}

bool is_known_strategy(std::string_view name) {
  const auto& names = strategy_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<std::size_t> acquire(std::string_view strategy, const ClassifierHead& head,
                                 const PoolView& pool, const PoolView& labeled, std::size_t k,
                                 const StrategyOptions& options, std::uint64_t seed) {
  if (strategy == "random") return acquire_random(pool, k, seed);
  if (strategy == "lc") return acquire_least_confidence(head, pool, k);
  if (strategy == "dropout") return acquire_mc_dropout(head, pool, k, options.dropout_passes, seed);
  if (strategy == "egl") return acquire_egl(head, pool, k);
  if (strategy == "kcenter") return acquire_kcenter(pool, labeled.embeddings, k);
  if (strategy == "allwas") return acquire_allwas(head, pool, labeled, k, options.allwas, seed);
  throw ConfigError("unknown strategy '" + std::string(strategy) + "'");
}

}  // namespace allwas
