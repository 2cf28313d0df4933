#include "allwas/gradspace.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "allwas/error.hpp"
#include "allwas/parallel.hpp"
#include "allwas/random.hpp"

namespace allwas {

DistanceMatrix pairwise_wasserstein(std::span<const GradientMeasure> grads,
                                    const PairwiseOptions& options,
                                    std::span<const std::size_t> ids) {
  if (grads.empty()) throw DataError("pairwise_wasserstein needs at least one measure");
  if (!ids.empty() && ids.size() != grads.size()) {
    throw DataError("pairwise_wasserstein id map does not match the number of measures");
  }
  const std::size_t n = grads.size();
  for (const auto& g : grads) {
    g.validate();
    if (g.dim() != grads[0].dim() || g.size() != grads[0].size()) {
      throw DataError("gradient measures must share the hidden size and class count");
    }
  }

  DistanceMatrix out;
  out.ids.resize(n);
  if (ids.empty()) {
    std::iota(out.ids.begin(), out.ids.end(), std::size_t{0});
  } else {
    std::copy(ids.begin(), ids.end(), out.ids.begin());
  }
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  // Row i owns entries (i, j > i); mirrored after the parallel pass.
  parallel_for(n, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (grads[i] == grads[j]) continue;
      const CostMatrix cost = ground_cost(grads[i], grads[j], options.p);
      const double eps = options.epsilon.value_or(default_epsilon(cost.entries, options.eps_scale));
      const TransportPlan plan = sinkhorn_solve(cost.entries, grads[i].weights, grads[j].weights,
                                                eps, options.max_iter, options.tol);
      out.values(ii, static_cast<Eigen::Index>(j)) = std::max(0.0, plan.cost);
    }
  });
  out.values.triangularView<Eigen::StrictlyLower>() = out.values.transpose();
  return out;
}

std::vector<std::size_t> subsample_positions(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count >= n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  Rng rng(derive_seed(seed, {0x5b5a}));
  auto picked = rng.sample_without_replacement(n, count);
  std::sort(picked.begin(), picked.end());
  return picked;
}

DistanceMatrix pairwise_wasserstein(std::span<const GradientMeasure> grads,
                                    std::span<const std::size_t> ids,
                                    std::optional<std::size_t> subsample, std::uint64_t seed,
                                    const PairwiseOptions& options) {
  if (grads.empty()) throw DataError("pairwise_wasserstein needs at least one measure");
  if (ids.size() != grads.size()) {
    throw DataError("pairwise_wasserstein id map does not match the number of measures");
  }
  if (!subsample || *subsample >= grads.size()) return pairwise_wasserstein(grads, options, ids);
  const auto keep = subsample_positions(grads.size(), *subsample, seed);
  std::vector<GradientMeasure> kept;
  std::vector<std::size_t> kept_ids;
  kept.reserve(keep.size());
  for (auto pos : keep) {
    kept.push_back(grads[pos]);
    kept_ids.push_back(ids[pos]);
  }
  return pairwise_wasserstein(kept, options, kept_ids);
}

void dump_distance_csv(const DistanceMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write distance dump: " + path.string());
  out.precision(17);
  out << "id";
  for (auto id : matrix.ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out << matrix.ids[i];
    for (std::size_t j = 0; j < matrix.size(); ++j) out << ',' << matrix(i, j);
    out << '\n';
  }
}

}  // namespace allwas
