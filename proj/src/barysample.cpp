#include "allwas/barysample.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "allwas/error.hpp"
#include "allwas/log.hpp"
#include "allwas/parallel.hpp"
#include "allwas/random.hpp"

namespace allwas {
namespace {

std::vector<std::vector<std::size_t>> members_by_class(std::span<const TrainingExample> labeled,
                                                       std::size_t num_classes) {
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < labeled.size(); ++i) members[labeled[i].y.argmax()].push_back(i);
  return members;
}

void check_labeled(std::span<const TrainingExample> labeled, const AugmentationConfig& cfg) {
  cfg.validate();
  if (labeled.size() < cfg.group_size) {
    std::ostringstream msg;
    msg << "augmentation needs at least " << cfg.group_size << " labeled examples, got "
        << labeled.size();
    throw DataError(msg.str());
  }
  for (const auto& ex : labeled) {
    if (ex.x.dim() != labeled.front().x.dim() ||
        ex.y.num_classes() != labeled.front().y.num_classes()) {
      throw DataError("augmentation inputs have inconsistent shapes");
    }
  }
}

std::vector<double> draw_lambdas(Rng& rng, const AugmentationConfig& cfg) {
  const double alpha = cfg.lambda_scheme == LambdaScheme::kUniformSimplex ? 1.0 : cfg.dirichlet_alpha;
  return rng.dirichlet(cfg.group_size, alpha);
}

}  // namespace

void AugmentationConfig::validate() const {
  if (group_size < 2) throw ConfigError("augmentation group_size must be >= 2");
  if (lambda_scheme == LambdaScheme::kDirichlet && !(dirichlet_alpha > 0.0)) {
    throw ConfigError("dirichlet alpha must be positive");
  }
}

SoftLabel mix_labels(std::span<const TrainingExample> labeled, std::span<const std::size_t> parents,
                     std::span<const double> lambdas) {
  if (parents.empty() || parents.size() != lambdas.size()) {
    throw DataError("mix_labels needs one lambda per parent");
  }
  SoftLabel out;
  out.probs = Eigen::VectorXd::Zero(labeled[parents[0]].y.probs.size());
  for (std::size_t i = 0; i < parents.size(); ++i) {
    out.probs += lambdas[i] * labeled[parents[i]].y.probs;
  }
  return out;
}

std::vector<double> class_sampling_weights(std::span<const TrainingExample> labeled,
                                           Pairing pairing, std::size_t min_members) {
  if (labeled.empty()) return {};
  const std::size_t c = labeled.front().y.num_classes();
  const auto members = members_by_class(labeled, c);
  std::vector<double> w(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    const auto count = members[k].size();
    if (count == 0 || count < min_members) continue;
    w[k] = pairing == Pairing::kWithinClassMinorityWeighted ? 1.0 / static_cast<double>(count)
                                                            : static_cast<double>(count);
  }
  double total = 0.0;
  for (double x : w) total += x;
  if (total > 0.0) {
    for (double& x : w) x /= total;
  }
  return w;
}

std::vector<SyntheticExample> augment_wasserstein(std::span<const TrainingExample> labeled,
                                                  const AugmentationConfig& cfg) {
  check_labeled(labeled, cfg);
  if (cfg.factor == 0) return {};
  const std::size_t total = cfg.factor * labeled.size();
  const std::size_t c = labeled.front().y.num_classes();
  const auto members = members_by_class(labeled, c);

  Pairing pairing = cfg.pairing;
  std::vector<double> class_w;
  if (pairing == Pairing::kWithinClassMinorityWeighted) {
    class_w = class_sampling_weights(labeled, pairing, cfg.group_size);
    if (std::all_of(class_w.begin(), class_w.end(), [](double x) { return x == 0.0; })) {
      warn("no class has enough members for within-class barycenters; mixing across classes");
      pairing = Pairing::kAnyPair;
    }
  }

  // Draw every group and lambda up front so the parallel pass is order-free.
  Rng rng(derive_seed(cfg.seed, {0xba12}));
  std::vector<SyntheticExample> out(total);
  for (auto& s : out) {
    if (pairing == Pairing::kWithinClassMinorityWeighted) {
      const auto& pool = members[rng.categorical(class_w)];
      for (auto pos : rng.sample_without_replacement(pool.size(), cfg.group_size)) {
        s.parents.push_back(pool[pos]);
      }
    } else {
      s.parents = rng.sample_without_replacement(labeled.size(), cfg.group_size);
    }
    s.lambdas = draw_lambdas(rng, cfg);
  }

  parallel_for(total, [&](std::size_t i) {
    auto& s = out[i];
    std::vector<DiscreteMeasure> clouds;
    clouds.reserve(s.parents.size());
    for (auto p : s.parents) clouds.push_back(DiscreteMeasure::uniform(labeled[p].x.tokens));
    const auto bary = wasserstein_barycenter(clouds, s.lambdas, 0, cfg.barycenter);
    s.x = ExampleEmbedding::from_tokens(bary.barycenter.support);
    s.y = mix_labels(labeled, s.parents, s.lambdas);
  });
  return out;
}

std::vector<SyntheticExample> augment_l2_kde(std::span<const TrainingExample> labeled,
                                             const AugmentationConfig& cfg) {
  check_labeled(labeled, cfg);
  if (cfg.factor == 0) return {};
  const std::size_t total = cfg.factor * labeled.size();
  const std::size_t c = labeled.front().y.num_classes();
  const auto d = static_cast<Eigen::Index>(labeled.front().x.dim());
  const auto members = members_by_class(labeled, c);
  const auto class_w = class_sampling_weights(labeled, cfg.pairing, 1);

  std::vector<Eigen::VectorXd> bandwidth(c);
  for (std::size_t k = 0; k < c; ++k) {
    const auto& idx = members[k];
    if (idx.empty()) continue;
    const double n = static_cast<double>(idx.size());
    const double scott = std::pow(n, -1.0 / (static_cast<double>(d) + 4.0));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (auto i : idx) mean += labeled[i].x.pooled;
    mean /= n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (auto i : idx) var += (labeled[i].x.pooled - mean).cwiseAbs2();
    if (idx.size() > 1) var /= (n - 1.0);
    Eigen::VectorXd h = scott * var.cwiseSqrt();
    if ((h.array() < kKdeBandwidthFloor).any()) {
      std::ostringstream msg;
      msg << "class " << k << " (" << idx.size()
          << " member(s)) has degenerate spread; KDE bandwidth floored at " << kKdeBandwidthFloor;
      warn(msg.str());
      h = h.cwiseMax(kKdeBandwidthFloor);
    }
    bandwidth[k] = std::move(h);
  }

  Rng rng(derive_seed(cfg.seed, {0x4de0}));
  std::vector<SyntheticExample> out(total);
  for (auto& s : out) {
    const std::size_t cls = rng.categorical(class_w);
    const auto& idx = members[cls];
    const std::size_t parent = idx[rng.below(idx.size())];
    Eigen::VectorXd point = labeled[parent].x.pooled;
    for (Eigen::Index j = 0; j < d; ++j) point(j) += bandwidth[cls](j) * rng.normal();
    s.x = ExampleEmbedding::from_tokens(point.transpose());
    s.y = SoftLabel::one_hot(cls, c);
    s.parents = {parent};
    s.lambdas = {1.0};
  }
  return out;
}

}  // namespace allwas
