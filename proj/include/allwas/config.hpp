#pragma once

// Experiment configuration and its JSON form.
//
// Top-level keys (all optional except where noted):
//   dataset              label used in cell names and plots ("synthetic")
//   corpus               {"synthetic": {priors, clusters_per_class, n, d, noise,
//                         center_scale, min_tokens, max_tokens, seed}}
//                        or {"jsonl": path, "featurize": {"dim", "seed"},
//                         "classes": [...], "target_class": name, "split_seed": n}
//   seed                 {"setting": balanced|imbalanced|imbalanced-practical,
//                         "size", "minority_fraction", "radius_percentile"}
//   strategy             random|lc|dropout|egl|kcenter|allwas
//   budget, k, repeats
//   augmentation         {"mode": off|wasserstein|l2-kde, "factor", "group_size",
//                         "lambda": uniform|dirichlet, "alpha",
//                         "pairing": within-class|any-pair}
//   model                {"preset": desk|bert-finetune, "hidden", "dropout",
//                         "epochs", "batch_size", "learning_rate"}
//   ot                   {"p", "eps_scale", "epsilon", "max_iter", "tol",
//                         "subsample", "s0_cost"}
//   dropout_passes, validation_fraction, metric (target|macro),
//   output_dir, master_seed, record_wall_time, dump_distances
// Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "allwas/barysample.hpp"
#include "allwas/data.hpp"
#include "allwas/model.hpp"
#include "allwas/strategies.hpp"

namespace allwas {

enum class AugmentationMode { kOff, kWasserstein, kL2Kde };

std::string_view to_string(AugmentationMode mode);

struct CorpusSource {
  std::optional<std::filesystem::path> jsonl;
  std::optional<FeaturizerConfig> featurizer;
  std::vector<std::string> class_names;
  std::optional<std::string> target_class;
  std::uint64_t split_seed = 0;
  std::optional<SyntheticSpec> synthetic;
};

struct ExperimentConfig {
  std::string dataset = "synthetic";
  CorpusSource corpus;
  SeedSpec seed;
  std::string strategy = "allwas";
  std::size_t budget = 150;
  std::size_t k = 25;
  std::size_t repeats = 5;
  AugmentationMode augmentation = AugmentationMode::kOff;
  AugmentationConfig augment;
  ModelConfig model;
  StrategyOptions strategy_options;
  double validation_fraction = 0.2;
  std::string metric = "target";
  std::filesystem::path output_dir = "runs";
  std::uint64_t master_seed = 0;
  /// Wall time in the row CSV; off keeps the CSV byte-reproducible (timings
  /// always go to the sidecar timing file).
  bool record_wall_time = false;
  std::optional<std::filesystem::path> dump_distances;

  /// Throws ConfigError on violated invariants (k <= budget, repeats >= 1, ...).
  void validate() const;
  /// strategy plus an augmentation suffix, e.g. "random+wasserstein-f20-g2".
  std::string method_label() const;
  /// dataset-setting-method with filesystem-safe characters.
  std::string cell_name() const;
};

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON (sorted keys, every field explicit).
std::string config_to_json(const ExperimentConfig& cfg);
/// FNV-1a-64 of the canonical JSON without output-only keys, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

SyntheticSpec parse_synthetic_spec(std::string_view json_text);

}  // namespace allwas
