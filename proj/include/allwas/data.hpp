#pragma once

// Corpus ingestion (JSONL), hashed text featurization, synthetic Gaussian
// corpora, and labeling-seed construction for the three seed regimes.
//
// JSONL schema, one object per line:
//   id         string or integer, unique
//   text       string, optional
//   embedding  array of token rows ([[...], ...]) or a single row ([...]), optional
//   label      class name (string); integers are taken as their decimal name
// At least one of text / embedding must be present. When both are, the
// embedding is used and a warning is emitted.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "allwas/model.hpp"

namespace allwas {

struct CorpusExample {
  std::string id;
  std::optional<std::string> text;
  ExampleEmbedding embedding;
  std::size_t label = 0;
};

struct Corpus {
  std::vector<CorpusExample> examples;
  std::vector<std::string> class_names;
  std::size_t target_class = 0;
  std::uint64_t split_seed = 0;

  std::size_t size() const { return examples.size(); }
  std::size_t dim() const { return examples.empty() ? 0 : examples.front().embedding.dim(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::vector<double> class_priors() const;
  std::vector<std::size_t> class_counts() const;
};

struct FeaturizerConfig {
  std::size_t dim = 64;
  std::uint64_t seed = 0;
};

struct IngestOptions {
  /// Required when any line carries text without an embedding.
  std::optional<FeaturizerConfig> featurizer;
  /// When non-empty, labels outside this list are errors; otherwise classes
  /// are the sorted distinct labels.
  std::vector<std::string> class_names;
  /// Defaults to the least frequent class (lowest index on ties).
  std::optional<std::string> target_class;
  std::uint64_t split_seed = 0;
};

Corpus ingest_jsonl(const std::filesystem::path& path, const IngestOptions& options = {});
/// Same schema as ingest_jsonl reads; embeddings are written with
/// round-trip precision.
void export_jsonl(const Corpus& corpus, const std::filesystem::path& path);

/// Lowercased runs of ASCII letters and digits.
std::vector<std::string> tokenize(std::string_view text);

/// Each token maps to a standard-normal d-vector drawn from a generator
/// seeded with FNV-1a-64(token) XOR seed. Empty text yields one zero row.
ExampleEmbedding featurize_text(std::string_view text, std::size_t d, std::uint64_t seed);

struct SyntheticSpec {
  /// Class priors; the least likely class is the target class.
  std::vector<double> priors{0.9, 0.1};
  std::size_t clusters_per_class = 1;
  std::size_t n = 2000;
  std::size_t d = 32;
  /// Per-coordinate standard deviation of example and token jitter.
  double noise = 1.0;
  /// Per-coordinate standard deviation of cluster centers.
  double center_scale = 1.0;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 12;
  std::uint64_t seed = 0;
};

/// Gaussian cluster mixture: each example picks a class by prior, a cluster
/// of that class uniformly, a latent point center + noise * N(0, I), and
/// 3..12 tokens latent + noise * N(0, I).
Corpus make_synthetic(const SyntheticSpec& spec);

enum class SeedSetting { kBalanced, kImbalanced, kImbalancedPractical };

std::string_view to_string(SeedSetting s);
SeedSetting parse_seed_setting(std::string_view name);

struct SeedSpec {
  SeedSetting setting = SeedSetting::kBalanced;
  std::size_t size = 25;
  std::uint64_t seed = 0;
  /// Share of the seed drawn from the target class in the imbalanced modes.
  double minority_fraction = 0.5;
  /// Neighbor-ball radius percentile for the practical mode.
  double radius_percentile = 10.0;
};

struct SeedSplit {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
};

/// Partitions `candidates` (default: every corpus index) into an initial
/// labeled seed and the remaining pool. Both lists are sorted ascending.
SeedSplit build_seed(const Corpus& corpus, const SeedSpec& spec,
                     std::span<const std::size_t> candidates = {});

struct TrainValidationSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded shuffle of all indices; the first round(fraction * n) become
/// validation. Both lists sorted ascending.
TrainValidationSplit split_train_validation(const Corpus& corpus, double validation_fraction,
                                            std::uint64_t seed);

}  // namespace allwas
