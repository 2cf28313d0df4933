#pragma once

// The active-learning loop: seed -> [augment] -> train -> evaluate -> acquire,
// repeated until the budget, for every repeat of a config. Rows are logged
// per repeat so an interrupted run resumes from its last complete iteration.
//
// Files written under cfg.output_dir for cell name C:
//   C.csv           setting,strategy,seed,iteration,labeled,f1,seconds
//   C.meta.json     schema_version, config_hash, cell, dataset, method, config
//   C.timing.csv    seed,iteration,seconds (wall time, not reproducible)
//   C.r<N>.log      append-only per-repeat row log used for resume

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "allwas/config.hpp"
#include "allwas/data.hpp"

namespace allwas {

inline constexpr int kRunSchemaVersion = 1;

struct IterationRow {
  std::string setting;
  std::string strategy;
  /// Repeat index; every stage seed derives from (master seed, repeat).
  std::size_t seed = 0;
  std::size_t iteration = 0;
  std::size_t labeled = 0;
  double f1 = 0.0;
  double seconds = 0.0;
};

struct RunRecord {
  int schema_version = kRunSchemaVersion;
  std::string cell;
  std::string dataset;
  std::string method;
  std::string config_hash;
  /// Ordered by (seed, iteration).
  std::vector<IterationRow> rows;
  /// Wall time of each row, same order.
  std::vector<double> wall_seconds;
};

struct RunOptions {
  /// Continue from existing row logs with a matching config hash; when false
  /// any previous logs of the cell are discarded.
  bool resume = true;
  bool write_files = true;
};

/// Synthetic corpus or ingested JSONL, as the config describes.
Corpus load_corpus(const ExperimentConfig& cfg);

RunRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

enum class SweepAxis { kAugmentationFactor, kBarycenterGroupSize, kStrategy };

SweepAxis parse_sweep_axis(std::string_view name);
std::string_view to_string(SweepAxis axis);

/// One config per value; seeds are shared so cells pair by repeat.
std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base, SweepAxis axis,
                                            std::span<const std::string> values);

/// Runs every sweep cell (in parallel across cells).
std::vector<RunRecord> run_sweep(const ExperimentConfig& base, SweepAxis axis,
                                 std::span<const std::string> values, const RunOptions& options = {});

std::string rows_to_csv(std::span<const IterationRow> rows);
std::vector<IterationRow> parse_rows_csv(std::string_view text);

}  // namespace allwas
