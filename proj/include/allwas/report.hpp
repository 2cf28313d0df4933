#pragma once

// Reading finished run directories back, paired significance tables and SVG
// learning curves.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "allwas/harness.hpp"
#include "allwas/stats.hpp"

namespace allwas {

struct CellData {
  std::string cell;
  std::string dataset;
  std::string setting;
  std::string method;
  std::vector<IterationRow> rows;

  /// "dataset/setting"; cells in one group are comparable.
  std::string group() const { return dataset + "/" + setting; }
};

/// Every <cell>.meta.json with its <cell>.csv, sorted by cell name.
std::vector<CellData> load_cells(const std::filesystem::path& dir);

CellData cell_from_record(const RunRecord& record);

struct Comparison {
  std::string group;
  std::string method_a;
  std::string method_b;
  /// Restricts pairing to rows with this labeled count; unset pairs every
  /// (seed, iteration) present in both cells.
  std::optional<std::size_t> labeled;
  std::size_t n_pairs = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  /// Unset when fewer than 5 nonzero paired differences remain.
  std::optional<WilcoxonResult> test;

  /// +1 when a's mean is higher, -1 when lower, 0 on a tie.
  int direction() const;
};

/// Paired comparison of two methods within a group. Throws DataError when
/// either method is missing from the group.
Comparison compare_methods(std::span<const CellData> cells, const std::string& group,
                           const std::string& method_a, const std::string& method_b,
                           std::optional<std::size_t> labeled = std::nullopt);

/// Every ordered pair of distinct methods per group; Bonferroni correction
/// over the unordered pairs of each group.
std::string significance_csv(std::span<const CellData> cells);

/// Mean line with a min-max band over seeds, one series per method.
std::string learning_curve_svg(std::span<const CellData> cells, const std::string& title);

/// significance.csv plus curves_<dataset>_<setting>.svg per group; returns
/// the paths written.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir);

}  // namespace allwas
