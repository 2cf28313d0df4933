#pragma once

// Facility-location coverage over a distance matrix:
//   L(S) = sum_i min(s0_cost, min_{j in S} D[i][j])
//   F(S) = L({s0}) - L({s0} u S)
// F is monotone submodular, so greedy appends reach (1 - 1/e) of the optimum.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "allwas/gradspace.hpp"

namespace allwas {

struct SelectionState {
  /// Warm-start elements first, then greedy picks in order.
  std::vector<std::size_t> selected;
  /// Greedy picks only (excluding the warm start).
  std::vector<std::size_t> appended;
  /// min over {s0} u selected of D[i][.], per ground element.
  std::vector<double> coverage;
  double value = 0.0;
  double s0_cost = 0.0;
  /// F after the warm start and after each append.
  std::vector<double> value_trace;
};

/// max entry * 1.01 (at least 1e-12), so every element strictly improves its
/// own coverage.
double default_s0_cost(const DistanceMatrix& matrix);

double objective_L(const DistanceMatrix& matrix, std::span<const std::size_t> selected,
                   double s0_cost);

/// F(S) = |V| s0_cost - L(S).
double objective_F(const DistanceMatrix& matrix, std::span<const std::size_t> selected,
                   double s0_cost);

/// Lazy greedy; ties go to the lowest index. Output is identical to naive_greedy_select.
SelectionState greedy_select(const DistanceMatrix& matrix, std::size_t k,
                             std::span<const std::size_t> warm_start, double s0_cost);

/// Re-evaluates every candidate at every step.
SelectionState naive_greedy_select(const DistanceMatrix& matrix, std::size_t k,
                                   std::span<const std::size_t> warm_start, double s0_cost);

/// Exact maximizer of F over k-subsets by enumeration (lexicographically first
/// on ties). Throws when C(|V|, k) exceeds 2e6.
std::pair<std::vector<std::size_t>, double> brute_force_opt(const DistanceMatrix& matrix,
                                                            std::size_t k, double s0_cost);

}  // namespace allwas
