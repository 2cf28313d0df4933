#include "allwas/coreset.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

#include "allwas/error.hpp"

namespace allwas {
namespace {

void check_ids(const DistanceMatrix& matrix, std::span<const std::size_t> ids) {
  for (auto id : ids) {
    if (id >= matrix.size()) {
      std::ostringstream msg;
      msg << "element index " << id << " out of range for a ground set of " << matrix.size();
      throw DataError(msg.str());
    }
  }
}

void check_s0(double s0_cost) {
  if (!(s0_cost > 0.0)) throw ConfigError("s0_cost must be positive");
}

std::vector<double> initial_coverage(const DistanceMatrix& matrix, double s0_cost) {
  return std::vector<double>(matrix.size(), s0_cost);
}

void cover(const DistanceMatrix& matrix, std::size_t e, std::vector<double>& coverage) {
  for (std::size_t i = 0; i < coverage.size(); ++i) coverage[i] = std::min(coverage[i], matrix(i, e));
}

double gain_of(const DistanceMatrix& matrix, std::size_t e, const std::vector<double>& coverage) {
  double g = 0.0;
  for (std::size_t i = 0; i < coverage.size(); ++i) {
    const double d = coverage[i] - matrix(i, e);
    if (d > 0.0) g += d;
  }
  return g;
}

double value_of(const std::vector<double>& coverage, double s0_cost) {
  double v = 0.0;
  for (double c : coverage) v += s0_cost - c;
  return v;
}

SelectionState start_state(const DistanceMatrix& matrix, std::size_t k,
                           std::span<const std::size_t> warm_start, double s0_cost,
                           std::vector<char>& taken) {
  check_s0(s0_cost);
  check_ids(matrix, warm_start);
  if (k < 1) throw ConfigError("greedy_select needs k >= 1");
  taken.assign(matrix.size(), 0);
  SelectionState state;
  state.s0_cost = s0_cost;
  state.coverage = initial_coverage(matrix, s0_cost);
  for (auto id : warm_start) {
    if (taken[id]) continue;
    taken[id] = 1;
    state.selected.push_back(id);
    cover(matrix, id, state.coverage);
  }
  if (state.selected.size() + k > matrix.size()) {
    std::ostringstream msg;
    msg << "cannot select " << k << " elements: only " << matrix.size() - state.selected.size()
        << " remain outside the warm start";
    throw DataError(msg.str());
  }
  state.value = value_of(state.coverage, s0_cost);
  state.value_trace.push_back(state.value);
  return state;
}

void append(const DistanceMatrix& matrix, SelectionState& state, std::size_t e,
            std::vector<char>& taken) {
  taken[e] = 1;
  state.selected.push_back(e);
  state.appended.push_back(e);
  cover(matrix, e, state.coverage);
  state.value = value_of(state.coverage, state.s0_cost);
  state.value_trace.push_back(state.value);
}

}  // namespace

double default_s0_cost(const DistanceMatrix& matrix) {
  const double top = matrix.size() == 0 ? 0.0 : matrix.values.maxCoeff();
  return std::max(top * 1.01, 1e-12);
}

double objective_L(const DistanceMatrix& matrix, std::span<const std::size_t> selected,
                   double s0_cost) {
  check_s0(s0_cost);
  check_ids(matrix, selected);
  auto coverage = initial_coverage(matrix, s0_cost);
  for (auto e : selected) cover(matrix, e, coverage);
  double total = 0.0;
  for (double c : coverage) total += c;
  return total;
}

double objective_F(const DistanceMatrix& matrix, std::span<const std::size_t> selected,
                   double s0_cost) {
  return static_cast<double>(matrix.size()) * s0_cost - objective_L(matrix, selected, s0_cost);
}

SelectionState naive_greedy_select(const DistanceMatrix& matrix, std::size_t k,
                                   std::span<const std::size_t> warm_start, double s0_cost) {
  std::vector<char> taken;
  SelectionState state = start_state(matrix, k, warm_start, s0_cost, taken);
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = matrix.size();
    double best_gain = -1.0;
    for (std::size_t e = 0; e < matrix.size(); ++e) {
      if (taken[e]) continue;
      const double g = gain_of(matrix, e, state.coverage);
      if (g > best_gain) {
        best_gain = g;
        best = e;
      }
    }
    append(matrix, state, best, taken);
  }
  return state;
}

SelectionState greedy_select(const DistanceMatrix& matrix, std::size_t k,
                             std::span<const std::size_t> warm_start, double s0_cost) {
  std::vector<char> taken;
  SelectionState state = start_state(matrix, k, warm_start, s0_cost, taken);

  struct Entry {
    double bound;
    std::size_t id;
    std::size_t fresh_at;
  };
  // Highest bound first; equal bounds pop the lower id first.
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.id > b.id;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  for (std::size_t e = 0; e < matrix.size(); ++e) {
    if (!taken[e]) heap.push({gain_of(matrix, e, state.coverage), e, 0});
  }

  for (std::size_t step = 0; step < k; ++step) {
    for (;;) {
      Entry top = heap.top();
      heap.pop();
      if (top.fresh_at == step) {
        append(matrix, state, top.id, taken);
        break;
      }
      top.bound = gain_of(matrix, top.id, state.coverage);
      top.fresh_at = step;
      heap.push(top);
    }
  }
  return state;
}

std::pair<std::vector<std::size_t>, double> brute_force_opt(const DistanceMatrix& matrix,
                                                            std::size_t k, double s0_cost) {
  check_s0(s0_cost);
  const std::size_t n = matrix.size();
  if (k > n) throw DataError("brute_force_opt: k exceeds the ground set");
  double combos = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    combos = combos * static_cast<double>(n - i) / static_cast<double>(i + 1);
  }
  if (combos > 2e6) throw DataError("brute_force_opt: instance too large to enumerate");

  std::vector<std::size_t> current(k);
  for (std::size_t i = 0; i < k; ++i) current[i] = i;
  std::vector<std::size_t> best = current;
  double best_value = objective_F(matrix, current, s0_cost);
  if (k == 0) return {best, best_value};
  for (;;) {
    // Next k-combination in lexicographic order.
    std::size_t i = k;
    while (i > 0 && current[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++current[i - 1];
    for (std::size_t j = i; j < k; ++j) current[j] = current[j - 1] + 1;
    const double v = objective_F(matrix, current, s0_cost);
    if (v > best_value) {
      best_value = v;
      best = current;
    }
  }
  return {best, best_value};
}

}  // namespace allwas
