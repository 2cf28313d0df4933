#include "allwas/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "allwas/error.hpp"
#include "allwas/log.hpp"

namespace allwas {
namespace {

struct Confusion {
  double tp = 0, fp = 0, fn = 0;
};

Confusion confusion_for(std::span<const std::size_t> preds, std::span<const std::size_t> truth,
                        std::size_t cls) {
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == cls;
    const bool t = truth[i] == cls;
    if (p && t) c.tp += 1;
    if (p && !t) c.fp += 1;
    if (!p && t) c.fn += 1;
  }
  return c;
}

double f1_from(const Confusion& c) {
  const double precision = c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 0.0;
  const double recall = c.tp + c.fn > 0 ? c.tp / (c.tp + c.fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw DataError("prediction and truth lengths differ");
}

long doubled(double rank) { return std::lround(rank * 2.0); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

double f1_target(std::span<const std::size_t> preds, std::span<const std::size_t> truth,
                 std::size_t target) {
  check_lengths(preds.size(), truth.size());
  return f1_from(confusion_for(preds, truth, target));
}

double f1_macro(std::span<const std::size_t> preds, std::span<const std::size_t> truth,
                std::size_t num_classes) {
  check_lengths(preds.size(), truth.size());
  if (num_classes == 0) return 0.0;
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) total += f1_from(confusion_for(preds, truth, c));
  return total / static_cast<double>(num_classes);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::vector<double> signed_rank_null_distribution(std::span<const double> ranks) {
  long total = 0;
  for (double r : ranks) total += doubled(r);
  std::vector<double> dist(static_cast<std::size_t>(total) + 1, 0.0);
  dist[0] = 1.0;
  long reach = 0;
  for (double r : ranks) {
    const long step = doubled(r);
    reach += step;
    for (long v = reach; v >= 0; --v) {
      const double with = v >= step ? dist[static_cast<std::size_t>(v - step)] : 0.0;
      dist[static_cast<std::size_t>(v)] = 0.5 * (dist[static_cast<std::size_t>(v)] + with);
    }
  }
  return dist;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    WilcoxonMode mode) {
  if (x.size() != y.size()) throw DataError("wilcoxon_signed_rank needs paired samples of equal length");
  std::vector<double> diffs;
  WilcoxonResult out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d == 0.0) {
      ++out.zeros_dropped;
    } else {
      diffs.push_back(d);
    }
  }
  out.n_used = diffs.size();
  if (diffs.empty()) {
    warn("wilcoxon_signed_rank: all paired differences are zero; p = 1");
    out.p = 1.0;
    return out;
  }
  if (diffs.size() < 5) {
    throw DataError("wilcoxon_signed_rank needs at least 5 nonzero paired differences");
  }

  std::vector<double> magnitudes(diffs.size());
  std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](double d) { return std::abs(d); });
  const auto ranks = average_ranks(magnitudes);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0.0) w_plus += ranks[i];
  }
  out.statistic = w_plus;

  const bool exact = mode == WilcoxonMode::kExact || (mode == WilcoxonMode::kAuto && diffs.size() <= 20);
  out.exact = exact;
  if (exact) {
    const auto dist = signed_rank_null_distribution(ranks);
    const long w2 = doubled(w_plus);
    double lower = 0.0, upper = 0.0;
    for (std::size_t v = 0; v < dist.size(); ++v) {
      if (static_cast<long>(v) <= w2) lower += dist[v];
      if (static_cast<long>(v) >= w2) upper += dist[v];
    }
    out.p = std::min(1.0, 2.0 * std::min(lower, upper));
    return out;
  }

  const double n = static_cast<double>(diffs.size());
  const double mean = n * (n + 1.0) / 4.0;
  double variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    variance -= (t * t * t - t) / 48.0;
    i = j;
  }
  const double deviation = std::abs(w_plus - mean) - 0.5;
  if (deviation <= 0.0 || variance <= 0.0) {
    out.p = 1.0;
  } else {
    out.p = std::min(1.0, 2.0 * normal_sf(deviation / std::sqrt(variance)));
  }
  return out;
}

double bonferroni(double p, std::size_t comparisons) {
  return std::min(1.0, static_cast<double>(comparisons) * p);
}

}  // namespace allwas
