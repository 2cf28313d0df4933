#pragma once

// Reference computations the tests compare the library against. Each is
// written from first principles and shares no code with src/.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace oracle {

inline double pow_dist(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (x(i) - y(i)) * (x(i) - y(i));
  return std::pow(std::sqrt(s), p);
}

/// Double-loop ground cost between the rows of a and b.
inline Eigen::MatrixXd pairwise_cost(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double p) {
  Eigen::MatrixXd c(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      c(i, j) = pow_dist(a.row(i).transpose(), b.row(j).transpose(), p);
    }
  }
  return c;
}

/// Exact OT between uniform measures of equal size by trying every
/// bijection (n <= 8).
inline double permutation_ot(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / n;
}

/// Exact 1-D OT as the integral over t in (0,1) of |F^-1(t) - G^-1(t)|^p,
/// evaluated piecewise between the merged CDF breakpoints.
inline double quantile_ot_1d(std::vector<double> xa, std::vector<double> wa, std::vector<double> xb,
                             std::vector<double> wb, double p) {
  auto sort_pair = [](std::vector<double>& x, std::vector<double>& w) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return x[i] < x[j]; });
    std::vector<double> xs, ws;
    for (auto i : idx) {
      xs.push_back(x[i]);
      ws.push_back(w[i]);
    }
    x = xs;
    w = ws;
  };
  sort_pair(xa, wa);
  sort_pair(xb, wb);
  std::vector<double> cuts{0.0, 1.0};
  double acc = 0.0;
  for (double w : wa) cuts.push_back(acc += w);
  acc = 0.0;
  for (double w : wb) cuts.push_back(acc += w);
  std::sort(cuts.begin(), cuts.end());
  auto quantile = [](const std::vector<double>& x, const std::vector<double>& w, double t) {
    double c = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      c += w[i];
      if (t < c) return x[i];
    }
    return x.back();
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = std::min(cuts[i], 1.0), hi = std::min(cuts[i + 1], 1.0);
    if (hi - lo <= 0.0) continue;
    const double mid = 0.5 * (lo + hi);
    total += (hi - lo) * std::pow(std::abs(quantile(xa, wa, mid) - quantile(xb, wb, mid)), p);
  }
  return total;
}

/// sum_i min(s0, min_{j in S} D(i, j)).
inline double coverage_L(const Eigen::MatrixXd& d, const std::vector<std::size_t>& s, double s0) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    double m = s0;
    for (auto j : s) m = std::min(m, d(i, static_cast<Eigen::Index>(j)));
    total += m;
  }
  return total;
}

inline double coverage_F(const Eigen::MatrixXd& d, const std::vector<std::size_t>& s, double s0) {
  return static_cast<double>(d.rows()) * s0 - coverage_L(d, s, s0);
}

/// Best F over all k-subsets, enumerated by bitmask.
inline double best_F(const Eigen::MatrixXd& d, std::size_t k, double s0) {
  const auto n = static_cast<unsigned>(d.rows());
  double best = -1.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    std::vector<std::size_t> s;
    for (unsigned i = 0; i < n; ++i) {
      if (mask & (1u << i)) s.push_back(i);
    }
    best = std::max(best, coverage_F(d, s, s0));
  }
  return best;
}

/// Average 1-based ranks of |d|, computed by counting.
inline std::vector<double> abs_ranks(const std::vector<double>& d) {
  std::vector<double> r(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : d) {
      if (std::abs(v) < std::abs(d[i])) ++less;
      if (std::abs(v) == std::abs(d[i])) ++equal;
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

/// Two-sided exact signed-rank p by enumerating all 2^n sign flips of the
/// nonzero differences x - y.
inline double sign_flip_pvalue(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  }
  const auto r = abs_ranks(d);
  double observed = 0.0, total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    total += r[i];
    if (d[i] > 0) observed += r[i];
  }
  const double mean = total / 2.0;
  const double dev = std::abs(observed - mean);
  const std::uint64_t count = 1ull << d.size();
  std::uint64_t extreme = 0;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (mask & (1ull << i)) w += r[i];
    }
    if (std::abs(w - mean) >= dev - 1e-9) ++extreme;
  }
  return std::min(1.0, static_cast<double>(extreme) / static_cast<double>(count));
}

/// Full null distribution of W+ (doubled, so half-ranks are integral) by
/// enumeration; entry v = P(2 W+ = v).
inline std::vector<double> enumerated_null(const std::vector<double>& ranks) {
  double total = 0.0;
  for (double r : ranks) total += r;
  std::vector<double> dist(static_cast<std::size_t>(std::llround(2 * total)) + 1, 0.0);
  const std::uint64_t count = 1ull << ranks.size();
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      if (mask & (1ull << i)) w += ranks[i];
    }
    dist[static_cast<std::size_t>(std::llround(2 * w))] += 1.0 / static_cast<double>(count);
  }
  return dist;
}

/// Perceptron run to convergence; true when the labelled points are
/// linearly separable within `max_epochs`.
inline bool linearly_separable(const std::vector<Eigen::VectorXd>& x, const std::vector<int>& y,
                               int max_epochs = 1000) {
  const auto d = x.front().size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  for (int e = 0; e < max_epochs; ++e) {
    bool clean = true;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = y[i] ? 1.0 : -1.0;
      if (s * (w.dot(x[i]) + b) <= 0.0) {
        w += s * x[i];
        b += s;
        clean = false;
      }
    }
    if (clean) return true;
  }
  return false;
}

/// Minimal well-formedness check: balanced tags, quoted attributes, a
/// single root element, known entities only.
inline bool xml_well_formed(const std::string& s, std::string* root = nullptr, int* elements = nullptr) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  int roots = 0, count = 0;
  auto is_name = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':'; };
  while (i < s.size()) {
    if (s[i] == '&') {
      const auto semi = s.find(';', i);
      if (semi == std::string::npos) return false;
      const std::string ent = s.substr(i, semi - i + 1);
      if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") return false;
      i = semi + 1;
      continue;
    }
    if (s[i] != '<') {
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(s[i]))) return false;
      ++i;
      continue;
    }
    if (s.compare(i, 5, "<?xml") == 0) {
      const auto end = s.find("?>", i);
      if (end == std::string::npos || i != 0) return false;
      i = end + 2;
      continue;
    }
    const bool closing = i + 1 < s.size() && s[i + 1] == '/';
    std::size_t j = i + (closing ? 2 : 1);
    std::string name;
    while (j < s.size() && is_name(s[j])) name += s[j++];
    if (name.empty()) return false;
    if (closing) {
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j >= s.size() || s[j] != '>') return false;
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
      i = j + 1;
      continue;
    }
    // attributes
    bool self_close = false;
    while (true) {
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j >= s.size()) return false;
      if (s[j] == '>') break;
      if (s[j] == '/' && j + 1 < s.size() && s[j + 1] == '>') {
        self_close = true;
        ++j;
        break;
      }
      std::string attr;
      while (j < s.size() && is_name(s[j])) attr += s[j++];
      if (attr.empty() || j >= s.size() || s[j] != '=') return false;
      ++j;
      if (j >= s.size() || (s[j] != '"' && s[j] != '\'')) return false;
      const char q = s[j];
      const auto close = s.find(q, j + 1);
      if (close == std::string::npos) return false;
      const std::string value = s.substr(j + 1, close - j - 1);
      if (value.find('<') != std::string::npos) return false;
      j = close + 1;
    }
    if (stack.empty()) {
      ++roots;
      if (root) *root = name;
    }
    ++count;
    if (!self_close) stack.push_back(name);
    i = j + 1;
  }
  if (elements) *elements = count;
  return stack.empty() && roots == 1;
}

/// Central finite difference of f at x along coordinate i.
template <typename F>
double central_difference(F&& f, Eigen::VectorXd x, Eigen::Index i, double h = 1e-5) {
  const double x0 = x(i);
  x(i) = x0 + h;
  const double up = f(x);
  x(i) = x0 - h;
  const double down = f(x);
  return (up - down) / (2 * h);
}

inline double binomial_sd(double n, double p) { return std::sqrt(n * p * (1 - p)); }

inline double hypergeometric_sd(double population, double successes, double draws) {
  const double p = successes / population;
  return std::sqrt(draws * p * (1 - p) * (population - draws) / (population - 1));
}

}  // namespace oracle
