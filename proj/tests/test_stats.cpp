#include "doctest.h"

#include <random>

#include "allwas/error.hpp"
#include "allwas/log.hpp"
#include "allwas/stats.hpp"
#include "oracles.hpp"

using namespace allwas;

TEST_CASE("f1 of the target class") {
  const std::vector<std::size_t> truth{1, 1, 1, 0, 0, 0};
  CHECK(f1_target(truth, truth, 1) == 1.0);
  const std::vector<std::size_t> majority(6, 0);
  CHECK(f1_target(majority, truth, 1) == 0.0);
  // TP=2 FP=1 FN=1.
  const std::vector<std::size_t> preds{1, 1, 0, 1, 0, 0};
  CHECK(f1_target(preds, truth, 1) == doctest::Approx(2.0 / 3.0));
  const std::vector<std::size_t> shorter{1};
  CHECK_THROWS_AS(f1_target(shorter, truth, 1), DataError);
}

TEST_CASE("f1 is invariant to example order") {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<std::size_t> cls(0, 2);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::size_t> p(40), y(40);
    for (auto& v : p) v = cls(gen);
    for (auto& v : y) v = cls(gen);
    const double f = f1_target(p, y, 2);
    const double m = f1_macro(p, y, 3);
    std::vector<std::size_t> order(40);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), gen);
    std::vector<std::size_t> p2, y2;
    for (auto i : order) {
      p2.push_back(p[i]);
      y2.push_back(y[i]);
    }
    CHECK(f1_target(p2, y2, 2) == doctest::Approx(f));
    CHECK(f1_macro(p2, y2, 3) == doctest::Approx(m));
  }
}

TEST_CASE("macro f1") {
  const std::vector<std::size_t> truth{0, 0, 1, 1, 2, 2};
  const std::vector<std::size_t> preds{0, 1, 1, 1, 2, 0};
  // Per class: 0 -> P 1/2 R 1/2; 1 -> P 2/3 R 1; 2 -> P 1 R 1/2.
  const double want = (0.5 + 0.8 + 2.0 / 3.0) / 3.0;
  CHECK(f1_macro(preds, truth, 3) == doctest::Approx(want));
}

TEST_CASE("signed-rank basics") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  std::vector<std::string> seen;
  auto prev = set_warning_sink([&](const std::string& m) { seen.push_back(m); });
  const auto same = wilcoxon_signed_rank(x, x);
  set_warning_sink(prev);
  CHECK(same.p == 1.0);
  CHECK(same.zeros_dropped == 6);
  CHECK(!seen.empty());

  const std::vector<double> y{0, 1, 2, 3, 4, 5};
  const auto r = wilcoxon_signed_rank(x, y, WilcoxonMode::kExact);
  CHECK(r.exact);
  CHECK(r.n_used == 6);
  CHECK(r.statistic == 21.0);
  CHECK(r.p == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
  CHECK(r.p == doctest::Approx(oracle::sign_flip_pvalue(x, y)));
  CHECK(wilcoxon_signed_rank(y, x, WilcoxonMode::kExact).p == r.p);

  const std::vector<double> few{1, 2, 3};
  const std::vector<double> few_y{0, 0, 0};
  CHECK_THROWS_AS(wilcoxon_signed_rank(few, few_y), DataError);
  CHECK_THROWS_AS(wilcoxon_signed_rank(x, few), DataError);
}

TEST_CASE("exact p matches sign enumeration") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<int> size(5, 14);
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(size(gen));
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Rounded values produce ties and zero differences.
      x[i] = std::round(nd(gen) * 3.0) / 3.0 + 0.2;
      y[i] = t % 2 ? std::round(nd(gen) * 3.0) / 3.0 : nd(gen);
    }
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < n; ++i) nonzero += x[i] != y[i];
    if (nonzero < 5) continue;
    const auto r = wilcoxon_signed_rank(x, y, WilcoxonMode::kExact);
    CHECK(r.p == doctest::Approx(oracle::sign_flip_pvalue(x, y)).epsilon(1e-9));
    CHECK(r.p >= 0.0);
    CHECK(r.p <= 1.0);
    CHECK(r.n_used == nonzero);
    CHECK(r.zeros_dropped == n - nonzero);
  }
}

TEST_CASE("null distribution matches enumeration") {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> val(0, 6);
  for (std::size_t n = 1; n <= 12; ++n) {
    for (int t = 0; t < 5; ++t) {
      std::vector<double> d(n);
      for (auto& v : d) v = static_cast<double>(val(gen) + 1);
      const auto ranks = average_ranks(d);
      CHECK(ranks == oracle::abs_ranks(d));
      const auto got = signed_rank_null_distribution(ranks);
      const auto want = oracle::enumerated_null(ranks);
      REQUIRE(got.size() >= want.size());
      for (std::size_t v = 0; v < got.size(); ++v) {
        const double w = v < want.size() ? want[v] : 0.0;
        CHECK(got[v] == doctest::Approx(w).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("exact and normal modes agree at n = 20") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(20), y(20);
    const double shift = 0.1 * (t % 6);
    for (std::size_t i = 0; i < 20; ++i) {
      x[i] = nd(gen) + shift;
      y[i] = nd(gen);
    }
    const auto e = wilcoxon_signed_rank(x, y, WilcoxonMode::kExact);
    const auto a = wilcoxon_signed_rank(x, y, WilcoxonMode::kNormalApprox);
    CHECK(!a.exact);
    CHECK(std::abs(e.p - a.p) <= 0.02);
    CHECK(wilcoxon_signed_rank(x, y).exact);
  }
  std::vector<double> x(30), y(30, 0.0);
  for (auto& v : x) v = nd(gen);
  CHECK_FALSE(wilcoxon_signed_rank(x, y).exact);
}

TEST_CASE("bonferroni") {
  CHECK(bonferroni(0.01, 3) == doctest::Approx(0.03));
  CHECK(bonferroni(0.4, 3) == 1.0);
  CHECK(bonferroni(0.2, 1) == 0.2);
}
