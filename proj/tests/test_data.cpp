#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

#include "allwas/data.hpp"
#include "allwas/error.hpp"
#include "allwas/log.hpp"
#include "allwas/random.hpp"
#include "oracles.hpp"

using namespace allwas;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& body) {
  const auto p = fs::temp_directory_path() / ("allwas_data_" + name);
  std::ofstream(p) << body;
  return p;
}

struct CaptureWarnings {
  std::vector<std::string> seen;
  WarningSink previous;
  CaptureWarnings() {
    previous = set_warning_sink([this](const std::string& m) { seen.push_back(m); });
  }
  ~CaptureWarnings() { set_warning_sink(previous); }
};

double mean_pairwise(const Corpus& c, const std::vector<std::size_t>& ids) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      total += (c.examples[ids[i]].embedding.pooled - c.examples[ids[j]].embedding.pooled).norm();
      ++pairs;
    }
  }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

std::vector<std::size_t> minority_of(const Corpus& c, const std::vector<std::size_t>& ids) {
  std::vector<std::size_t> out;
  for (auto id : ids) {
    if (c.examples[id].label == c.target_class) out.push_back(id);
  }
  return out;
}

}  // namespace

TEST_CASE("ingest errors") {
  SUBCASE("empty file") {
    const auto p = write_file("empty.jsonl", "\n\n");
    try {
      ingest_jsonl(p);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("no examples") != std::string::npos);
    }
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(ingest_jsonl("/nonexistent/x.jsonl"), DataError); }
  SUBCASE("malformed lines are all reported") {
    const auto p = write_file("bad.jsonl",
                              "{\"id\":1,\"embedding\":[1,2],\"label\":\"a\"}\n"
                              "not json\n"
                              "{\"id\":2,\"label\":\"b\"}\n");
    try {
      ingest_jsonl(p);
      FAIL("expected an error");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("line 3") != std::string::npos);
    }
  }
  SUBCASE("duplicate ids") {
    const auto p = write_file("dup.jsonl",
                              "{\"id\":1,\"embedding\":[1,2],\"label\":\"a\"}\n"
                              "{\"id\":1,\"embedding\":[1,3],\"label\":\"b\"}\n");
    CHECK_THROWS_AS(ingest_jsonl(p), DataError);
  }
  SUBCASE("mixed dimensions") {
    const auto p = write_file("dims.jsonl",
                              "{\"id\":1,\"embedding\":[1,2],\"label\":\"a\"}\n"
                              "{\"id\":2,\"embedding\":[1,3,4],\"label\":\"b\"}\n");
    CHECK_THROWS_AS(ingest_jsonl(p), DataError);
  }
  SUBCASE("unknown label") {
    const auto p = write_file("lab.jsonl",
                              "{\"id\":1,\"embedding\":[1,2],\"label\":\"a\"}\n"
                              "{\"id\":2,\"embedding\":[1,3],\"label\":\"c\"}\n");
    IngestOptions o;
    o.class_names = {"a", "b"};
    CHECK_THROWS_AS(ingest_jsonl(p, o), DataError);
  }
  SUBCASE("text without a featurizer") {
    const auto p = write_file("text.jsonl",
                              "{\"id\":1,\"text\":\"hello\",\"label\":\"a\"}\n"
                              "{\"id\":2,\"text\":\"bye\",\"label\":\"b\"}\n");
    CHECK_THROWS_AS(ingest_jsonl(p), ConfigError);
    IngestOptions o;
    o.featurizer = FeaturizerConfig{8, 1};
    const auto c = ingest_jsonl(p, o);
    CHECK(c.dim() == 8);
  }
}

TEST_CASE("embedding wins over text") {
  const auto p = write_file("both.jsonl",
                            "{\"id\":\"x\",\"text\":\"some words\",\"embedding\":[[1,2],[3,4]],\"label\":\"pos\"}\n"
                            "{\"id\":\"y\",\"embedding\":[5,6],\"label\":\"neg\"}\n"
                            "{\"id\":\"z\",\"embedding\":[7,8],\"label\":\"neg\"}\n");
  CaptureWarnings w;
  IngestOptions o;
  o.featurizer = FeaturizerConfig{16, 0};
  const auto c = ingest_jsonl(p, o);
  REQUIRE(c.size() == 3);
  CHECK(c.dim() == 2);
  CHECK(c.examples[0].embedding.token_count() == 2);
  CHECK(c.examples[0].embedding.pooled(1) == 3.0);
  CHECK(c.examples[0].text == "some words");
  REQUIRE(w.seen.size() == 1);
  CHECK(w.seen[0].find("'x'") != std::string::npos);
  CHECK(c.class_names == std::vector<std::string>{"neg", "pos"});
  CHECK(c.class_names[c.target_class] == "pos");
}

TEST_CASE("export round trip") {
  SyntheticSpec spec;
  spec.n = 60;
  spec.d = 5;
  spec.seed = 4;
  const auto c = make_synthetic(spec);
  const auto p = fs::temp_directory_path() / "allwas_data_roundtrip.jsonl";
  export_jsonl(c, p);
  IngestOptions o;
  o.target_class = c.class_names[c.target_class];
  const auto back = ingest_jsonl(p, o);
  REQUIRE(back.size() == c.size());
  CHECK(back.class_names == c.class_names);
  CHECK(back.target_class == c.target_class);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(back.examples[i].id == c.examples[i].id);
    CHECK(back.examples[i].label == c.examples[i].label);
    CHECK(back.examples[i].embedding.tokens == c.examples[i].embedding.tokens);
  }
  const auto p2 = fs::temp_directory_path() / "allwas_data_roundtrip2.jsonl";
  export_jsonl(back, p2);
  std::ifstream a(p), b(p2);
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  fs::remove(p);
  fs::remove(p2);
}

TEST_CASE("featurize text") {
  CHECK(tokenize("Hello, World! it's 42") == std::vector<std::string>{"hello", "world", "it", "s", "42"});
  const auto a = featurize_text("The cat sat", 16, 3);
  const auto b = featurize_text("The cat sat", 16, 3);
  CHECK(a.tokens == b.tokens);
  CHECK(a.token_count() == 3);
  CHECK(featurize_text("The cat sat", 16, 4).tokens != a.tokens);
  const auto good = featurize_text("good GOOD", 8, 0);
  CHECK(good.tokens.row(0) == good.tokens.row(1));
  {
    CaptureWarnings w;
    const auto empty = featurize_text("  ...  ", 8, 0);
    CHECK(empty.token_count() == 1);
    CHECK(empty.tokens.isZero());
    CHECK(w.seen.size() == 1);
  }
  CHECK_THROWS_AS(featurize_text("x", 0, 0), ConfigError);

  // Distinct tokens give distinct vectors over a 10k word list.
  std::set<std::vector<double>> rows;
  for (int i = 0; i < 10000; ++i) {
    const auto e = featurize_text("w" + std::to_string(i), 4, 0);
    rows.insert({e.tokens.data(), e.tokens.data() + 4});
  }
  CHECK(rows.size() == 10000);

  // Coordinates look standard normal.
  const auto many = featurize_text([] {
    std::string s;
    for (int i = 0; i < 2000; ++i) s += "t" + std::to_string(i) + " ";
    return s;
  }(), 8, 0);
  const double mean = many.tokens.mean();
  const double var = (many.tokens.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("fnv-1a token hash is the documented one") {
  // Reference values of 64-bit FNV-1a.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("synthetic corpus") {
  SyntheticSpec spec;
  spec.priors = {0.9, 0.1};
  spec.n = 2000;
  spec.d = 8;
  spec.seed = 12;
  const auto c = make_synthetic(spec);
  REQUIRE(c.size() == 2000);
  const auto counts = c.class_counts();
  CHECK(c.target_class == 1);
  CHECK(std::abs(static_cast<double>(counts[1]) - 200.0) <= 3 * oracle::binomial_sd(2000, 0.1));
  for (const auto& ex : c.examples) {
    CHECK(ex.embedding.token_count() >= 3);
    CHECK(ex.embedding.token_count() <= 12);
  }
  std::set<std::string> ids;
  for (const auto& ex : c.examples) ids.insert(ex.id);
  CHECK(ids.size() == c.size());

  const auto again = make_synthetic(spec);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(again.examples[i].embedding.tokens == c.examples[i].embedding.tokens);

  SyntheticSpec bad = spec;
  bad.priors = {1.0};
  CHECK_THROWS_AS(make_synthetic(bad), ConfigError);
  bad = spec;
  bad.noise = -1.0;
  CHECK_THROWS_AS(make_synthetic(bad), ConfigError);
}

TEST_CASE("noise-free synthetic classes separate by nearest centroid") {
  SyntheticSpec spec;
  spec.priors = {0.5, 0.3, 0.2};
  spec.n = 600;
  spec.d = 6;
  spec.noise = 0.0;
  spec.seed = 3;
  const auto c = make_synthetic(spec);
  std::vector<Eigen::VectorXd> centroid(3, Eigen::VectorXd::Zero(6));
  const auto counts = c.class_counts();
  for (const auto& ex : c.examples) centroid[ex.label] += ex.embedding.pooled;
  for (std::size_t k = 0; k < 3; ++k) centroid[k] /= static_cast<double>(counts[k]);
  std::size_t correct = 0;
  for (const auto& ex : c.examples) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k) {
      if ((ex.embedding.pooled - centroid[k]).norm() < (ex.embedding.pooled - centroid[best]).norm()) best = k;
    }
    correct += best == ex.label;
  }
  CHECK(correct == c.size());
}

TEST_CASE("seed construction") {
  SUBCASE("balanced on a balanced corpus") {
    SyntheticSpec spec;
    spec.priors = {0.5, 0.5};
    spec.n = 1000;
    spec.d = 4;
    const auto c = make_synthetic(spec);
    const auto counts = c.class_counts();
    SeedSpec s;
    s.size = 100;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      s.seed = seed;
      const auto split = build_seed(c, s);
      std::size_t ones = 0;
      for (auto id : split.labeled) ones += c.examples[id].label == 1;
      const double expect = 100.0 * static_cast<double>(counts[1]) / 1000.0;
      CHECK(std::abs(static_cast<double>(ones) - expect) <= 3 * oracle::hypergeometric_sd(1000, static_cast<double>(counts[1]), 100));
    }
  }
  SyntheticSpec spec;
  spec.n = 1500;
  spec.d = 8;
  spec.noise = 1.0;
  spec.seed = 5;
  const auto c = make_synthetic(spec);
  SUBCASE("partition and sizes") {
    for (auto setting : {SeedSetting::kBalanced, SeedSetting::kImbalanced, SeedSetting::kImbalancedPractical}) {
      SeedSpec s;
      s.setting = setting;
      s.size = 25;
      s.seed = 9;
      const auto split = build_seed(c, s);
      CHECK(split.labeled.size() == 25);
      CHECK(split.labeled.size() + split.unlabeled.size() == c.size());
      std::vector<std::size_t> all = split.labeled;
      all.insert(all.end(), split.unlabeled.begin(), split.unlabeled.end());
      std::sort(all.begin(), all.end());
      for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
      CHECK(build_seed(c, s).labeled == split.labeled);
    }
  }
  SUBCASE("imbalanced seeds draw the requested minority share") {
    SeedSpec s;
    s.setting = SeedSetting::kImbalanced;
    s.size = 20;
    s.minority_fraction = 0.5;
    const auto split = build_seed(c, s);
    CHECK(minority_of(c, split.labeled).size() == 10);
  }
  SUBCASE("candidate subsets") {
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < c.size(); i += 2) cand.push_back(i);
    SeedSpec s;
    s.setting = SeedSetting::kImbalanced;
    const auto split = build_seed(c, s, cand);
    CHECK(split.labeled.size() + split.unlabeled.size() == cand.size());
    for (auto id : split.labeled) CHECK(id % 2 == 0);
  }
  SUBCASE("practical seeds are clumped") {
    double practical_total = 0.0, imbalanced_total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SeedSpec s;
      s.size = 25;
      s.seed = seed;
      s.setting = SeedSetting::kImbalanced;
      const double imb = mean_pairwise(c, minority_of(c, build_seed(c, s).labeled));
      s.setting = SeedSetting::kImbalancedPractical;
      const double prac = mean_pairwise(c, minority_of(c, build_seed(c, s).labeled));
      CHECK(prac < imb);
      practical_total += prac;
      imbalanced_total += imb;
    }
    CHECK(practical_total < imbalanced_total);
  }
  SUBCASE("errors") {
    SeedSpec s;
    s.size = c.size() + 1;
    CHECK_THROWS_AS(build_seed(c, s), DataError);
    s.size = 1;
    s.setting = SeedSetting::kImbalanced;
    CHECK_THROWS_AS(build_seed(c, s), ConfigError);
    CHECK_THROWS_AS(parse_seed_setting("skewed"), ConfigError);
    CHECK(parse_seed_setting("imbalanced-practical") == SeedSetting::kImbalancedPractical);
    CHECK(to_string(SeedSetting::kBalanced) == "balanced");
  }
}

TEST_CASE("train/validation split") {
  SyntheticSpec spec;
  spec.n = 101;
  spec.d = 3;
  const auto c = make_synthetic(spec);
  const auto s = split_train_validation(c, 0.2, 7);
  CHECK(s.validation.size() == 20);
  CHECK(s.train.size() == 81);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.validation.begin(), s.validation.end());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  CHECK(split_train_validation(c, 0.2, 7).validation == s.validation);
  CHECK(split_train_validation(c, 0.2, 8).validation != s.validation);
  CHECK_THROWS_AS(split_train_validation(c, 1.0, 7), ConfigError);
}
