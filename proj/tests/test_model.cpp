#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "allwas/error.hpp"
#include "allwas/model.hpp"
#include "oracles.hpp"

using namespace allwas;

namespace {

ExampleEmbedding random_example(std::mt19937_64& gen, Eigen::Index d, Eigen::Index tokens = 3,
                                double shift = 0.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd t(tokens, d);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = nd(gen) + shift;
  return ExampleEmbedding::from_tokens(t);
}

std::vector<TrainingExample> blobs(std::mt19937_64& gen, std::size_t n, Eigen::Index d, double sep) {
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % 2;
    out.push_back({random_example(gen, d, 4, cls ? sep : -sep), SoftLabel::one_hot(cls, 2)});
  }
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("allwas_model_" + name);
}

}  // namespace

TEST_CASE("example embedding and soft label") {
  Eigen::MatrixXd t(2, 3);
  t << 1, 2, 3, 3, 4, 5;
  const auto e = ExampleEmbedding::from_tokens(t);
  CHECK(e.pooled(0) == 2.0);
  CHECK(e.pooled(2) == 4.0);
  CHECK(e.token_count() == 2);
  CHECK_THROWS_AS(ExampleEmbedding::from_tokens(Eigen::MatrixXd(0, 3)), DataError);

  const auto y = SoftLabel::one_hot(1, 3);
  CHECK(y.argmax() == 1);
  CHECK_NOTHROW(y.validate());
  CHECK_THROWS_AS(SoftLabel::one_hot(3, 3), DataError);
  SoftLabel bad{Eigen::Vector2d(0.7, 0.4)};
  CHECK_THROWS_AS(bad.validate(), DataError);
  SoftLabel neg{Eigen::Vector2d(1.5, -0.5)};
  CHECK_THROWS_AS(neg.validate(), DataError);
}

TEST_CASE("head construction errors") {
  ModelConfig cfg;
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(ClassifierHead(cfg, 4, 2), ConfigError);
  cfg.dropout = 0.1;
  CHECK_THROWS_AS(ClassifierHead(cfg, 4, 1), ConfigError);
  CHECK_THROWS_AS(ClassifierHead(cfg, 0, 2), ConfigError);
}

TEST_CASE("training errors") {
  ModelConfig cfg;
  std::vector<TrainingExample> empty;
  CHECK_THROWS_AS(train(cfg, empty), DataError);
  std::mt19937_64 gen(3);
  std::vector<TrainingExample> mixed{{random_example(gen, 4), SoftLabel::one_hot(0, 2)},
                                     {random_example(gen, 5), SoftLabel::one_hot(1, 2)}};
  CHECK_THROWS_AS(train(cfg, mixed), DataError);
  std::vector<TrainingExample> classes{{random_example(gen, 4), SoftLabel::one_hot(0, 2)},
                                       {random_example(gen, 4), SoftLabel::one_hot(1, 3)}};
  CHECK_THROWS_AS(train(cfg, classes), DataError);
}

TEST_CASE("separable blobs are fit") {
  std::mt19937_64 gen(11);
  const auto data = blobs(gen, 200, 8, 1.0);
  std::vector<Eigen::VectorXd> xs;
  std::vector<int> ys;
  for (const auto& ex : data) {
    xs.push_back(ex.x.pooled);
    ys.push_back(static_cast<int>(ex.y.argmax()));
  }
  REQUIRE(oracle::linearly_separable(xs, ys));

  ModelConfig cfg;
  cfg.seed = 5;
  const auto head = train(cfg, data);
  CHECK(head.trained());
  std::size_t correct = 0;
  for (const auto& ex : data) correct += head.predict_proba(ex.x).argmax() == ex.y.argmax();
  CHECK(static_cast<double>(correct) / data.size() >= 0.95);
}

TEST_CASE("single example is memorized") {
  std::mt19937_64 gen(2);
  std::vector<TrainingExample> data{{random_example(gen, 6), SoftLabel::one_hot(1, 3)}};
  ModelConfig cfg;
  cfg.epochs = 50;
  const auto head = train(cfg, data);
  CHECK(head.predict_proba(data[0].x).probs(1) >= 0.9);
}

TEST_CASE("presets run without divergence") {
  std::mt19937_64 gen(4);
  const auto data = blobs(gen, 120, 8, 0.5);
  for (const auto& cfg : {ModelConfig{}, ModelConfig::bert_finetune_preset()}) {
    const auto head = train(cfg, data);
    CHECK(head.hidden_weights().allFinite());
    CHECK(head.output_weights().allFinite());
    for (double loss : head.epoch_losses()) CHECK(std::isfinite(loss));
  }
  const auto preset = ModelConfig::bert_finetune_preset();
  CHECK(preset.batch_size == 50);
  CHECK(preset.learning_rate == 5e-5);
  CHECK(preset.epochs == 5);
}

TEST_CASE("training is bit-reproducible") {
  std::mt19937_64 gen(8);
  const auto data = blobs(gen, 90, 5, 0.7);
  ModelConfig cfg;
  cfg.seed = 17;
  const auto a = train(cfg, data);
  const auto b = train(cfg, data);
  CHECK(a.hidden_weights() == b.hidden_weights());
  CHECK(a.output_weights() == b.output_weights());
  CHECK(a.epoch_losses() == b.epoch_losses());
  cfg.seed = 18;
  const auto c = train(cfg, data);
  CHECK(a.output_weights() != c.output_weights());
}

TEST_CASE("training loss mostly decreases") {
  std::size_t transitions = 0, violations = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    std::mt19937_64 gen(100 + s);
    const auto data = blobs(gen, 150, 6, 0.4);
    ModelConfig cfg;
    cfg.epochs = 20;
    cfg.seed = s;
    const auto head = train(cfg, data);
    const auto& losses = head.epoch_losses();
    REQUIRE(losses.size() == 20);
    for (std::size_t e = 1; e < losses.size(); ++e) {
      ++transitions;
      violations += losses[e] > losses[e - 1];
    }
  }
  CHECK(static_cast<double>(violations) <= 0.05 * static_cast<double>(transitions));
}

TEST_CASE("predictions") {
  std::mt19937_64 gen(21);
  const auto data = blobs(gen, 60, 5, 0.5);
  ModelConfig cfg;
  cfg.dropout = 0.3;
  const auto head = train(cfg, data);

  SUBCASE("normalized and deterministic") {
    for (int i = 0; i < 100; ++i) {
      const auto x = random_example(gen, 5, 1 + i % 4);
      const auto p = head.predict_proba(x);
      CHECK(std::abs(p.probs.sum() - 1.0) < 1e-9);
      CHECK((p.probs.array() >= 0.0).all());
      CHECK(head.predict_proba(x).probs == p.probs);
    }
  }
  SUBCASE("dropout masks depend on the seed") {
    const auto x = random_example(gen, 5);
    const auto a = head.predict_proba(x, true, 1);
    CHECK(head.predict_proba(x, true, 1).probs == a.probs);
    CHECK(head.predict_proba(x, true, 2).probs != a.probs);
    CHECK(std::abs(a.probs.sum() - 1.0) < 1e-9);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(head.predict_proba(random_example(gen, 4)), DataError);
  }
}

TEST_CASE("last-layer gradients match finite differences") {
  std::size_t heads = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 gen(500 + s);
    const Eigen::Index d = 3 + static_cast<Eigen::Index>(s % 4);
    const std::size_t classes = 2 + s % 3;
    std::vector<TrainingExample> data;
    for (std::size_t i = 0; i < 12; ++i) data.push_back({random_example(gen, d), SoftLabel::one_hot(i % classes, classes)});
    ModelConfig cfg;
    cfg.hidden = 4 + s % 5;
    cfg.epochs = 2;
    cfg.seed = s;
    const auto head = train(cfg, data);
    const auto x = random_example(gen, d);
    const auto g = head.last_layer_gradients(x);
    const Eigen::VectorXd h = head.last_layer_input(x);
    REQUIRE(g.support.rows() == static_cast<Eigen::Index>(classes));
    REQUIRE(g.support.cols() == h.size());
    CHECK(g.weights == head.predict_proba(x).probs);
    for (std::size_t c = 0; c < classes; ++c) {
      Eigen::VectorXd fd(h.size());
      for (Eigen::Index i = 0; i < h.size(); ++i) {
        fd(i) = oracle::central_difference([&](const Eigen::VectorXd& v) { return head.class_loss_at(v, c); }, h, i);
      }
      const Eigen::VectorXd analytic = g.support.row(static_cast<Eigen::Index>(c)).transpose();
      CHECK((analytic - fd).norm() <= 1e-4 * std::max(fd.norm(), 1e-8));
    }
    ++heads;
  }
  CHECK(heads == 50);
}

TEST_CASE("confident prediction has a zero gradient for its class") {
  std::mt19937_64 gen(31);
  const auto data = blobs(gen, 200, 4, 3.0);
  ModelConfig cfg;
  cfg.epochs = 30;
  const auto head = train(cfg, data);
  const auto x = random_example(gen, 4, 4, 6.0);
  const auto g = head.last_layer_gradients(x);
  Eigen::Index k;
  g.weights.maxCoeff(&k);
  REQUIRE(g.weights(k) > 0.999);
  CHECK(g.support.row(k).norm() < 1e-2 * g.support.row(1 - k).norm());
}

TEST_CASE("untrained head refuses gradients") {
  ClassifierHead head(ModelConfig{}, 3, 2);
  std::mt19937_64 gen(1);
  CHECK_THROWS_AS(head.last_layer_gradients(random_example(gen, 3)), RuntimeFailure);
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 gen(41);
  const auto data = blobs(gen, 40, 5, 0.5);
  const auto head = train(ModelConfig{}, data);
  const auto path = temp_path("ckpt.bin");
  head.save(path);
  {
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "ALWS");
  }
  const auto back = ClassifierHead::load(path);
  CHECK(back.hidden_weights() == head.hidden_weights());
  CHECK(back.output_weights() == head.output_weights());
  const auto x = random_example(gen, 5);
  CHECK(back.predict_proba(x).probs == head.predict_proba(x).probs);
  CHECK(back.trained());

  const auto bad = temp_path("bad.bin");
  {
    std::ofstream out(bad, std::ios::binary);
    out << "NOPE0000";
  }
  CHECK_THROWS_AS(ClassifierHead::load(bad), DataError);
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream out(bad, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(ClassifierHead::load(bad), DataError);
  CHECK_THROWS_AS(ClassifierHead::load(temp_path("missing.bin")), DataError);
  std::filesystem::remove(path);
  std::filesystem::remove(bad);
}
