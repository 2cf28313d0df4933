#include "allwas/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "allwas/error.hpp"
#include "allwas/random.hpp"

namespace allwas {
namespace {

constexpr char kMagic[4] = {'A', 'L', 'W', 'S'};

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

Eigen::VectorXd dropout_mask(std::size_t n, double rate, Rng& rng) {
  Eigen::VectorXd mask(static_cast<Eigen::Index>(n));
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

template <typename T>
void write_le(std::ofstream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw DataError("checkpoint truncated");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_le<double>(out, m(r, c));
  }
}

Eigen::MatrixXd read_matrix(std::ifstream& in, std::uint64_t rows, std::uint64_t cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_le<double>(in);
  }
  return m;
}

}  // namespace

ExampleEmbedding ExampleEmbedding::from_tokens(Eigen::MatrixXd tokens) {
  if (tokens.rows() < 1) throw DataError("example embedding needs at least one token");
  if (!tokens.allFinite()) throw DataError("example embedding has non-finite entries");
  ExampleEmbedding e;
  e.pooled = tokens.colwise().mean().transpose();
  e.tokens = std::move(tokens);
  return e;
}

SoftLabel SoftLabel::one_hot(std::size_t cls, std::size_t num_classes) {
  if (cls >= num_classes) throw DataError("class index out of range");
  SoftLabel s;
  s.probs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_classes));
  s.probs(static_cast<Eigen::Index>(cls)) = 1.0;
  return s;
}

std::size_t SoftLabel::argmax() const {
  Eigen::Index idx = 0;
  probs.maxCoeff(&idx);
  return static_cast<std::size_t>(idx);
}

void SoftLabel::validate() const {
  if (probs.size() == 0) throw DataError("soft label is empty");
  if (!probs.allFinite() || (probs.array() < 0.0).any()) {
    throw DataError("soft label entries must be finite and nonnegative");
  }
  if (std::abs(probs.sum() - 1.0) > 1e-9) throw DataError("soft label does not sum to 1");
}

ModelConfig ModelConfig::bert_finetune_preset() {
  ModelConfig c;
  c.epochs = 5;
  c.batch_size = 50;
  c.learning_rate = 5e-5;
  return c;
}

ClassifierHead::ClassifierHead(const ModelConfig& config, std::size_t input_dim,
                               std::size_t num_classes)
    : config_(config) {
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
  if (config.hidden == 0 || input_dim == 0 || num_classes < 2) {
    throw ConfigError("classifier head needs hidden >= 1, d >= 1 and at least two classes");
  }
  Rng rng(derive_seed(config.seed, {0x1a17}));
  const auto h = static_cast<Eigen::Index>(config.hidden);
  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto c = static_cast<Eigen::Index>(num_classes);
  auto xavier = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
    }
    return m;
  };
  w1_ = xavier(h, d);
  b1_ = Eigen::VectorXd::Zero(h);
  w2_ = xavier(c, h);
  b2_ = Eigen::VectorXd::Zero(c);
}

void ClassifierHead::check_input(const ExampleEmbedding& x) const {
  if (w1_.size() == 0) throw RuntimeFailure("classifier head is not initialized");
  if (x.pooled.size() != w1_.cols()) {
    std::ostringstream msg;
    msg << "embedding dimension " << x.pooled.size() << " does not match head input dimension "
        << w1_.cols();
    throw DataError(msg.str());
  }
}

Eigen::VectorXd ClassifierHead::softmax_from_hidden(const Eigen::VectorXd& h) const {
  return stable_softmax(w2_ * h + b2_);
}

Eigen::VectorXd ClassifierHead::last_layer_input(const ExampleEmbedding& x) const {
  check_input(x);
  return (w1_ * x.pooled + b1_).array().tanh().matrix();
}

SoftLabel ClassifierHead::predict_proba(const ExampleEmbedding& x, bool dropout_active,
                                        std::uint64_t seed) const {
  Eigen::VectorXd h = last_layer_input(x);
  if (dropout_active && config_.dropout > 0.0) {
    Rng rng(derive_seed(seed, {0xd80f}));
    h = h.cwiseProduct(dropout_mask(static_cast<std::size_t>(h.size()), config_.dropout, rng));
  }
  SoftLabel out;
  out.probs = softmax_from_hidden(h);
  return out;
}

GradientMeasure ClassifierHead::last_layer_gradients(const ExampleEmbedding& x) const {
  if (!trained_) throw RuntimeFailure("last_layer_gradients requires a trained head");
  const Eigen::VectorXd h = last_layer_input(x);
  const Eigen::VectorXd p = softmax_from_hidden(h);
  const auto c = w2_.rows();
  // Row c of (P - I) W holds (p - e_c)^T W, i.e. g_c^T.
  Eigen::MatrixXd residual = p.transpose().replicate(c, 1);
  residual.diagonal().array() -= 1.0;
  Eigen::MatrixXd support = residual * w2_;
  return GradientMeasure(std::move(support), p);
}

double ClassifierHead::class_loss_at(const Eigen::VectorXd& last_layer_input,
                                     std::size_t cls) const {
  const Eigen::VectorXd logits = w2_ * last_layer_input + b2_;
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(static_cast<Eigen::Index>(cls));
}

ClassifierHead train(const ModelConfig& config, std::span<const TrainingExample> data) {
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  const std::size_t d = data.front().x.dim();
  const std::size_t c = data.front().y.num_classes();
  for (const auto& ex : data) {
    if (ex.x.dim() != d || static_cast<std::size_t>(ex.x.pooled.size()) != d) {
      throw DataError("training examples have inconsistent embedding dimensions");
    }
    if (ex.y.num_classes() != c) throw DataError("training examples have inconsistent class counts");
  }
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");

  ClassifierHead head(config, d, c);
  const std::size_t n = data.size();
  const auto di = static_cast<Eigen::Index>(d);
  const auto hi = static_cast<Eigen::Index>(config.hidden);
  const auto ci = static_cast<Eigen::Index>(c);

  // Adam state.
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  Eigen::MatrixXd m_w1 = Eigen::MatrixXd::Zero(hi, di), v_w1 = m_w1;
  Eigen::VectorXd m_b1 = Eigen::VectorXd::Zero(hi), v_b1 = m_b1;
  Eigen::MatrixXd m_w2 = Eigen::MatrixXd::Zero(ci, hi), v_w2 = m_w2;
  Eigen::VectorXd m_b2 = Eigen::VectorXd::Zero(ci), v_b2 = m_b2;
  std::size_t step = 0;

  Rng rng(derive_seed(config.seed, {0x7a11}));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double keep_scale = config.dropout > 0.0 ? 1.0 / (1.0 - config.dropout) : 1.0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const auto b = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd x(di, b), y(ci, b);
      for (Eigen::Index k = 0; k < b; ++k) {
        const auto& ex = data[order[start + static_cast<std::size_t>(k)]];
        x.col(k) = ex.x.pooled;
        y.col(k) = ex.y.probs;
      }
      Eigen::MatrixXd pre = head.w1_ * x;
      pre.colwise() += head.b1_;
      const Eigen::MatrixXd hidden = pre.array().tanh().matrix();
      Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(hi, b);
      if (config.dropout > 0.0) {
        for (Eigen::Index k = 0; k < b; ++k) {
          for (Eigen::Index j = 0; j < hi; ++j) {
            mask(j, k) = rng.uniform() < config.dropout ? 0.0 : keep_scale;
          }
        }
      }
      const Eigen::MatrixXd dropped = hidden.cwiseProduct(mask);
      Eigen::MatrixXd logits = head.w2_ * dropped;
      logits.colwise() += head.b2_;
      Eigen::MatrixXd probs(ci, b);
      for (Eigen::Index k = 0; k < b; ++k) {
        const double mx = logits.col(k).maxCoeff();
        const Eigen::ArrayXd e = (logits.col(k).array() - mx).exp();
        const double s = e.sum();
        probs.col(k) = (e / s).matrix();
      }

      const double inv_b = 1.0 / static_cast<double>(b);
      const Eigen::MatrixXd d_logits = (probs - y) * inv_b;
      const Eigen::MatrixXd g_w2 = d_logits * dropped.transpose();
      const Eigen::VectorXd g_b2 = d_logits.rowwise().sum();
      const Eigen::MatrixXd d_hidden = (head.w2_.transpose() * d_logits).cwiseProduct(mask);
      const Eigen::MatrixXd d_pre =
          d_hidden.array() * (1.0 - hidden.array().square());
      const Eigen::MatrixXd g_w1 = d_pre * x.transpose();
      const Eigen::VectorXd g_b1 = d_pre.rowwise().sum();

      ++step;
      const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      const double lr = config.learning_rate;
      auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + adam_eps);
      };
      adam(head.w1_, m_w1, v_w1, g_w1);
      adam(head.b1_, m_b1, v_b1, g_b1);
      adam(head.w2_, m_w2, v_w2, g_w2);
      adam(head.b2_, m_b2, v_b2, g_b2);
    }
    if (!head.w1_.allFinite() || !head.w2_.allFinite() || !head.b1_.allFinite() ||
        !head.b2_.allFinite()) {
      throw RuntimeFailure("training diverged: non-finite parameters");
    }
    // Full-data loss of the current parameters, dropout off.
    double epoch_loss = 0.0;
    for (const auto& ex : data) {
      const Eigen::VectorXd p = head.softmax_from_hidden(head.last_layer_input(ex.x));
      epoch_loss -= (ex.y.probs.array() * p.array().max(1e-300).log()).sum();
    }
    head.epoch_losses_.push_back(epoch_loss / static_cast<double>(n));
  }
  head.trained_ = true;
  return head;
}

void ClassifierHead::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, input_dim());
  write_le<std::uint64_t>(out, hidden_dim());
  write_le<std::uint64_t>(out, num_classes());
  write_le<double>(out, config_.dropout);
  write_le<std::uint8_t>(out, trained_ ? 1 : 0);
  write_matrix(out, w1_);
  write_matrix(out, b1_);
  write_matrix(out, w2_);
  write_matrix(out, b2_);
  if (!out) throw RuntimeFailure("failed writing checkpoint: " + path.string());
}

ClassifierHead ClassifierHead::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("not an ALWS checkpoint: " + path.string());
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto d = read_le<std::uint64_t>(in);
  const auto h = read_le<std::uint64_t>(in);
  const auto c = read_le<std::uint64_t>(in);
  if (d == 0 || h == 0 || c < 2 || d > (1u << 20) || h > (1u << 20) || c > (1u << 20)) {
    throw DataError("checkpoint has implausible dimensions");
  }
  ClassifierHead head;
  head.config_.hidden = h;
  head.config_.dropout = read_le<double>(in);
  head.trained_ = read_le<std::uint8_t>(in) != 0;
  head.w1_ = read_matrix(in, h, d);
  head.b1_ = read_matrix(in, h, 1);
  head.w2_ = read_matrix(in, c, h);
  head.b2_ = read_matrix(in, c, 1);
  return head;
}

}  // namespace allwas
