#pragma once

// Small classifier head over mean-pooled token embeddings:
// pooled -> tanh hidden layer (with dropout) -> linear -> softmax.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "allwas/gradspace.hpp"

namespace allwas {

struct ExampleEmbedding {
  /// One token embedding per row (n_i x d).
  Eigen::MatrixXd tokens;
  /// Row mean of `tokens`.
  Eigen::VectorXd pooled;

  static ExampleEmbedding from_tokens(Eigen::MatrixXd tokens);
  std::size_t dim() const { return static_cast<std::size_t>(tokens.cols()); }
  std::size_t token_count() const { return static_cast<std::size_t>(tokens.rows()); }
};

struct SoftLabel {
  Eigen::VectorXd probs;

  static SoftLabel one_hot(std::size_t cls, std::size_t num_classes);
  std::size_t num_classes() const { return static_cast<std::size_t>(probs.size()); }
  std::size_t argmax() const;
  /// Throws DataError unless entries are nonnegative and sum to 1 within 1e-9.
  void validate() const;
};

struct TrainingExample {
  ExampleEmbedding x;
  SoftLabel y;
};

struct ModelConfig {
  std::size_t hidden = 64;
  double dropout = 0.1;
  std::size_t epochs = 5;
  std::size_t batch_size = 50;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;

  /// The BERT fine-tuning hyperparameters (batch 50, lr 5e-5, five epochs).
  static ModelConfig bert_finetune_preset();
};

class ClassifierHead {
 public:
  ClassifierHead() = default;
  /// Randomly initialized (Xavier-uniform) head; untrained until fitted.
  ClassifierHead(const ModelConfig& config, std::size_t input_dim, std::size_t num_classes);

  const ModelConfig& config() const { return config_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(w1_.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w1_.rows()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(w2_.rows()); }
  bool trained() const { return trained_; }
  /// Mean training loss per epoch of the last fit.
  const std::vector<double>& epoch_losses() const { return epoch_losses_; }

  /// Softmax class distribution. With dropout_active the hidden units are
  /// masked by a Bernoulli draw seeded by `seed`.
  SoftLabel predict_proba(const ExampleEmbedding& x, bool dropout_active = false,
                          std::uint64_t seed = 0) const;

  /// Input to the output layer (post-tanh hidden activation, no dropout).
  Eigen::VectorXd last_layer_input(const ExampleEmbedding& x) const;

  /// Per-class gradients g_c = W^T (p - e_c) of the cross-entropy with
  /// hypothesized label c, taken w.r.t. the output layer's input, weighted by
  /// the predicted probabilities p.
  GradientMeasure last_layer_gradients(const ExampleEmbedding& x) const;

  /// Cross-entropy -log p_c as a function of the output-layer input.
  double class_loss_at(const Eigen::VectorXd& last_layer_input, std::size_t cls) const;

  /// Versioned little-endian checkpoint ("ALWS" magic).
  void save(const std::filesystem::path& path) const;
  static ClassifierHead load(const std::filesystem::path& path);

  const Eigen::MatrixXd& hidden_weights() const { return w1_; }
  const Eigen::MatrixXd& output_weights() const { return w2_; }

  friend ClassifierHead train(const ModelConfig& config, std::span<const TrainingExample> data);

 private:
  void check_input(const ExampleEmbedding& x) const;
  Eigen::VectorXd softmax_from_hidden(const Eigen::VectorXd& h) const;

  ModelConfig config_;
  Eigen::MatrixXd w1_;  // H x d
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;  // C x H
  Eigen::VectorXd b2_;
  bool trained_ = false;
  std::vector<double> epoch_losses_;
};

/// Fresh head trained from scratch with Adam on soft-label cross-entropy.
/// Deterministic given config.seed.
ClassifierHead train(const ModelConfig& config, std::span<const TrainingExample> data);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace allwas
