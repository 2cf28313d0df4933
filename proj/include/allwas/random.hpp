#pragma once

// Portable seeded randomness. std:: distributions are implementation-defined,
// so everything that must reproduce across toolchains draws through Rng.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace allwas {

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives a child seed from a parent seed and a list of integer tags
/// (repeat index, iteration, stage id, ...).
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();
  double gamma(double shape);
  std::vector<double> dirichlet(std::size_t k, double alpha);
  /// Index drawn with probability proportional to weights.
  std::size_t categorical(const std::vector<double>& weights);
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }
  /// k distinct values from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace allwas
