#pragma once

// Seeded randomness with output that is identical across standard libraries:
// std::mt19937_64 has a specified sequence, while the distributions and
// std::shuffle do not, so bounded draws and shuffles are implemented here.

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace crs {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t uniform(std::size_t n);
  /// Uniform double in [0, 1) with 53 bits of precision.
  double unit();
  bool bernoulli(double p) { return unit() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// FNV-1a over the text followed by a splitmix64 finalizer.
std::uint64_t hash_text(std::string_view text);

/// Mixes a list of seed components into one seed; order-sensitive.
class SeedBuilder {
 public:
  explicit SeedBuilder(std::uint64_t base) : state_(mix(base)) {}
  SeedBuilder& add(std::uint64_t value);
  SeedBuilder& add(std::string_view text) { return add(hash_text(text)); }
  std::uint64_t value() const { return state_; }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t state_;
};

}  // namespace crs
