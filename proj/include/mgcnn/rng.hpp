/// @file rng.hpp
/// @brief Seeded random streams with implementation-pinned distributions.
///
/// std::*_distribution output is not specified across standard libraries, so
/// uniform and normal draws are generated here from raw mt19937_64 words.
/// Identical seeds give identical streams on every platform, which the
/// determinism contracts (training, benchmarks, data generators) rely on.

#pragma once

#include <cstdint>
#include <random>

#include "mgcnn/tensor.hpp"

namespace mgcnn {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; draws are consumed in pairs.
  double normal();

  /// Fresh seed for an independent child stream.
  std::uint64_t derive_seed() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

template <typename T>
void fill_uniform01(Tensor<T>& t, Rng& rng) {
  for (T& x : t.flat()) x = static_cast<T>(rng.uniform01());
}

template <typename T>
void fill_normal(Tensor<T>& t, Rng& rng) {
  for (T& x : t.flat()) x = static_cast<T>(rng.normal());
}

}  // namespace mgcnn
