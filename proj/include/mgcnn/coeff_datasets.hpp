/// @file coeff_datasets.hpp
/// @brief Coefficient-distribution generators: white noise, multi-level
///        random data, grayscale-image corpora and weighted mixtures.
///
/// Every generator emits tensors with entries in [0,1] (the random source the
/// coefficient mapping consumes), is deterministic under its seed, and can be
/// combined inside a mixture sampled per tensor.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mgcnn/rng.hpp"
#include "mgcnn/tensor.hpp"

namespace mgcnn {

struct DistributionSpec {
  enum class Kind { kWhiteNoise, kMlData, kImageCorpus, kMixture };

  Kind kind = Kind::kWhiteNoise;
  // mldata parameters (Appendix-style multi-level generator).
  int mldata_levels = 3;
  int mldata_init_size = 5;
  // image corpus parameters.
  std::string image_dir;
  // mixture components with probabilities summing to 1.
  std::vector<std::pair<DistributionSpec, double>> components;

  void validate() const;

  static DistributionSpec white_noise();
  static DistributionSpec mldata(int levels = 3, int init_size = 5);
  static DistributionSpec image_corpus(std::string dir);
  static DistributionSpec mixture(std::vector<std::pair<DistributionSpec, double>> comps);

  /// Parses "white_noise", "mldata", "mldata:<levels>", "image:<dir>" or a
  /// comma-separated mixture "comp@weight,comp@weight".
  static DistributionSpec parse(const std::string& text);
  std::string to_string() const;
};

/// Directory of 8-bit binary PGM (P5) images, indexed lazily in filename
/// order so seeded sampling is reproducible. Corrupt files are skipped with
/// a warning and counted.
class ImageCorpus {
 public:
  static ImageCorpus open(const std::string& directory);

  std::size_t size() const { return files_.size(); }
  int skipped() const { return skipped_; }
  const std::string& path(std::size_t index) const { return files_[index]; }

  /// First channel of the image, min-max normalized to [0,1]
  /// (constant images map to 0.5).
  Tensor<double> load(std::size_t index) const;

 private:
  std::vector<std::string> files_;
  int skipped_ = 0;
};

/// Corpora keyed by directory, pre-opened so sampling never touches the
/// filesystem index again (and stays thread-safe once built).
using CorpusCache = std::map<std::string, ImageCorpus>;

/// Opens every image corpus referenced by the spec (recursing into mixtures).
CorpusCache open_corpora(const DistributionSpec& spec);

/// Multi-level random data: start from init_size white noise, repeatedly
/// double the size and add 2^-i scaled noise, then resize to goal_size.
/// Output is the raw (unbounded) field; min-max normalization happens in
/// sample_random_tensor.
template <typename T>
Tensor<T> gen_data_multi_level(int goal_size, int levels, int init_size, Rng& rng);

template <typename T>
Tensor<T> gen_data_multi_level(int goal_size, int levels, int init_size, std::uint64_t seed);

/// Draws one random tensor in [0,1] of shape 1 x goal_size x goal_size.
/// Image corpora are taken from `cache` when provided, else opened on demand.
template <typename T>
Tensor<T> sample_random_tensor(const DistributionSpec& spec, int goal_size, Rng& rng,
                               const CorpusCache* cache = nullptr);

template <typename T>
Tensor<T> sample_random_tensor(const DistributionSpec& spec, int goal_size, std::uint64_t seed,
                               const CorpusCache* cache = nullptr);

/// Writes a single-channel tensor as an 8-bit binary PGM, min-max scaled.
void write_pgm(const std::string& path, const Tensor<double>& t);

}  // namespace mgcnn
