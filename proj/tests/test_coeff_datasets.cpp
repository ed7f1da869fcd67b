#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>

#include "mgcnn/coeff_datasets.hpp"
#include "mgcnn/rng.hpp"

using namespace mgcnn;
namespace fs = std::filesystem;

namespace {

fs::path make_corpus_dir() {
  fs::path dir = fs::temp_directory_path() / "mgcnn_corpus_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto write_pgm_file = [&](const std::string& name, int w, int h,
                            const std::function<unsigned char(int, int)>& pixel) {
    std::ofstream out(dir / name, std::ios::binary);
    out << "P5\n" << w << " " << h << "\n255\n";
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out.put(static_cast<char>(pixel(i, j)));
  };
  write_pgm_file("a_gradient.pgm", 28, 28,
                 [](int i, int j) { return static_cast<unsigned char>((i * 28 + j) % 256); });
  write_pgm_file("b_constant.pgm", 8, 8, [](int, int) { return (unsigned char)137; });
  write_pgm_file("c_small.pgm", 4, 6,
                 [](int i, int j) { return static_cast<unsigned char>(40 * i + j); });
  // One corrupt file: truncated raster.
  std::ofstream bad(dir / "d_corrupt.pgm", std::ios::binary);
  bad << "P5\n10 10\n255\n";
  bad.put('x');
  return dir;
}

}  // namespace

TEST_CASE("white noise samples live in [0,1] with mean near one half") {
  Rng rng(81);
  Tensor<double> t = sample_random_tensor<double>(DistributionSpec::white_noise(), 255, rng);
  double sum = 0.0;
  for (double v : t.flat()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    sum += v;
  }
  const double mean = sum / static_cast<double>(t.size());
  CHECK(mean > 0.48);
  CHECK(mean < 0.52);
}

TEST_CASE("gen_data_multi_level reproduces the doubling loop exactly") {
  const std::uint64_t seed = 4242;
  // Independent transcription of the generator loop: sizes 10/20/40 from
  // init 5, noise ratios 1/2, 1/4, 1/8, then the final resize.
  Rng rng(seed);
  Tensor<double> data(1, 5, 5);
  fill_normal(data, rng);
  const int sizes[3] = {10, 20, 40};
  const double ratios[3] = {0.5, 0.25, 0.125};
  for (int i = 0; i < 3; ++i) {
    data = bilinear_resize(data, sizes[i], sizes[i]);
    Tensor<double> noise(1, sizes[i], sizes[i]);
    fill_normal(noise, rng);
    data = axpy(noise, data, ratios[i]);
  }

  // goal == final doubled size: the last resize must be an exact identity.
  Tensor<double> got40 = gen_data_multi_level<double>(40, 3, 5, seed);
  CHECK(norm2(sub(got40, data)) == 0.0);

  Tensor<double> got33 = gen_data_multi_level<double>(33, 3, 5, seed);
  CHECK(norm2(sub(got33, bilinear_resize(data, 33, 33))) == 0.0);

  // levels = 0 is a pure resize of the initial noise.
  Rng rng0(seed);
  Tensor<double> init(1, 5, 5);
  fill_normal(init, rng0);
  Tensor<double> got0 = gen_data_multi_level<double>(17, 0, 5, seed);
  CHECK(norm2(sub(got0, bilinear_resize(init, 17, 17))) == 0.0);
}

TEST_CASE("mldata samples are min-max normalized into [0,1]") {
  Rng rng(82);
  Tensor<double> t = sample_random_tensor<double>(DistributionSpec::mldata(), 63, rng);
  double lo = 1e9, hi = -1e9;
  for (double v : t.flat()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(1.0));
}

TEST_CASE("image corpus: indexing, skipping, determinism, resize") {
  fs::path dir = make_corpus_dir();
  ImageCorpus corpus = ImageCorpus::open(dir.string());
  CHECK(corpus.size() == 3);
  CHECK(corpus.skipped() == 1);

  // Constant image degenerates to 0.5 under the min-max rule.
  Tensor<double> constant = corpus.load(1);
  for (double v : constant.flat()) CHECK(v == doctest::Approx(0.5));

  DistributionSpec spec = DistributionSpec::image_corpus(dir.string());
  CorpusCache cache = open_corpora(spec);
  Tensor<double> a = sample_random_tensor<double>(spec, 63, 1234, &cache);
  Tensor<double> b = sample_random_tensor<double>(spec, 63, 1234, &cache);
  CHECK(a.height() == 63);
  CHECK(a.width() == 63);
  CHECK(norm2(sub(a, b)) == 0.0);
  for (double v : a.flat()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  fs::path empty = fs::temp_directory_path() / "mgcnn_empty_corpus";
  fs::remove_all(empty);
  fs::create_directories(empty);
  CHECK_THROWS_AS(ImageCorpus::open(empty.string()), std::runtime_error);
}

TEST_CASE("one-component mixture reproduces the component under its sub-seed") {
  DistributionSpec mix = DistributionSpec::mixture({{DistributionSpec::white_noise(), 1.0}});
  const std::uint64_t seed = 99;
  Tensor<double> got = sample_random_tensor<double>(mix, 31, seed);

  Rng outer(seed);
  outer.uniform01();  // the component-choice draw
  Tensor<double> want = sample_random_tensor<double>(DistributionSpec::white_noise(), 31,
                                                     outer.derive_seed());
  CHECK(norm2(sub(got, want)) == 0.0);

  CHECK_THROWS_AS(DistributionSpec::mixture({{DistributionSpec::white_noise(), 0.6}}),
                  std::invalid_argument);
}

TEST_CASE("distribution spec parsing round-trips") {
  DistributionSpec w = DistributionSpec::parse("white_noise");
  CHECK(w.kind == DistributionSpec::Kind::kWhiteNoise);

  DistributionSpec m = DistributionSpec::parse("mldata:5");
  CHECK(m.kind == DistributionSpec::Kind::kMlData);
  CHECK(m.mldata_levels == 5);

  DistributionSpec mix = DistributionSpec::parse("white_noise@0.5,mldata@0.5");
  CHECK(mix.kind == DistributionSpec::Kind::kMixture);
  CHECK(mix.components.size() == 2);

  CHECK_THROWS_AS(DistributionSpec::parse("bogus"), std::invalid_argument);
}

TEST_CASE("write_pgm emits a readable normalized image") {
  Rng rng(83);
  Tensor<double> t(1, 9, 9);
  fill_normal(t, rng);
  fs::path path = fs::temp_directory_path() / "mgcnn_writer_test.pgm";
  write_pgm(path.string(), t);

  fs::path dir = fs::temp_directory_path() / "mgcnn_writer_dir";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fs::copy_file(path, dir / "x.pgm");
  ImageCorpus corpus = ImageCorpus::open(dir.string());
  CHECK(corpus.size() == 1);
  Tensor<double> back = corpus.load(0);
  CHECK(back.height() == 9);
}
