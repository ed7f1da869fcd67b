#include "mgcnn/coeff_datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace mgcnn {

namespace fs = std::filesystem;

void DistributionSpec::validate() const {
  switch (kind) {
    case Kind::kWhiteNoise:
      return;
    case Kind::kMlData:
      if (mldata_init_size < 2) throw std::invalid_argument("mldata: init_size must be >= 2");
      if (mldata_levels < 0) throw std::invalid_argument("mldata: levels must be >= 0");
      return;
    case Kind::kImageCorpus:
      if (image_dir.empty()) throw std::invalid_argument("image corpus: directory required");
      return;
    case Kind::kMixture: {
      if (components.empty()) throw std::invalid_argument("mixture: no components");
      double sum = 0.0;
      for (const auto& [comp, w] : components) {
        if (w < 0.0) throw std::invalid_argument("mixture: negative weight");
        comp.validate();
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("mixture: probabilities must sum to 1");
      }
      return;
    }
  }
}

DistributionSpec DistributionSpec::white_noise() { return {}; }

DistributionSpec DistributionSpec::mldata(int levels, int init_size) {
  DistributionSpec s;
  s.kind = Kind::kMlData;
  s.mldata_levels = levels;
  s.mldata_init_size = init_size;
  return s;
}

DistributionSpec DistributionSpec::image_corpus(std::string dir) {
  DistributionSpec s;
  s.kind = Kind::kImageCorpus;
  s.image_dir = std::move(dir);
  return s;
}

DistributionSpec DistributionSpec::mixture(
    std::vector<std::pair<DistributionSpec, double>> comps) {
  DistributionSpec s;
  s.kind = Kind::kMixture;
  s.components = std::move(comps);
  s.validate();
  return s;
}

namespace {

DistributionSpec parse_component(const std::string& text) {
  if (text == "white_noise" || text == "noise") return DistributionSpec::white_noise();
  if (text == "mldata") return DistributionSpec::mldata();
  if (text.rfind("mldata:", 0) == 0) {
    return DistributionSpec::mldata(std::stoi(text.substr(7)));
  }
  if (text.rfind("image:", 0) == 0) {
    return DistributionSpec::image_corpus(text.substr(6));
  }
  throw std::invalid_argument("unknown distribution '" + text + "'");
}

}  // namespace

DistributionSpec DistributionSpec::parse(const std::string& text) {
  if (text.find(',') == std::string::npos && text.find('@') == std::string::npos) {
    return parse_component(text);
  }
  std::vector<std::pair<DistributionSpec, double>> comps;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto at = item.rfind('@');
    if (at == std::string::npos) {
      throw std::invalid_argument("mixture component '" + item + "' needs an @weight suffix");
    }
    comps.emplace_back(parse_component(item.substr(0, at)), std::stod(item.substr(at + 1)));
  }
  return mixture(std::move(comps));
}

std::string DistributionSpec::to_string() const {
  switch (kind) {
    case Kind::kWhiteNoise:
      return "white_noise";
    case Kind::kMlData:
      return "mldata:" + std::to_string(mldata_levels);
    case Kind::kImageCorpus:
      return "image:" + image_dir;
    case Kind::kMixture: {
      std::string out;
      for (const auto& [comp, w] : components) {
        if (!out.empty()) out += ',';
        std::ostringstream ws;
        ws << w;
        out += comp.to_string() + "@" + ws.str();
      }
      return out;
    }
  }
  return "";
}

namespace {

// Minimal binary PGM (P5, 8-bit) reader. Returns false on any format issue.
bool read_pgm(const std::string& path, Tensor<double>& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::string magic;
  in >> magic;
  if (magic != "P5") return false;

  auto next_int = [&in](int& v) {
    // Skips whitespace and '#' comment lines, then reads one integer.
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    return static_cast<bool>(in >> v);
  };

  int w = 0, h = 0, maxval = 0;
  if (!next_int(w) || !next_int(h) || !next_int(maxval)) return false;
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) return false;
  in.get();  // single whitespace before the raster

  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) return false;

  out = Tensor<double>(1, h, w);
  auto flat = out.flat();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    flat[i] = static_cast<double>(raw[i]) / maxval;
  }
  return true;
}

void min_max_normalize(std::span<double> values) {
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) {
    for (double& v : values) v = 0.5;
    return;
  }
  const double inv = 1.0 / (hi - lo);
  for (double& v : values) v = (v - lo) * inv;
}

}  // namespace

ImageCorpus ImageCorpus::open(const std::string& directory) {
  if (!fs::is_directory(directory)) {
    throw std::runtime_error("image corpus: not a directory: " + directory);
  }
  ImageCorpus corpus;
  std::vector<std::string> candidates;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    if (ext == ".pgm") candidates.push_back(entry.path().string());
  }
  std::sort(candidates.begin(), candidates.end());
  for (const auto& path : candidates) {
    Tensor<double> probe;
    if (read_pgm(path, probe)) {
      corpus.files_.push_back(path);
    } else {
      std::cerr << "warning: skipping unreadable image " << path << "\n";
      ++corpus.skipped_;
    }
  }
  if (corpus.files_.empty()) {
    throw std::runtime_error("image corpus: no readable PGM images in " + directory);
  }
  return corpus;
}

Tensor<double> ImageCorpus::load(std::size_t index) const {
  Tensor<double> img;
  if (!read_pgm(files_.at(index), img)) {
    throw std::runtime_error("image corpus: failed to read " + files_.at(index));
  }
  min_max_normalize(img.flat());
  return img;
}

template <typename T>
Tensor<T> gen_data_multi_level(int goal_size, int levels, int init_size, Rng& rng) {
  if (init_size < 2) throw std::invalid_argument("gen_data_multi_level: init_size must be >= 2");
  if (levels < 0) throw std::invalid_argument("gen_data_multi_level: levels must be >= 0");

  Tensor<T> data(1, init_size, init_size);
  fill_normal(data, rng);
  for (int i = 1; i <= levels; ++i) {
    const int size = 2 * data.height();
    data = bilinear_resize(data, size, size);
    Tensor<T> noise(1, size, size);
    fill_normal(noise, rng);
    data = axpy(noise, data, static_cast<T>(std::pow(2.0, -i)));
  }
  return bilinear_resize(data, goal_size, goal_size);
}

template <typename T>
Tensor<T> gen_data_multi_level(int goal_size, int levels, int init_size, std::uint64_t seed) {
  Rng rng(seed);
  return gen_data_multi_level<T>(goal_size, levels, init_size, rng);
}

namespace {

void collect_corpora(const DistributionSpec& spec, CorpusCache& cache) {
  if (spec.kind == DistributionSpec::Kind::kImageCorpus) {
    if (!cache.contains(spec.image_dir)) {
      cache.emplace(spec.image_dir, ImageCorpus::open(spec.image_dir));
    }
  } else if (spec.kind == DistributionSpec::Kind::kMixture) {
    for (const auto& [comp, w] : spec.components) collect_corpora(comp, cache);
  }
}

}  // namespace

CorpusCache open_corpora(const DistributionSpec& spec) {
  CorpusCache cache;
  collect_corpora(spec, cache);
  return cache;
}

template <typename T>
Tensor<T> sample_random_tensor(const DistributionSpec& spec, int goal_size, Rng& rng,
                               const CorpusCache* cache) {
  if (goal_size < 1) throw std::invalid_argument("sample_random_tensor: bad goal size");
  switch (spec.kind) {
    case DistributionSpec::Kind::kWhiteNoise: {
      Tensor<T> t(1, goal_size, goal_size);
      fill_uniform01(t, rng);
      return t;
    }
    case DistributionSpec::Kind::kMlData: {
      Tensor<T> raw = gen_data_multi_level<T>(goal_size, spec.mldata_levels,
                                              spec.mldata_init_size, rng);
      Tensor<double> d(1, goal_size, goal_size);
      auto dd = d.flat();
      auto rr = raw.flat();
      for (std::size_t i = 0; i < dd.size(); ++i) dd[i] = static_cast<double>(rr[i]);
      min_max_normalize(d.flat());
      Tensor<T> out(1, goal_size, goal_size);
      auto oo = out.flat();
      for (std::size_t i = 0; i < oo.size(); ++i) oo[i] = static_cast<T>(dd[i]);
      return out;
    }
    case DistributionSpec::Kind::kImageCorpus: {
      const ImageCorpus* corpus = nullptr;
      std::unique_ptr<ImageCorpus> owned;
      if (cache != nullptr) {
        auto it = cache->find(spec.image_dir);
        if (it != cache->end()) corpus = &it->second;
      }
      if (corpus == nullptr) {
        owned = std::make_unique<ImageCorpus>(ImageCorpus::open(spec.image_dir));
        corpus = owned.get();
      }
      const std::size_t index =
          static_cast<std::size_t>(rng.uniform01() * static_cast<double>(corpus->size()));
      Tensor<double> img = corpus->load(std::min(index, corpus->size() - 1));
      img = bilinear_resize(img, goal_size, goal_size);
      Tensor<T> out(1, goal_size, goal_size);
      auto oo = out.flat();
      auto ii = img.flat();
      for (std::size_t i = 0; i < oo.size(); ++i) {
        oo[i] = static_cast<T>(std::clamp(ii[i], 0.0, 1.0));
      }
      return out;
    }
    case DistributionSpec::Kind::kMixture: {
      // Component choice and component content use decoupled streams, so a
      // one-component mixture reproduces the component under its sub-seed.
      const double u = rng.uniform01();
      Rng sub(rng.derive_seed());
      double cum = 0.0;
      for (const auto& [comp, w] : spec.components) {
        cum += w;
        if (u < cum) return sample_random_tensor<T>(comp, goal_size, sub, cache);
      }
      return sample_random_tensor<T>(spec.components.back().first, goal_size, sub, cache);
    }
  }
  throw std::logic_error("sample_random_tensor: unknown kind");
}

template <typename T>
Tensor<T> sample_random_tensor(const DistributionSpec& spec, int goal_size, std::uint64_t seed,
                               const CorpusCache* cache) {
  Rng rng(seed);
  return sample_random_tensor<T>(spec, goal_size, rng, cache);
}

void write_pgm(const std::string& path, const Tensor<double>& t) {
  if (t.channels() != 1) throw std::invalid_argument("write_pgm: single channel required");
  Tensor<double> scaled = t;
  min_max_normalize(scaled.flat());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << t.width() << " " << t.height() << "\n255\n";
  for (double v : scaled.flat()) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
}

#define MGCNN_INSTANTIATE(T)                                                           \
  template Tensor<T> gen_data_multi_level(int, int, int, Rng&);                        \
  template Tensor<T> gen_data_multi_level(int, int, int, std::uint64_t);               \
  template Tensor<T> sample_random_tensor(const DistributionSpec&, int, Rng&,          \
                                          const CorpusCache*);                         \
  template Tensor<T> sample_random_tensor(const DistributionSpec&, int, std::uint64_t, \
                                          const CorpusCache*);

MGCNN_INSTANTIATE(float)
MGCNN_INSTANTIATE(double)
#undef MGCNN_INSTANTIATE

}  // namespace mgcnn
