#include "mgcnn/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

namespace mgcnn {

static_assert(std::endian::native == std::endian::little,
              "weight file io assumes a little-endian host");

namespace {

template <typename V>
void write_raw(std::ofstream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_raw(std::ifstream& in, const char* what) {
  V v;
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (in.gcount() != sizeof(V)) {
    throw std::runtime_error(std::string("weight file truncated while reading ") + what);
  }
  return v;
}

}  // namespace

void save_weights(const std::string& path, const SolverWeights<double>& weights) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open weight file for writing: " + path);

  out.write(kWeightMagic, 4);
  write_raw(out, kWeightVersion);

  std::uint32_t count = 0;
  weights.for_each_param([&](const std::string&, std::span<const double>) { ++count; });
  write_raw(out, count);

  weights.for_each_param_shaped([&](const std::string& name,
                                    const std::vector<std::uint32_t>& dims,
                                    std::span<const double> values) {
    write_raw(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw(out, static_cast<std::uint8_t>(dims.size()));
    for (std::uint32_t d : dims) write_raw(out, d);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  });
  if (!out) throw std::runtime_error("failed writing weight file: " + path);
}

SolverWeights<double> load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file: " + path);

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kWeightMagic, 4) != 0) {
    throw std::runtime_error("weight file magic mismatch: " + path);
  }
  const auto version = read_raw<std::uint32_t>(in, "version");
  if (version != kWeightVersion) {
    throw std::runtime_error("unsupported weight file version " + std::to_string(version));
  }
  const auto count = read_raw<std::uint32_t>(in, "tensor count");

  struct Entry {
    std::vector<std::uint32_t> dims;
    std::vector<double> values;
  };
  std::map<std::string, Entry> entries;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = read_raw<std::uint16_t>(in, "name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != name_len) throw std::runtime_error("weight file truncated in name");

    const auto rank = read_raw<std::uint8_t>(in, "rank");
    Entry e;
    std::size_t total = 1;
    for (int d = 0; d < rank; ++d) {
      e.dims.push_back(read_raw<std::uint32_t>(in, "dims"));
      total *= e.dims.back();
    }
    e.values.resize(total);
    in.read(reinterpret_cast<char*>(e.values.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(total * sizeof(double))) {
      throw std::runtime_error("weight file truncated in payload of '" + name + "'");
    }
    if (!entries.emplace(std::move(name), std::move(e)).second) {
      throw std::runtime_error("weight file has a duplicate tensor name");
    }
  }

  // Channel count comes from the rechannel kernel's leading dim.
  auto it = entries.find("coef_rechannel");
  if (it == entries.end() || it->second.dims.size() != 4) {
    throw std::runtime_error("weight file is registry-incomplete: missing coef_rechannel");
  }
  const int channels = static_cast<int>(it->second.dims[0]);

  SolverWeights<double> w = SolverWeights<double>::zeros(channels);
  std::size_t consumed = 0;
  w.for_each_param_shaped([&](const std::string& name, const std::vector<std::uint32_t>& dims,
                              std::span<double> values) {
    auto found = entries.find(name);
    if (found == entries.end()) {
      throw std::runtime_error("weight file is registry-incomplete: missing '" + name + "'");
    }
    if (found->second.dims != dims || found->second.values.size() != values.size()) {
      throw std::runtime_error("weight file tensor '" + name + "' has unexpected shape");
    }
    std::memcpy(values.data(), found->second.values.data(), values.size() * sizeof(double));
    ++consumed;
  });
  if (consumed != entries.size()) {
    throw std::runtime_error("weight file contains tensors outside the registry");
  }
  return w;
}

}  // namespace mgcnn
