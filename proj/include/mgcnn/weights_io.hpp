/// @file weights_io.hpp
/// @brief Binary weight-file format (version 1).
///
/// Layout, all integers little-endian:
///   magic "MGCN" (4 bytes)
///   version        u32 == 1
///   tensor_count   u32
///   per tensor:
///     name_len     u16, then UTF-8 name bytes
///     rank         u8
///     dims         rank x u32
///     payload      prod(dims) x f64 (IEEE-754, little-endian)
///
/// Tensor names must match the SolverWeights registry exactly; a load
/// rejects missing or unknown names, bad magic, unknown versions and
/// truncated payloads. save -> load -> save is byte-identical.

#pragma once

#include <string>

#include "mgcnn/learned_solver.hpp"

namespace mgcnn {

inline constexpr char kWeightMagic[4] = {'M', 'G', 'C', 'N'};
inline constexpr std::uint32_t kWeightVersion = 1;

/// Payloads are written as f64 regardless of the in-memory precision.
void save_weights(const std::string& path, const SolverWeights<double>& weights);

SolverWeights<double> load_weights(const std::string& path);

}  // namespace mgcnn
