/// @file learned_solver.hpp
/// @brief The learnable multigrid solver: a setup network that maps the
///        coefficient field to per-level setup tensors, and a strictly
///        linear, weight-shared solve network with multigrid topology.
///
/// One copy of each kernel serves every level and every grid size, so the
/// parameter count is independent of the problem. The solve phase carries no
/// bias and no activation; it is exactly linear in the right-hand side for
/// fixed setup outputs.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mgcnn/discretization.hpp"
#include "mgcnn/tensor.hpp"

namespace mgcnn {

inline constexpr int kResnetLayers = 4;

template <typename T>
struct SolverWeights {
  int channels = 8;

  Kernel<T> coef_rechannel;  // 1 -> c
  Kernel<T> setup_rcnn;      // c -> c, stride 2
  std::array<Kernel<T>, kResnetLayers> setup_resnet_kernel;  // c -> c
  std::array<std::vector<T>, kResnetLayers> setup_resnet_bias;  // per channel
  Kernel<T> rhs_rechannel;   // 1 -> c
  Kernel<T> k_down;          // c -> c
  Kernel<T> k_up;            // c -> c
  Kernel<T> solve_rcnn;      // c -> c, stride 2
  Kernel<T> solve_tcnn;      // c -> c, transposed
  Kernel<T> sol_rechannel;   // c -> 1

  static SolverWeights zeros(int channels);

  /// Visits every parameter span in registry order with its stable name.
  /// The order is the serialization order and the Adam slot order.
  template <typename Fn>
  void for_each_param(Fn&& fn) {
    fn("coef_rechannel", coef_rechannel.flat());
    fn("setup_rcnn", setup_rcnn.flat());
    for (int l = 0; l < kResnetLayers; ++l) {
      fn("setup_resnet." + std::to_string(l) + ".kernel", setup_resnet_kernel[l].flat());
      fn("setup_resnet." + std::to_string(l) + ".bias",
         std::span<T>(setup_resnet_bias[l].data(), setup_resnet_bias[l].size()));
    }
    fn("rhs_rechannel", rhs_rechannel.flat());
    fn("k_down", k_down.flat());
    fn("k_up", k_up.flat());
    fn("solve_rcnn", solve_rcnn.flat());
    fn("solve_tcnn", solve_tcnn.flat());
    fn("sol_rechannel", sol_rechannel.flat());
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    const_cast<SolverWeights*>(this)->for_each_param(
        [&](const std::string& name, std::span<T> values) {
          fn(name, std::span<const T>(values.data(), values.size()));
        });
  }

  /// Like for_each_param but also reports tensor dims: kernels are rank 4
  /// (out, in, 3, 3), biases rank 1 (channels).
  template <typename Fn>
  void for_each_param_shaped(Fn&& fn) {
    const int c = channels;
    auto kernel_dims = [](int out, int in) {
      return std::vector<std::uint32_t>{static_cast<std::uint32_t>(out),
                                        static_cast<std::uint32_t>(in), 3u, 3u};
    };
    for_each_param([&](const std::string& name, std::span<T> values) {
      std::vector<std::uint32_t> dims;
      if (name.find("bias") != std::string::npos) {
        dims = {static_cast<std::uint32_t>(c)};
      } else if (name == "coef_rechannel" || name == "rhs_rechannel") {
        dims = kernel_dims(c, 1);
      } else if (name == "sol_rechannel") {
        dims = kernel_dims(1, c);
      } else {
        dims = kernel_dims(c, c);
      }
      fn(name, dims, values);
    });
  }
  template <typename Fn>
  void for_each_param_shaped(Fn&& fn) const {
    const_cast<SolverWeights*>(this)->for_each_param_shaped(
        [&](const std::string& name, const std::vector<std::uint32_t>& dims,
            std::span<T> values) {
          fn(name, dims, std::span<const T>(values.data(), values.size()));
        });
  }

  std::size_t param_count() const;
  void fill(T value);
};

/// Casts weights between precisions (f64 <-> f32).
template <typename To, typename From>
SolverWeights<To> cast_weights(const SolverWeights<From>& w);

/// Uniform init in [-a, a] with a = sqrt(1 / (9 * in_channels)); biases zero.
/// Deterministic under the seed; entries are drawn in registry order.
template <typename T>
SolverWeights<T> init_weights(int channels, std::uint64_t seed);

/// Per-level setup tensors, level l sized c x n_l x n_l with n_1 = grid size
/// and n_{l+1} = (n_l - 1) / 2.
template <typename T>
using SetupOutputs = std::vector<Tensor<T>>;

/// Number of levels used by the learned solver for a 2^k-1 grid: coarsen to
/// 3x3, i.e. log2(n+1) - 1 (31 -> 4, 63 -> 5, ..., 4095 -> 11).
int level_for_grid(int grid_n);

/// Setup phase: rechannel the coefficient, then per level emit
/// setup_out_l = NonLinearResNet(coef_l) (4 layers of x <- tanh(Kx + b) + x)
/// and restrict coef_{l+1} = RCNN(coef_l).
template <typename T>
SetupOutputs<T> setup(const SolverWeights<T>& weights, const Tensor<T>& coef, int level);

/// Solve phase: one down/up multigrid cycle over the setup tensors with one
/// ResNet sweep per level per direction; linear in rhs.
template <typename T>
Tensor<T> solve_apply(const SolverWeights<T>& weights, const SetupOutputs<T>& setup_outs,
                      const Tensor<T>& rhs, int level);

/// Handle that runs the setup phase once and then acts as the linear solver
/// B inside stationary iteration.
template <typename T>
class LearnedSolver {
 public:
  LearnedSolver(const SolverWeights<T>& weights, const ProblemSpec<T>& spec, int level);

  Tensor<T> apply(const Tensor<T>& rhs) const;

  int level() const { return level_; }
  int setup_invocations() const { return setup_invocations_; }
  const SetupOutputs<T>& setup_outputs() const { return setup_outs_; }

 private:
  const SolverWeights<T>& weights_;
  int level_;
  SetupOutputs<T> setup_outs_;
  int setup_invocations_ = 0;
};

}  // namespace mgcnn
