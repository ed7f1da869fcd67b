#include "mgcnn/learned_solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mgcnn/rng.hpp"

namespace mgcnn {

namespace {

// Level-l grid sizes for a fine grid of size n: n, (n-1)/2, ...
// Throws when the finest size does not admit level-1 exact halvings.
std::vector<int> level_sizes(int grid_n, int level) {
  if (level < 1) throw std::invalid_argument("level must be >= 1");
  std::vector<int> sizes{grid_n};
  for (int l = 1; l < level; ++l) {
    int n = sizes.back();
    if (n < 3 || n % 2 == 0) {
      throw std::invalid_argument("grid " + std::to_string(grid_n) + " does not admit " +
                                  std::to_string(level - 1) + " halvings");
    }
    sizes.push_back((n - 1) / 2);
  }
  return sizes;
}

template <typename T>
Tensor<T> bias_add(const Tensor<T>& x, const std::vector<T>& bias) {
  Tensor<T> y = x;
  for (int c = 0; c < y.channels(); ++c) {
    const T b = bias[c];
    for (int i = 0; i < y.height(); ++i) {
      T* row = y.row(c, i);
      for (int j = 0; j < y.width(); ++j) row[j] += b;
    }
  }
  return y;
}

// x <- tanh(Kx + b) + x, stacked kResnetLayers times.
template <typename T>
Tensor<T> nonlinear_resnet(const SolverWeights<T>& w, const Tensor<T>& x0) {
  Tensor<T> x = x0;
  for (int l = 0; l < kResnetLayers; ++l) {
    Tensor<T> h = conv2d(x, w.setup_resnet_kernel[l], 1, 1);
    h = bias_add(h, w.setup_resnet_bias[l]);
    x = add(tanh_map(h), x);
  }
  return x;
}

}  // namespace

template <typename T>
SolverWeights<T> SolverWeights<T>::zeros(int channels) {
  if (channels < 1) throw std::invalid_argument("SolverWeights: channels must be >= 1");
  SolverWeights w;
  w.channels = channels;
  w.coef_rechannel = Kernel<T>(channels, 1);
  w.setup_rcnn = Kernel<T>(channels, channels);
  for (int l = 0; l < kResnetLayers; ++l) {
    w.setup_resnet_kernel[l] = Kernel<T>(channels, channels);
    w.setup_resnet_bias[l].assign(channels, T(0));
  }
  w.rhs_rechannel = Kernel<T>(channels, 1);
  w.k_down = Kernel<T>(channels, channels);
  w.k_up = Kernel<T>(channels, channels);
  w.solve_rcnn = Kernel<T>(channels, channels);
  w.solve_tcnn = Kernel<T>(channels, channels);
  w.sol_rechannel = Kernel<T>(1, channels);
  return w;
}

template <typename T>
std::size_t SolverWeights<T>::param_count() const {
  std::size_t n = 0;
  for_each_param([&](const std::string&, std::span<const T> v) { n += v.size(); });
  return n;
}

template <typename T>
void SolverWeights<T>::fill(T value) {
  for_each_param([&](const std::string&, std::span<T> v) {
    for (T& x : v) x = value;
  });
}

template <typename To, typename From>
SolverWeights<To> cast_weights(const SolverWeights<From>& w) {
  SolverWeights<To> out = SolverWeights<To>::zeros(w.channels);
  std::vector<std::span<To>> dst;
  out.for_each_param([&](const std::string&, std::span<To> v) { dst.push_back(v); });
  std::size_t slot = 0;
  w.for_each_param([&](const std::string&, std::span<const From> v) {
    for (std::size_t i = 0; i < v.size(); ++i) dst[slot][i] = static_cast<To>(v[i]);
    ++slot;
  });
  return out;
}

template <typename T>
SolverWeights<T> init_weights(int channels, std::uint64_t seed) {
  SolverWeights<T> w = SolverWeights<T>::zeros(channels);
  Rng rng(seed);
  // Kernels are visited in registry order; biases stay zero and consume no draws.
  auto init_kernel = [&](Kernel<T>& k) {
    const double a = std::sqrt(1.0 / (9.0 * static_cast<double>(k.in_channels())));
    for (T& x : k.flat()) x = static_cast<T>((2.0 * rng.uniform01() - 1.0) * a);
  };
  init_kernel(w.coef_rechannel);
  init_kernel(w.setup_rcnn);
  for (int l = 0; l < kResnetLayers; ++l) init_kernel(w.setup_resnet_kernel[l]);
  init_kernel(w.rhs_rechannel);
  init_kernel(w.k_down);
  init_kernel(w.k_up);
  init_kernel(w.solve_rcnn);
  init_kernel(w.solve_tcnn);
  init_kernel(w.sol_rechannel);
  return w;
}

int level_for_grid(int grid_n) {
  if (!is_pow2_minus_1(grid_n) || grid_n < 15) {
    throw std::invalid_argument("level_for_grid: grid must be 2^k-1 with k >= 4");
  }
  int level = 0;
  int n = grid_n;
  while (n >= 3) {
    ++level;
    n = (n - 1) / 2;
  }
  return level;
}

template <typename T>
SetupOutputs<T> setup(const SolverWeights<T>& weights, const Tensor<T>& coef, int level) {
  if (coef.channels() != 1) throw std::invalid_argument("setup: coef must have one channel");
  if (coef.height() != coef.width()) throw std::invalid_argument("setup: coef must be square");
  level_sizes(coef.height(), level);  // validates halvability

  SetupOutputs<T> outs;
  outs.reserve(level);
  Tensor<T> coef_l = conv2d(coef, weights.coef_rechannel, 1, 1);
  for (int l = 0; l < level; ++l) {
    outs.push_back(nonlinear_resnet(weights, coef_l));
    if (l + 1 < level) coef_l = conv2d(coef_l, weights.setup_rcnn, 2, 0);
  }
  return outs;
}

template <typename T>
Tensor<T> solve_apply(const SolverWeights<T>& weights, const SetupOutputs<T>& setup_outs,
                      const Tensor<T>& rhs, int level) {
  if (static_cast<int>(setup_outs.size()) != level) {
    throw std::invalid_argument("solve_apply: setup outputs do not match level count");
  }
  if (rhs.channels() != 1 || rhs.height() != setup_outs[0].height() ||
      rhs.width() != setup_outs[0].width()) {
    throw std::invalid_argument("solve_apply: rhs shape does not match setup outputs");
  }

  std::vector<Tensor<T>> x(level);
  x[0] = conv2d(rhs, weights.rhs_rechannel, 1, 1);

  // Down cycle: state update then restriction.
  for (int l = 0; l < level; ++l) {
    x[l] = add(conv2d(mul(setup_outs[l], x[l]), weights.k_down, 1, 1), x[l]);
    if (l + 1 < level) x[l + 1] = conv2d(x[l], weights.solve_rcnn, 2, 0);
  }
  // Up cycle: state update then coarse-state addition to the finer level.
  for (int l = level - 1; l >= 0; --l) {
    x[l] = add(conv2d(mul(setup_outs[l], x[l]), weights.k_up, 1, 1), x[l]);
    if (l > 0) x[l - 1] = add(x[l - 1], transposed_conv2d(x[l], weights.solve_tcnn));
  }
  return conv2d(x[0], weights.sol_rechannel, 1, 1);
}

template <typename T>
LearnedSolver<T>::LearnedSolver(const SolverWeights<T>& weights, const ProblemSpec<T>& spec,
                                int level)
    : weights_(weights), level_(level) {
  spec.validate();
  setup_outs_ = setup(weights_, spec.coef, level_);
  ++setup_invocations_;
}

template <typename T>
Tensor<T> LearnedSolver<T>::apply(const Tensor<T>& rhs) const {
  return solve_apply(weights_, setup_outs_, rhs, level_);
}

#define MGCNN_INSTANTIATE(T)                                                            \
  template struct SolverWeights<T>;                                                     \
  template SolverWeights<T> init_weights(int, std::uint64_t);                           \
  template SetupOutputs<T> setup(const SolverWeights<T>&, const Tensor<T>&, int);       \
  template Tensor<T> solve_apply(const SolverWeights<T>&, const SetupOutputs<T>&,       \
                                 const Tensor<T>&, int);                                \
  template class LearnedSolver<T>;

MGCNN_INSTANTIATE(float)
MGCNN_INSTANTIATE(double)
#undef MGCNN_INSTANTIATE

template SolverWeights<float> cast_weights<float, double>(const SolverWeights<double>&);
template SolverWeights<double> cast_weights<double, float>(const SolverWeights<float>&);
template SolverWeights<float> cast_weights<float, float>(const SolverWeights<float>&);
template SolverWeights<double> cast_weights<double, double>(const SolverWeights<double>&);

}  // namespace mgcnn
