/// @file tensor.hpp
/// @brief Dense multi-channel 2-D tensors and the fixed 3x3 convolution op set.
///
/// Everything else in the library (discretized operators, multigrid transfer,
/// the learned solver, autodiff) is built from the operations declared here.
/// Tensors are value types stored row-major as (channel, row, column); both
/// float and double are supported end to end, never mixed within one op.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace mgcnn {

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width);
  Tensor(int channels, int height, int width, std::vector<T> data);

  static Tensor constant(int channels, int height, int width, T value);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int c, int i, int j) {
    return data_[(static_cast<std::size_t>(c) * height_ + i) * width_ + j];
  }
  T at(int c, int i, int j) const {
    return data_[(static_cast<std::size_t>(c) * height_ + i) * width_ + j];
  }
  T* row(int c, int i) {
    return data_.data() + (static_cast<std::size_t>(c) * height_ + i) * width_;
  }
  const T* row(int c, int i) const {
    return data_.data() + (static_cast<std::size_t>(c) * height_ + i) * width_;
  }

  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }

  bool same_shape(const Tensor& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }
  bool all_finite() const;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Bank of 3x3 convolution kernels, weights stored out x in x 3 x 3.
/// The spatial size is fixed at 3; there is no dilation or grouping.
template <typename T>
class Kernel {
 public:
  Kernel() = default;
  Kernel(int out_channels, int in_channels);

  /// 1-in/1-out kernel from a row-major 3x3 stencil.
  static Kernel from_stencil(const std::array<T, 9>& stencil);

  int out_channels() const { return out_channels_; }
  int in_channels() const { return in_channels_; }

  T& at(int o, int c, int ki, int kj) {
    return weights_[((static_cast<std::size_t>(o) * in_channels_ + c) * 3 + ki) * 3 + kj];
  }
  T at(int o, int c, int ki, int kj) const {
    return weights_[((static_cast<std::size_t>(o) * in_channels_ + c) * 3 + ki) * 3 + kj];
  }
  const T* taps(int o, int c) const {
    return weights_.data() + (static_cast<std::size_t>(o) * in_channels_ + c) * 9;
  }

  std::span<T> flat() { return weights_; }
  std::span<const T> flat() const { return weights_; }

 private:
  int out_channels_ = 0;
  int in_channels_ = 0;
  std::vector<T> weights_;
};

/// Cross-correlation with a 3x3 kernel bank. Two geometries are supported:
/// stride 1 / padding 1 (size preserving, zero padding realizes the zero
/// Dirichlet boundary) and stride 2 / padding 0 (exact 2^k-1 -> 2^(k-1)-1
/// coarsening, requires odd height and width).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Kernel<T>& kernel, int stride, int padding);

/// Adjoint of the stride-2 conv2d: output size 2M+1 for input size M, and
/// <conv2d(x,K,2,0), y> == <x, transposed_conv2d(y,K)> exactly as operators.
/// The input carries kernel.out_channels channels, the output kernel.in_channels.
template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& input, const Kernel<T>& kernel);

/// Gradient of conv2d w.r.t. its input: the transposed convolution of the
/// upstream gradient through the same kernel and geometry.
template <typename T>
Tensor<T> conv2d_input_backward(const Tensor<T>& upstream, const Kernel<T>& kernel,
                                int stride, int padding);

/// Gradient of conv2d w.r.t. the kernel: correlation of the input with the
/// upstream gradient. Accumulates into `kernel_grad` (+=).
template <typename T>
void conv2d_kernel_backward(const Tensor<T>& input, const Tensor<T>& upstream,
                            int stride, int padding, Kernel<T>& kernel_grad);

enum class BinaryOp { add, mul };

template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, BinaryOp op);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(a, b, BinaryOp::add);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(a, b, BinaryOp::mul);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> tanh_map(const Tensor<T>& a);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);

/// alpha * a + b
template <typename T>
Tensor<T> axpy(const Tensor<T>& a, const Tensor<T>& b, T alpha);

/// Euclidean norm over all entries; accumulated in double at either precision.
template <typename T>
double norm2(const Tensor<T>& a);

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b);

/// Separable bilinear interpolation with corner-aligned sample coordinates.
/// Constant inputs map to constant outputs; identity when sizes are unchanged.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& input, int new_height, int new_width);

}  // namespace mgcnn
