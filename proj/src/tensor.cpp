#include "mgcnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mgcnn {

namespace {

[[noreturn]] void shape_error(const std::string& what) {
  throw std::invalid_argument("tensor: " + what);
}

void check_positive(int channels, int height, int width) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    shape_error("dimensions must be positive, got " + std::to_string(channels) + "x" +
                std::to_string(height) + "x" + std::to_string(width));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(int channels, int height, int width)
    : channels_(channels), height_(height), width_(width) {
  check_positive(channels, height, width);
  data_.assign(static_cast<std::size_t>(channels) * height * width, T(0));
}

template <typename T>
Tensor<T>::Tensor(int channels, int height, int width, std::vector<T> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  check_positive(channels, height, width);
  if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
    shape_error("data length does not match channels*height*width");
  }
}

template <typename T>
Tensor<T> Tensor<T>::constant(int channels, int height, int width, T value) {
  Tensor t(channels, height, width);
  for (T& x : t.data_) x = value;
  return t;
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (const T& x : data_) {
    if (!std::isfinite(static_cast<double>(x))) return false;
  }
  return true;
}

template <typename T>
Kernel<T>::Kernel(int out_channels, int in_channels)
    : out_channels_(out_channels), in_channels_(in_channels) {
  if (out_channels <= 0 || in_channels <= 0) {
    shape_error("kernel channel counts must be positive");
  }
  weights_.assign(static_cast<std::size_t>(out_channels) * in_channels * 9, T(0));
}

template <typename T>
Kernel<T> Kernel<T>::from_stencil(const std::array<T, 9>& stencil) {
  Kernel k(1, 1);
  for (int i = 0; i < 9; ++i) k.weights_[i] = stencil[i];
  return k;
}

namespace {

// Copies one channel into a zero-padded (h+2) x (w+2) scratch image.
template <typename T>
void pad_channel(const Tensor<T>& x, int c, std::vector<T>& out) {
  const int h = x.height(), w = x.width();
  const int wp = w + 2;
  out.assign(static_cast<std::size_t>(h + 2) * wp, T(0));
  for (int i = 0; i < h; ++i) {
    const T* src = x.row(c, i);
    T* dst = out.data() + static_cast<std::size_t>(i + 1) * wp + 1;
    for (int j = 0; j < w; ++j) dst[j] = src[j];
  }
}

// Size-preserving conv, zero padding. The inner loop is a sliding 9-tap
// accumulation over one output row; it is written so the compiler can
// vectorize over j.
template <typename T>
Tensor<T> conv_s1p1(const Tensor<T>& x, const Kernel<T>& k) {
  const int h = x.height(), w = x.width();
  const int wp = w + 2;
  Tensor<T> y(k.out_channels(), h, w);

  std::vector<std::vector<T>> padded(x.channels());
  for (int c = 0; c < x.channels(); ++c) pad_channel(x, c, padded[c]);

  for (int o = 0; o < k.out_channels(); ++o) {
    for (int c = 0; c < x.channels(); ++c) {
      const T* taps = k.taps(o, c);
      const T k00 = taps[0], k01 = taps[1], k02 = taps[2];
      const T k10 = taps[3], k11 = taps[4], k12 = taps[5];
      const T k20 = taps[6], k21 = taps[7], k22 = taps[8];
      const T* pad = padded[c].data();
      for (int i = 0; i < h; ++i) {
        const T* p0 = pad + static_cast<std::size_t>(i) * wp;
        const T* p1 = p0 + wp;
        const T* p2 = p1 + wp;
        T* out = y.row(o, i);
        for (int j = 0; j < w; ++j) {
          out[j] += k00 * p0[j] + k01 * p0[j + 1] + k02 * p0[j + 2] +
                    k10 * p1[j] + k11 * p1[j + 1] + k12 * p1[j + 2] +
                    k20 * p2[j] + k21 * p2[j + 1] + k22 * p2[j + 2];
        }
      }
    }
  }
  return y;
}

// Stride-2, no padding: exact nested-grid coarsening, 2^k-1 -> 2^(k-1)-1.
template <typename T>
Tensor<T> conv_s2p0(const Tensor<T>& x, const Kernel<T>& k) {
  const int h = x.height(), w = x.width();
  const int ho = (h - 1) / 2, wo = (w - 1) / 2;
  Tensor<T> y(k.out_channels(), ho, wo);

  for (int o = 0; o < k.out_channels(); ++o) {
    for (int c = 0; c < x.channels(); ++c) {
      const T* taps = k.taps(o, c);
      for (int i = 0; i < ho; ++i) {
        const T* r0 = x.row(c, 2 * i);
        const T* r1 = x.row(c, 2 * i + 1);
        const T* r2 = x.row(c, 2 * i + 2);
        T* out = y.row(o, i);
        for (int j = 0; j < wo; ++j) {
          const int s = 2 * j;
          out[j] += taps[0] * r0[s] + taps[1] * r0[s + 1] + taps[2] * r0[s + 2] +
                    taps[3] * r1[s] + taps[4] * r1[s + 1] + taps[5] * r1[s + 2] +
                    taps[6] * r2[s] + taps[7] * r2[s + 1] + taps[8] * r2[s + 2];
        }
      }
    }
  }
  return y;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Kernel<T>& kernel, int stride, int padding) {
  if (input.channels() != kernel.in_channels()) {
    shape_error("conv2d channel mismatch: input has " + std::to_string(input.channels()) +
                ", kernel expects " + std::to_string(kernel.in_channels()));
  }
  if (stride == 1 && padding == 1) return conv_s1p1(input, kernel);
  if (stride == 2 && padding == 0) {
    if (input.height() % 2 == 0 || input.width() % 2 == 0) {
      shape_error("stride-2 conv2d requires odd height and width, got " +
                  std::to_string(input.height()) + "x" + std::to_string(input.width()));
    }
    if (input.height() < 3 || input.width() < 3) {
      shape_error("stride-2 conv2d requires size >= 3");
    }
    return conv_s2p0(input, kernel);
  }
  shape_error("unsupported conv2d geometry: stride=" + std::to_string(stride) +
              " padding=" + std::to_string(padding));
}

template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& input, const Kernel<T>& kernel) {
  if (input.channels() != kernel.out_channels()) {
    shape_error("transposed_conv2d channel mismatch: input has " +
                std::to_string(input.channels()) + ", kernel produces " +
                std::to_string(kernel.out_channels()));
  }
  const int h = input.height(), w = input.width();
  const int ho = 2 * h + 1, wo = 2 * w + 1;
  Tensor<T> y(kernel.in_channels(), ho, wo);

  // Scatter form of y = K^T x: each input value distributes its 3x3 taps onto
  // the fine grid at offsets (2i+di, 2j+dj).
  for (int c = 0; c < kernel.in_channels(); ++c) {
    for (int o = 0; o < kernel.out_channels(); ++o) {
      const T* taps = kernel.taps(o, c);
      for (int i = 0; i < h; ++i) {
        const T* src = input.row(o, i);
        T* d0 = y.row(c, 2 * i);
        T* d1 = y.row(c, 2 * i + 1);
        T* d2 = y.row(c, 2 * i + 2);
        for (int j = 0; j < w; ++j) {
          const T v = src[j];
          const int s = 2 * j;
          d0[s] += taps[0] * v;
          d0[s + 1] += taps[1] * v;
          d0[s + 2] += taps[2] * v;
          d1[s] += taps[3] * v;
          d1[s + 1] += taps[4] * v;
          d1[s + 2] += taps[5] * v;
          d2[s] += taps[6] * v;
          d2[s + 1] += taps[7] * v;
          d2[s + 2] += taps[8] * v;
        }
      }
    }
  }
  return y;
}

namespace {

// Spatially flipped, channel-swapped copy: the stride-1 adjoint kernel.
template <typename T>
Kernel<T> adjoint_kernel(const Kernel<T>& k) {
  Kernel<T> a(k.in_channels(), k.out_channels());
  for (int o = 0; o < k.out_channels(); ++o) {
    for (int c = 0; c < k.in_channels(); ++c) {
      for (int ki = 0; ki < 3; ++ki) {
        for (int kj = 0; kj < 3; ++kj) {
          a.at(c, o, 2 - ki, 2 - kj) = k.at(o, c, ki, kj);
        }
      }
    }
  }
  return a;
}

}  // namespace

template <typename T>
Tensor<T> conv2d_input_backward(const Tensor<T>& upstream, const Kernel<T>& kernel,
                                int stride, int padding) {
  if (stride == 1 && padding == 1) {
    return conv_s1p1(upstream, adjoint_kernel(kernel));
  }
  if (stride == 2 && padding == 0) {
    return transposed_conv2d(upstream, kernel);
  }
  shape_error("unsupported conv2d geometry in backward");
}

template <typename T>
void conv2d_kernel_backward(const Tensor<T>& input, const Tensor<T>& upstream,
                            int stride, int padding, Kernel<T>& kernel_grad) {
  if (input.channels() != kernel_grad.in_channels() ||
      upstream.channels() != kernel_grad.out_channels()) {
    shape_error("conv2d kernel backward channel mismatch");
  }
  const int ho = upstream.height(), wo = upstream.width();

  if (stride == 1 && padding == 1) {
    std::vector<std::vector<T>> padded(input.channels());
    for (int c = 0; c < input.channels(); ++c) pad_channel(input, c, padded[c]);
    const int wp = input.width() + 2;
    for (int o = 0; o < kernel_grad.out_channels(); ++o) {
      for (int c = 0; c < kernel_grad.in_channels(); ++c) {
        // One pass over the image with nine running dot products, one per tap.
        const T* pad = padded[c].data();
        T a00 = 0, a01 = 0, a02 = 0, a10 = 0, a11 = 0, a12 = 0, a20 = 0, a21 = 0, a22 = 0;
        for (int i = 0; i < ho; ++i) {
          const T* g = upstream.row(o, i);
          const T* p0 = pad + static_cast<std::size_t>(i) * wp;
          const T* p1 = p0 + wp;
          const T* p2 = p1 + wp;
          for (int j = 0; j < wo; ++j) {
            const T gj = g[j];
            a00 += gj * p0[j];
            a01 += gj * p0[j + 1];
            a02 += gj * p0[j + 2];
            a10 += gj * p1[j];
            a11 += gj * p1[j + 1];
            a12 += gj * p1[j + 2];
            a20 += gj * p2[j];
            a21 += gj * p2[j + 1];
            a22 += gj * p2[j + 2];
          }
        }
        T* taps = kernel_grad.flat().data() +
                  (static_cast<std::size_t>(o) * kernel_grad.in_channels() + c) * 9;
        taps[0] += a00;
        taps[1] += a01;
        taps[2] += a02;
        taps[3] += a10;
        taps[4] += a11;
        taps[5] += a12;
        taps[6] += a20;
        taps[7] += a21;
        taps[8] += a22;
      }
    }
    return;
  }
  if (stride == 2 && padding == 0) {
    for (int o = 0; o < kernel_grad.out_channels(); ++o) {
      for (int c = 0; c < kernel_grad.in_channels(); ++c) {
        for (int ki = 0; ki < 3; ++ki) {
          for (int kj = 0; kj < 3; ++kj) {
            T acc = 0;
            for (int i = 0; i < ho; ++i) {
              const T* g = upstream.row(o, i);
              const T* p = input.row(c, 2 * i + ki) + kj;
              for (int j = 0; j < wo; ++j) acc += g[j] * p[2 * j];
            }
            kernel_grad.at(o, c, ki, kj) += acc;
          }
        }
      }
    }
    return;
  }
  shape_error("unsupported conv2d geometry in kernel backward");
}

template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, BinaryOp op) {
  if (!a.same_shape(b)) shape_error("elementwise shape mismatch");
  Tensor<T> y(a.channels(), a.height(), a.width());
  auto ya = y.flat();
  auto aa = a.flat();
  auto bb = b.flat();
  if (op == BinaryOp::add) {
    for (std::size_t i = 0; i < ya.size(); ++i) ya[i] = aa[i] + bb[i];
  } else {
    for (std::size_t i = 0; i < ya.size(); ++i) ya[i] = aa[i] * bb[i];
  }
  return y;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) shape_error("sub shape mismatch");
  Tensor<T> y(a.channels(), a.height(), a.width());
  auto ya = y.flat();
  auto aa = a.flat();
  auto bb = b.flat();
  for (std::size_t i = 0; i < ya.size(); ++i) ya[i] = aa[i] - bb[i];
  return y;
}

namespace detail {
void tanh_buffer(const float* in, float* out, std::size_t n);
void tanh_buffer(const double* in, double* out, std::size_t n);
}  // namespace detail

template <typename T>
Tensor<T> tanh_map(const Tensor<T>& a) {
  Tensor<T> y(a.channels(), a.height(), a.width());
  detail::tanh_buffer(a.flat().data(), y.flat().data(), a.size());
  return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> y(a.channels(), a.height(), a.width());
  auto ya = y.flat();
  auto aa = a.flat();
  for (std::size_t i = 0; i < ya.size(); ++i) ya[i] = s * aa[i];
  return y;
}

template <typename T>
Tensor<T> axpy(const Tensor<T>& a, const Tensor<T>& b, T alpha) {
  if (!a.same_shape(b)) shape_error("axpy shape mismatch");
  Tensor<T> y(a.channels(), a.height(), a.width());
  auto ya = y.flat();
  auto aa = a.flat();
  auto bb = b.flat();
  for (std::size_t i = 0; i < ya.size(); ++i) ya[i] = alpha * aa[i] + bb[i];
  return y;
}

template <typename T>
double norm2(const Tensor<T>& a) {
  double acc = 0.0;
  for (const T& x : a.flat()) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) shape_error("dot shape mismatch");
  double acc = 0.0;
  auto aa = a.flat();
  auto bb = b.flat();
  for (std::size_t i = 0; i < aa.size(); ++i) {
    acc += static_cast<double>(aa[i]) * static_cast<double>(bb[i]);
  }
  return acc;
}

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& input, int new_height, int new_width) {
  if (new_height <= 0 || new_width <= 0) shape_error("bilinear_resize target must be positive");
  const int h = input.height(), w = input.width();
  if (new_height == h && new_width == w) return input;

  // Corner-aligned sample coordinates; a target size of 1 samples index 0.
  auto src_coord = [](int out_idx, int out_size, int in_size) {
    if (out_size == 1 || in_size == 1) return 0.0;
    return static_cast<double>(out_idx) * (in_size - 1) / (out_size - 1);
  };

  struct Taps {
    int lo;
    double frac;
  };
  std::vector<Taps> rows(new_height), cols(new_width);
  for (int i = 0; i < new_height; ++i) {
    double s = src_coord(i, new_height, h);
    int lo = std::min(static_cast<int>(s), h - 1);
    rows[i] = {lo, s - lo};
  }
  for (int j = 0; j < new_width; ++j) {
    double s = src_coord(j, new_width, w);
    int lo = std::min(static_cast<int>(s), w - 1);
    cols[j] = {lo, s - lo};
  }

  Tensor<T> y(input.channels(), new_height, new_width);
  for (int c = 0; c < input.channels(); ++c) {
    for (int i = 0; i < new_height; ++i) {
      const int i0 = rows[i].lo;
      const int i1 = std::min(i0 + 1, h - 1);
      const double fi = rows[i].frac;
      const T* r0 = input.row(c, i0);
      const T* r1 = input.row(c, i1);
      T* out = y.row(c, i);
      for (int j = 0; j < new_width; ++j) {
        const int j0 = cols[j].lo;
        const int j1 = std::min(j0 + 1, w - 1);
        const double fj = cols[j].frac;
        const double top = (1.0 - fj) * r0[j0] + fj * r0[j1];
        const double bot = (1.0 - fj) * r1[j0] + fj * r1[j1];
        out[j] = static_cast<T>((1.0 - fi) * top + fi * bot);
      }
    }
  }
  return y;
}

#define MGCNN_INSTANTIATE(T)                                                               \
  template class Tensor<T>;                                                                \
  template class Kernel<T>;                                                                \
  template Tensor<T> conv2d(const Tensor<T>&, const Kernel<T>&, int, int);                 \
  template Tensor<T> transposed_conv2d(const Tensor<T>&, const Kernel<T>&);                \
  template Tensor<T> conv2d_input_backward(const Tensor<T>&, const Kernel<T>&, int, int);  \
  template void conv2d_kernel_backward(const Tensor<T>&, const Tensor<T>&, int, int,       \
                                       Kernel<T>&);                                        \
  template Tensor<T> elementwise(const Tensor<T>&, const Tensor<T>&, BinaryOp);            \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> tanh_map(const Tensor<T>&);                                           \
  template Tensor<T> scale(const Tensor<T>&, T);                                           \
  template Tensor<T> axpy(const Tensor<T>&, const Tensor<T>&, T);                          \
  template double norm2(const Tensor<T>&);                                                 \
  template double dot(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> bilinear_resize(const Tensor<T>&, int, int);

MGCNN_INSTANTIATE(float)
MGCNN_INSTANTIATE(double)
#undef MGCNN_INSTANTIATE

}  // namespace mgcnn
