// Vector tanh kernel, isolated in its own translation unit: this file is
// compiled with -ffast-math + -fopenmp-simd so glibc's libmvec variants can
// be substituted. Nothing here depends on NaN/Inf semantics.

#include <cmath>
#include <cstddef>

namespace mgcnn::detail {

void tanh_buffer(const float* in, float* out, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
}

void tanh_buffer(const double* in, double* out, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
}

}  // namespace mgcnn::detail
