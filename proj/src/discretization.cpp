#include "mgcnn/discretization.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mgcnn {

namespace {

constexpr double kUnitNormTol = 1e-12;

template <typename T>
Kernel<T> stencil_kernel(const std::array<double, 9>& s) {
  std::array<T, 9> taps;
  for (int i = 0; i < 9; ++i) taps[i] = static_cast<T>(s[i]);
  return Kernel<T>::from_stencil(taps);
}

}  // namespace

bool is_pow2_minus_1(int n) {
  if (n < 1) return false;
  unsigned m = static_cast<unsigned>(n) + 1u;
  return (m & (m - 1u)) == 0u;
}

template <typename T>
void ProblemSpec<T>::validate() const {
  if (!is_pow2_minus_1(grid_n)) {
    throw std::invalid_argument("ProblemSpec: grid_n must be 2^k-1, got " +
                                std::to_string(grid_n));
  }
  double n = std::hypot(velocity_x, velocity_y);
  if (std::abs(n - 1.0) > kUnitNormTol) {
    throw std::invalid_argument("ProblemSpec: velocity must have unit norm");
  }
  if (re_limit <= 1.0) {
    throw std::invalid_argument("ProblemSpec: re_limit must exceed 1");
  }
  if (coef.channels() != 1 || coef.height() != grid_n || coef.width() != grid_n) {
    throw std::invalid_argument("ProblemSpec: coef must be 1 x grid_n x grid_n");
  }
}

UpwindStencil build_upwind_stencil(double velocity_x, double velocity_y) {
  if (std::abs(std::hypot(velocity_x, velocity_y) - 1.0) > kUnitNormTol) {
    throw std::invalid_argument("build_upwind_stencil: velocity must have unit norm");
  }

  UpwindStencil s{};
  s.laplacian = {0, -1, 0, -1, 4, -1, 0, -1, 0};

  // One-sided differences; dy acts along rows, dx along columns.
  const std::array<double, 9> dx_plus = {0, 0, 0, 0, -1, 1, 0, 0, 0};
  const std::array<double, 9> dx_minus = {0, 0, 0, -1, 1, 0, 0, 0, 0};
  const std::array<double, 9> dy_plus = {0, 1, 0, 0, -1, 0, 0, 0, 0};
  const std::array<double, 9> dy_minus = {0, 0, 0, 0, 1, 0, 0, -1, 0};

  const double vxp = std::max(velocity_x, 0.0);
  const double vxm = std::min(velocity_x, 0.0);
  const double vyp = std::max(velocity_y, 0.0);
  const double vym = std::min(velocity_y, 0.0);

  for (int i = 0; i < 9; ++i) {
    s.upwind[i] = vxp * dx_minus[i] + vxm * dx_plus[i] + vyp * dy_minus[i] + vym * dy_plus[i];
  }
  return s;
}

template <typename T>
Tensor<T> apply_operator(const ProblemSpec<T>& spec, const Tensor<T>& sol) {
  if (sol.channels() != 1 || sol.height() != spec.grid_n || sol.width() != spec.grid_n) {
    throw std::invalid_argument("apply_operator: sol must be 1 x grid_n x grid_n");
  }
  UpwindStencil s = build_upwind_stencil(spec.velocity_x, spec.velocity_y);
  Tensor<T> lap = conv2d(sol, stencil_kernel<T>(s.laplacian), 1, 1);
  Tensor<T> upw = conv2d(sol, stencil_kernel<T>(s.upwind), 1, 1);
  return add(mul(spec.coef, lap), upw);
}

template <typename T>
Tensor<T> residual(const ProblemSpec<T>& spec, const Tensor<T>& sol, const Tensor<T>& rhs) {
  return sub(rhs, apply_operator(spec, sol));
}

template <typename T>
Tensor<T> jacobi_diagonal(const ProblemSpec<T>& spec) {
  const T shift = static_cast<T>(std::abs(spec.velocity_x) + std::abs(spec.velocity_y));
  Tensor<T> d(1, spec.grid_n, spec.grid_n);
  auto dd = d.flat();
  auto cc = spec.coef.flat();
  for (std::size_t i = 0; i < dd.size(); ++i) dd[i] = T(4) * cc[i] + shift;
  return d;
}

template <typename T>
Tensor<T> coef_from_random(const Tensor<T>& random01, double re_limit) {
  if (re_limit <= 1.0) {
    throw std::invalid_argument("coef_from_random: re_limit must exceed 1");
  }
  const double log_limit = std::log10(re_limit);
  Tensor<T> coef(random01.channels(), random01.height(), random01.width());
  auto out = coef.flat();
  auto in = random01.flat();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double r = static_cast<double>(in[i]);
    if (r < 0.0 || r > 1.0) {
      throw std::invalid_argument("coef_from_random: input entries must lie in [0,1]");
    }
    out[i] = static_cast<T>(std::pow(10.0, -r * log_limit));
  }
  return coef;
}

#define MGCNN_INSTANTIATE(T)                                                          \
  template struct ProblemSpec<T>;                                                     \
  template Tensor<T> apply_operator(const ProblemSpec<T>&, const Tensor<T>&);         \
  template Tensor<T> residual(const ProblemSpec<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> jacobi_diagonal(const ProblemSpec<T>&);                          \
  template Tensor<T> coef_from_random(const Tensor<T>&, double);

MGCNN_INSTANTIATE(float)
MGCNN_INSTANTIATE(double)
#undef MGCNN_INSTANTIATE

}  // namespace mgcnn
