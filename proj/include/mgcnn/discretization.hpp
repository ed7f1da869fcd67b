/// @file discretization.hpp
/// @brief Upwind finite-difference operator for the non-divergence
///        convection-diffusion equation on a structured interior grid.
///
/// The grid stores interior points only; the zero Dirichlet boundary is
/// realized by the zero padding of the stride-1 convolutions. Grid sizes are
/// restricted to 2^k-1 per dimension so every coarsening is exact. Axis
/// convention: the first spatial axis (rows) is y, the second (columns) is x.

#pragma once

#include <array>

#include "mgcnn/tensor.hpp"

namespace mgcnn {

/// Fully determines the linear operator A: grid size, normalized velocity,
/// mesh-Reynolds range limit and the per-point coefficient tensor
/// (coef = 1/Re, entries in [1/re_limit, 1]).
template <typename T>
struct ProblemSpec {
  int grid_n = 0;
  double velocity_x = 0.0;
  double velocity_y = 0.0;
  double re_limit = 1000.0;
  Tensor<T> coef;  // 1 x grid_n x grid_n

  void validate() const;
};

/// The two 3x3 stencils whose combination is A: the 5-point Laplacian and the
/// velocity-weighted upwind difference kernel. Row-major, rows = y axis.
struct UpwindStencil {
  std::array<double, 9> laplacian;
  std::array<double, 9> upwind;
};

/// Builds the stencils for a unit velocity (v_x, v_y). The upwind kernel is
/// v_x+ * dx- + v_x- * dx+ + v_y+ * dy- + v_y- * dy+ with v+ = max(v,0),
/// v- = min(v,0).
UpwindStencil build_upwind_stencil(double velocity_x, double velocity_y);

/// Returns true when n == 2^k - 1 for some k >= 1.
bool is_pow2_minus_1(int n);

/// A*sol = coef o (laplacian * sol) + (upwind * sol), stride-1 zero-padded
/// convolutions (zero Dirichlet boundary).
template <typename T>
Tensor<T> apply_operator(const ProblemSpec<T>& spec, const Tensor<T>& sol);

/// rhs - A*sol.
template <typename T>
Tensor<T> residual(const ProblemSpec<T>& spec, const Tensor<T>& sol, const Tensor<T>& rhs);

/// Pointwise diagonal of A: 4*coef + |v_x| + |v_y|.
template <typename T>
Tensor<T> jacobi_diagonal(const ProblemSpec<T>& spec);

/// Maps a random tensor with entries in [0,1] to a coefficient tensor in
/// [1/re_limit, 1] via coef = 10^(-random * log10(re_limit)).
template <typename T>
Tensor<T> coef_from_random(const Tensor<T>& random01, double re_limit);

}  // namespace mgcnn
