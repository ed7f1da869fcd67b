/// @file classical_mg.hpp
/// @brief Baseline geometric multigrid (weighted Jacobi, bilinear transfer,
///        re-discretized coarse operators) and the stationary-iteration
///        driver shared by all solvers.

#pragma once

#include <functional>
#include <vector>

#include "mgcnn/discretization.hpp"
#include "mgcnn/tensor.hpp"

namespace mgcnn {

template <typename T>
struct GmgHierarchy {
  std::vector<ProblemSpec<T>> specs;  // finest first, grid sizes halving
  double jacobi_weight = 0.67;
  int sweeps = 3;

  int levels() const { return static_cast<int>(specs.size()); }
};

/// Level count rule for GMG: coarsen until the coarsest grid is 15x15
/// (31 -> 2 levels, 63 -> 3, 127 -> 4, ...).
int gmg_levels_for_grid(int grid_n);

/// Builds the hierarchy. Coarse coefficients are sampled by injection:
/// coarse (i,j) takes the coincident fine value (2i+1, 2j+1).
template <typename T>
GmgHierarchy<T> gmg_setup(const ProblemSpec<T>& fine_spec, int levels);

/// `sweeps` repetitions of sol <- sol + weight * D^-1 * (rhs - A sol).
template <typename T>
Tensor<T> weighted_jacobi(const ProblemSpec<T>& spec, const Tensor<T>& sol,
                          const Tensor<T>& rhs, double weight, int sweeps);

/// Full-weighting restriction, R = P^T / 4.
template <typename T>
Tensor<T> bilinear_restrict(const Tensor<T>& fine);

/// Bilinear prolongation on the nested 2^k-1 grids, zero Dirichlet outside.
template <typename T>
Tensor<T> bilinear_prolong(const Tensor<T>& coarse);

/// One V-cycle starting from a zero correction at every level. The coarsest
/// level is smoothed with 2x sweeps in place of a direct solve.
template <typename T>
Tensor<T> v_cycle(const GmgHierarchy<T>& h, int level_index, const Tensor<T>& rhs);

struct IterationReport {
  int iterations = 0;
  std::vector<double> relative_residual_history;  // length iterations+1, starts at 1
  bool converged = false;
  bool diverged = false;
  double setup_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// sol^{k+1} = sol^k + B (rhs - A sol^k) from sol^0 = 0 until the relative
/// residual norm drops to `tol` or `max_iters` is reached. A relative
/// residual above 1e6 is reported as divergence rather than looped on.
template <typename T>
IterationReport stationary_solve(const std::function<Tensor<T>(const Tensor<T>&)>& apply_a,
                                 const std::function<Tensor<T>(const Tensor<T>&)>& apply_b,
                                 const Tensor<T>& rhs, double tol, int max_iters,
                                 Tensor<T>* sol_out = nullptr);

}  // namespace mgcnn
