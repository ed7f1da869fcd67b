#include "mgcnn/classical_mg.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mgcnn {

namespace {

constexpr double kDivergenceLimit = 1e6;

// Full-weighting / bilinear stencil; restriction uses it scaled by 1/4 as a
// stride-2 conv, prolongation uses it unscaled as a transposed conv. Both
// transfers are therefore exact adjoints up to the factor 4: R == P^T / 4.
template <typename T>
Kernel<T> bilinear_kernel(T s) {
  return Kernel<T>::from_stencil({s / 4, s / 2, s / 4, s / 2, s, s / 2, s / 4, s / 2, s / 4});
}

}  // namespace

int gmg_levels_for_grid(int grid_n) {
  if (!is_pow2_minus_1(grid_n)) {
    throw std::invalid_argument("gmg_levels_for_grid: grid must be 2^k-1");
  }
  int levels = 1;
  int n = grid_n;
  while (n > 15) {
    n = (n - 1) / 2;
    ++levels;
  }
  return levels;
}

template <typename T>
GmgHierarchy<T> gmg_setup(const ProblemSpec<T>& fine_spec, int levels) {
  fine_spec.validate();
  if (levels < 1) throw std::invalid_argument("gmg_setup: levels must be positive");

  GmgHierarchy<T> h;
  h.specs.push_back(fine_spec);
  for (int l = 1; l < levels; ++l) {
    const ProblemSpec<T>& fine = h.specs.back();
    if (fine.grid_n < 3) {
      throw std::invalid_argument("gmg_setup: grid " + std::to_string(fine_spec.grid_n) +
                                  " does not admit " + std::to_string(levels - 1) + " halvings");
    }
    const int nc = (fine.grid_n - 1) / 2;
    ProblemSpec<T> coarse;
    coarse.grid_n = nc;
    coarse.velocity_x = fine.velocity_x;
    coarse.velocity_y = fine.velocity_y;
    // Re-discretization on the doubled mesh width: the mesh Reynolds number
    // doubles, so the injected coefficient (coef = 1/Re) halves per level.
    coarse.re_limit = 2.0 * fine.re_limit;
    coarse.coef = Tensor<T>(1, nc, nc);
    for (int i = 0; i < nc; ++i) {
      for (int j = 0; j < nc; ++j) {
        coarse.coef.at(0, i, j) = fine.coef.at(0, 2 * i + 1, 2 * j + 1) / T(2);
      }
    }
    h.specs.push_back(std::move(coarse));
  }
  return h;
}

template <typename T>
Tensor<T> weighted_jacobi(const ProblemSpec<T>& spec, const Tensor<T>& sol,
                          const Tensor<T>& rhs, double weight, int sweeps) {
  if (!sol.same_shape(rhs)) throw std::invalid_argument("weighted_jacobi: shape mismatch");
  Tensor<T> d = jacobi_diagonal(spec);
  Tensor<T> x = sol;
  for (int s = 0; s < sweeps; ++s) {
    Tensor<T> r = residual(spec, x, rhs);
    auto xx = x.flat();
    auto rr = r.flat();
    auto dd = d.flat();
    for (std::size_t i = 0; i < xx.size(); ++i) {
      xx[i] += static_cast<T>(weight) * rr[i] / dd[i];
    }
  }
  return x;
}

template <typename T>
Tensor<T> bilinear_restrict(const Tensor<T>& fine) {
  return conv2d(fine, bilinear_kernel<T>(T(0.25)), 2, 0);
}

template <typename T>
Tensor<T> bilinear_prolong(const Tensor<T>& coarse) {
  return transposed_conv2d(coarse, bilinear_kernel<T>(T(1)));
}

template <typename T>
Tensor<T> v_cycle(const GmgHierarchy<T>& h, int level_index, const Tensor<T>& rhs) {
  if (level_index < 0 || level_index >= h.levels()) {
    throw std::invalid_argument("v_cycle: level index out of range");
  }
  const ProblemSpec<T>& spec = h.specs[level_index];
  Tensor<T> zero(1, spec.grid_n, spec.grid_n);

  if (level_index == h.levels() - 1) {
    // Coarsest grid: extra smoothing stands in for a direct solve.
    return weighted_jacobi(spec, zero, rhs, h.jacobi_weight, 2 * h.sweeps);
  }

  Tensor<T> e = weighted_jacobi(spec, zero, rhs, h.jacobi_weight, h.sweeps);
  // The factor 2 keeps the normalized residual equation consistent across
  // levels: with the coefficient halving of gmg_setup, the re-discretized
  // coarse operator equals the Galerkin product R A P only for R = P^T/2,
  // i.e. twice the full-weighting restriction.
  Tensor<T> coarse_rhs = scale(bilinear_restrict(residual(spec, e, rhs)), T(2));
  Tensor<T> coarse_e = v_cycle(h, level_index + 1, coarse_rhs);
  e = add(e, bilinear_prolong(coarse_e));
  return weighted_jacobi(spec, e, rhs, h.jacobi_weight, h.sweeps);
}

template <typename T>
IterationReport stationary_solve(const std::function<Tensor<T>(const Tensor<T>&)>& apply_a,
                                 const std::function<Tensor<T>(const Tensor<T>&)>& apply_b,
                                 const Tensor<T>& rhs, double tol, int max_iters,
                                 Tensor<T>* sol_out) {
  if (tol <= 0.0) throw std::invalid_argument("stationary_solve: tol must be positive");

  const auto start = std::chrono::steady_clock::now();
  IterationReport report;
  const double rhs_norm = norm2(rhs);

  Tensor<T> sol(rhs.channels(), rhs.height(), rhs.width());
  Tensor<T> r = rhs;

  double rel = rhs_norm > 0.0 ? 1.0 : 0.0;
  report.relative_residual_history.push_back(rel);

  while (rel > tol && report.iterations < max_iters) {
    sol = add(sol, apply_b(r));
    r = sub(rhs, apply_a(sol));
    rel = rhs_norm > 0.0 ? norm2(r) / rhs_norm : norm2(r);
    ++report.iterations;
    report.relative_residual_history.push_back(rel);
    if (!std::isfinite(rel) || rel > kDivergenceLimit) {
      report.diverged = true;
      break;
    }
  }
  report.converged = !report.diverged && rel <= tol;
  report.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (sol_out) *sol_out = std::move(sol);
  return report;
}

#define MGCNN_INSTANTIATE(T)                                                              \
  template struct GmgHierarchy<T>;                                                        \
  template GmgHierarchy<T> gmg_setup(const ProblemSpec<T>&, int);                         \
  template Tensor<T> weighted_jacobi(const ProblemSpec<T>&, const Tensor<T>&,             \
                                     const Tensor<T>&, double, int);                      \
  template Tensor<T> bilinear_restrict(const Tensor<T>&);                                 \
  template Tensor<T> bilinear_prolong(const Tensor<T>&);                                  \
  template Tensor<T> v_cycle(const GmgHierarchy<T>&, int, const Tensor<T>&);              \
  template IterationReport stationary_solve(                                              \
      const std::function<Tensor<T>(const Tensor<T>&)>&,                                  \
      const std::function<Tensor<T>(const Tensor<T>&)>&, const Tensor<T>&, double, int,   \
      Tensor<T>*);

MGCNN_INSTANTIATE(float)
MGCNN_INSTANTIATE(double)
#undef MGCNN_INSTANTIATE

}  // namespace mgcnn
