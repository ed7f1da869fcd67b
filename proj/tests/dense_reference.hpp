/// Test-only dense reference constructions.
///
/// Every operator here is materialized as an explicit Eigen matrix through
/// index arithmetic, independently of the library's convolution loops, so the
/// main code paths can be checked entry-for-entry against dense linear
/// algebra on small grids.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "mgcnn/classical_mg.hpp"
#include "mgcnn/discretization.hpp"
#include "mgcnn/learned_solver.hpp"
#include "mgcnn/tensor.hpp"

namespace mgcnn::testing {

Eigen::VectorXd flatten(const Tensor<double>& t);
Tensor<double> unflatten(const Eigen::VectorXd& v, int channels, int height, int width);

/// Cross-correlation with a 3x3 kernel bank as a dense matrix acting on the
/// flattened (channel, row, column) input. Supports the two library
/// geometries: stride 1 / padding 1 and stride 2 / padding 0.
Eigen::MatrixXd dense_conv_matrix(const Kernel<double>& kernel, int in_h, int in_w, int stride,
                                  int padding);

/// Dense matrix of the stride-2 transposed convolution (input M -> 2M+1).
Eigen::MatrixXd dense_tconv_matrix(const Kernel<double>& kernel, int in_h, int in_w);

/// The convection-diffusion operator A assembled entry-by-entry from the
/// one-sided difference stencils with explicit zero-Dirichlet boundary.
Eigen::MatrixXd dense_operator_matrix(const ProblemSpec<double>& spec);

/// Bilinear prolongation (coarse nc^2 -> fine (2nc+1)^2) from interpolation
/// weights; restriction is its transpose scaled by 1/4.
Eigen::MatrixXd dense_prolongation(int coarse_n);
Eigen::MatrixXd dense_restriction(int fine_n);

/// One weighted-Jacobi sweep in matrix form: x + w D^-1 (b - A x).
Eigen::VectorXd dense_jacobi_sweep(const Eigen::MatrixXd& a, const Eigen::VectorXd& diag,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                                   double weight);

/// Recursive dense mirror of the V-cycle (pre/post smoothing, full-weighting
/// transfer, 2x sweeps at the coarsest level), starting from zero corrections.
Eigen::VectorXd dense_v_cycle(const GmgHierarchy<double>& h, int level,
                              const Eigen::VectorXd& rhs);

/// Dense matrix of the whole solve phase for fixed setup outputs, composed
/// from dense conv matrices and diagonal multiplications.
Eigen::MatrixXd dense_solve_matrix(const SolverWeights<double>& weights,
                                   const SetupOutputs<double>& setup_outs, int level);

}  // namespace mgcnn::testing
