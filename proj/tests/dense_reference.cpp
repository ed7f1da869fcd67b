#include "dense_reference.hpp"

#include <cmath>
#include <stdexcept>

namespace mgcnn::testing {

Eigen::VectorXd flatten(const Tensor<double>& t) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.size()));
  auto f = t.flat();
  for (std::size_t i = 0; i < f.size(); ++i) v[static_cast<Eigen::Index>(i)] = f[i];
  return v;
}

Tensor<double> unflatten(const Eigen::VectorXd& v, int channels, int height, int width) {
  Tensor<double> t(channels, height, width);
  auto f = t.flat();
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = v[static_cast<Eigen::Index>(i)];
  return t;
}

Eigen::MatrixXd dense_conv_matrix(const Kernel<double>& kernel, int in_h, int in_w, int stride,
                                  int padding) {
  int out_h, out_w;
  if (stride == 1 && padding == 1) {
    out_h = in_h;
    out_w = in_w;
  } else if (stride == 2 && padding == 0) {
    out_h = (in_h - 1) / 2;
    out_w = (in_w - 1) / 2;
  } else {
    throw std::invalid_argument("dense_conv_matrix: unsupported geometry");
  }

  const int ci = kernel.in_channels(), co = kernel.out_channels();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(co) * out_h * out_w,
                                            static_cast<Eigen::Index>(ci) * in_h * in_w);
  for (int o = 0; o < co; ++o) {
    for (int i = 0; i < out_h; ++i) {
      for (int j = 0; j < out_w; ++j) {
        const Eigen::Index row = (static_cast<Eigen::Index>(o) * out_h + i) * out_w + j;
        for (int c = 0; c < ci; ++c) {
          for (int ki = 0; ki < 3; ++ki) {
            for (int kj = 0; kj < 3; ++kj) {
              const int si = i * stride + ki - padding;
              const int sj = j * stride + kj - padding;
              if (si < 0 || si >= in_h || sj < 0 || sj >= in_w) continue;
              const Eigen::Index col = (static_cast<Eigen::Index>(c) * in_h + si) * in_w + sj;
              m(row, col) += kernel.at(o, c, ki, kj);
            }
          }
        }
      }
    }
  }
  return m;
}

Eigen::MatrixXd dense_tconv_matrix(const Kernel<double>& kernel, int in_h, int in_w) {
  // K^T of the stride-2 conv whose input is the tconv output.
  const int out_h = 2 * in_h + 1, out_w = 2 * in_w + 1;
  return dense_conv_matrix(kernel, out_h, out_w, 2, 0).transpose();
}

Eigen::MatrixXd dense_operator_matrix(const ProblemSpec<double>& spec) {
  const int n = spec.grid_n;
  const double vx = spec.velocity_x, vy = spec.velocity_y;

  // One-sided difference stencils, transcribed directly; entries are
  // (row offset, column offset, value) scaled by the velocity parts
  // v_x+ dx- + v_x- dx+ + v_y+ dy- + v_y- dy+.
  struct Tap {
    int di, dj;
    double v;
  };
  const double vxp = std::max(vx, 0.0), vxm = std::min(vx, 0.0);
  const double vyp = std::max(vy, 0.0), vym = std::min(vy, 0.0);
  const std::array<Tap, 8> upwind = {{{0, -1, -vxp},
                                      {0, 0, vxp},
                                      {0, 0, -vxm},
                                      {0, 1, vxm},
                                      {0, 0, vyp},
                                      {1, 0, -vyp},
                                      {-1, 0, vym},
                                      {0, 0, -vym}}};

  const std::array<Tap, 5> laplacian = {
      {{0, 0, 4.0}, {-1, 0, -1.0}, {1, 0, -1.0}, {0, -1, -1.0}, {0, 1, -1.0}}};

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * n + j;
      const double c = spec.coef.at(0, i, j);
      for (const Tap& t : laplacian) {
        const int si = i + t.di, sj = j + t.dj;
        if (si < 0 || si >= n || sj < 0 || sj >= n) continue;  // zero Dirichlet
        a(row, static_cast<Eigen::Index>(si) * n + sj) += c * t.v;
      }
      for (const Tap& t : upwind) {
        const int si = i + t.di, sj = j + t.dj;
        if (si < 0 || si >= n || sj < 0 || sj >= n) continue;
        a(row, static_cast<Eigen::Index>(si) * n + sj) += t.v;
      }
    }
  }
  return a;
}

Eigen::MatrixXd dense_prolongation(int coarse_n) {
  const int fine_n = 2 * coarse_n + 1;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(fine_n * fine_n, coarse_n * coarse_n);
  // Fine point (fi, fj) interpolates the (up to four) nearest coarse points
  // at fine coordinates (2I+1, 2J+1); weights decay by 1/2 per offset axis.
  for (int fi = 0; fi < fine_n; ++fi) {
    for (int fj = 0; fj < fine_n; ++fj) {
      const Eigen::Index row = static_cast<Eigen::Index>(fi) * fine_n + fj;
      const bool odd_i = (fi % 2) == 1;
      const bool odd_j = (fj % 2) == 1;
      std::vector<std::pair<int, double>> wi, wj;
      if (odd_i) {
        wi = {{(fi - 1) / 2, 1.0}};
      } else {
        wi = {{fi / 2 - 1, 0.5}, {fi / 2, 0.5}};
      }
      if (odd_j) {
        wj = {{(fj - 1) / 2, 1.0}};
      } else {
        wj = {{fj / 2 - 1, 0.5}, {fj / 2, 0.5}};
      }
      for (auto [ci, vi] : wi) {
        if (ci < 0 || ci >= coarse_n) continue;
        for (auto [cj, vj] : wj) {
          if (cj < 0 || cj >= coarse_n) continue;
          p(row, static_cast<Eigen::Index>(ci) * coarse_n + cj) += vi * vj;
        }
      }
    }
  }
  return p;
}

Eigen::MatrixXd dense_restriction(int fine_n) {
  return dense_prolongation((fine_n - 1) / 2).transpose() / 4.0;
}

Eigen::VectorXd dense_jacobi_sweep(const Eigen::MatrixXd& a, const Eigen::VectorXd& diag,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                                   double weight) {
  Eigen::VectorXd r = b - a * x;
  return x + weight * (r.array() / diag.array()).matrix();
}

namespace {

Eigen::VectorXd dense_smooth(const Eigen::MatrixXd& a, const Eigen::VectorXd& diag,
                             Eigen::VectorXd x, const Eigen::VectorXd& b, double weight,
                             int sweeps) {
  for (int s = 0; s < sweeps; ++s) x = dense_jacobi_sweep(a, diag, x, b, weight);
  return x;
}

}  // namespace

Eigen::VectorXd dense_v_cycle(const GmgHierarchy<double>& h, int level,
                              const Eigen::VectorXd& rhs) {
  const ProblemSpec<double>& spec = h.specs[level];
  Eigen::MatrixXd a = dense_operator_matrix(spec);
  Eigen::VectorXd diag = flatten(jacobi_diagonal(spec));
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(rhs.size());

  if (level == h.levels() - 1) {
    return dense_smooth(a, diag, zero, rhs, h.jacobi_weight, 2 * h.sweeps);
  }
  Eigen::VectorXd e = dense_smooth(a, diag, zero, rhs, h.jacobi_weight, h.sweeps);
  // Same cross-level scaling as the library cycle: restriction at 2x full
  // weighting pairs with the per-level coefficient halving of gmg_setup.
  Eigen::VectorXd coarse_rhs = 2.0 * (dense_restriction(spec.grid_n) * (rhs - a * e));
  Eigen::VectorXd coarse_e = dense_v_cycle(h, level + 1, coarse_rhs);
  e += dense_prolongation(h.specs[level + 1].grid_n) * coarse_e;
  return dense_smooth(a, diag, e, rhs, h.jacobi_weight, h.sweeps);
}

Eigen::MatrixXd dense_solve_matrix(const SolverWeights<double>& weights,
                                   const SetupOutputs<double>& setup_outs, int level) {
  const int n = setup_outs[0].height();
  std::vector<int> sizes{n};
  for (int l = 1; l < level; ++l) sizes.push_back((sizes.back() - 1) / 2);

  auto diag_of = [](const Tensor<double>& t) {
    return Eigen::MatrixXd(flatten(t).asDiagonal());
  };

  // x holds, per level, the dense matrix mapping the original rhs vector to
  // that level's state.
  std::vector<Eigen::MatrixXd> x(level);
  x[0] = dense_conv_matrix(weights.rhs_rechannel, n, n, 1, 1);
  for (int l = 0; l < level; ++l) {
    const Eigen::MatrixXd kd = dense_conv_matrix(weights.k_down, sizes[l], sizes[l], 1, 1);
    x[l] = kd * diag_of(setup_outs[l]) * x[l] + x[l];
    if (l + 1 < level) {
      x[l + 1] = dense_conv_matrix(weights.solve_rcnn, sizes[l], sizes[l], 2, 0) * x[l];
    }
  }
  for (int l = level - 1; l >= 0; --l) {
    const Eigen::MatrixXd ku = dense_conv_matrix(weights.k_up, sizes[l], sizes[l], 1, 1);
    x[l] = ku * diag_of(setup_outs[l]) * x[l] + x[l];
    if (l > 0) {
      x[l - 1] += dense_tconv_matrix(weights.solve_tcnn, sizes[l], sizes[l]) * x[l];
    }
  }
  return dense_conv_matrix(weights.sol_rechannel, n, n, 1, 1) * x[0];
}

}  // namespace mgcnn::testing
