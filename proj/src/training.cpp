#include "mgcnn/training.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mgcnn/rng.hpp"
#include "mgcnn/threading.hpp"

namespace mgcnn {

Precision parse_precision(const std::string& text) {
  if (text == "f32" || text == "float" || text == "single") return Precision::kF32;
  if (text == "f64" || text == "double") return Precision::kF64;
  throw std::invalid_argument("unknown precision '" + text + "' (expected f32 or f64)");
}

std::string to_string(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

void TrainConfig::validate() const {
  if (epochs < 1 || batches_per_epoch < 1) throw std::invalid_argument("train: empty schedule");
  if (lr <= 0.0 || lr_gamma <= 0.0 || lr_step_epochs < 1) {
    throw std::invalid_argument("train: bad learning-rate schedule");
  }
  if (size_step < 1) throw std::invalid_argument("train: size_step must be >= 1");
  if (!is_pow2_minus_1(initial_size) || !is_pow2_minus_1(max_size) ||
      max_size < initial_size) {
    throw std::invalid_argument("train: sizes must be 2^k-1 with max_size >= initial_size");
  }
  if (initial_level < 1 || initial_batch < 1 || min_batch < 1 || channels < 1) {
    throw std::invalid_argument("train: level, batch and channels must be positive");
  }
  if (re_limit <= 1.0) throw std::invalid_argument("train: re_limit must exceed 1");
  coef_distribution.validate();
}

StagePlan stage_for_epoch(const TrainConfig& cfg, int epoch) {
  int max_stage = 0;
  for (int n = cfg.initial_size; n < cfg.max_size; n = 2 * n + 1) ++max_stage;
  const int stage = std::min(epoch / cfg.size_step, max_stage);

  StagePlan plan;
  plan.size = cfg.initial_size;
  for (int s = 0; s < stage; ++s) plan.size = 2 * plan.size + 1;
  plan.level = cfg.initial_level + stage;
  plan.batch = std::max(cfg.initial_batch >> stage, cfg.min_batch);
  return plan;
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: epoch must be >= 0");
  return cfg.lr * std::pow(cfg.lr_gamma, epoch / cfg.lr_step_epochs);
}

template <typename T>
AdamState<T> AdamState<T>::init(const SolverWeights<T>& weights) {
  AdamState<T> s;
  weights.for_each_param([&](const std::string&, std::span<const T> v) {
    s.m.emplace_back(v.size(), T(0));
    s.v.emplace_back(v.size(), T(0));
  });
  return s;
}

template <typename T>
void adam_step(SolverWeights<T>& weights, const SolverWeights<T>& grads, AdamState<T>& state,
               double lr) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  std::vector<std::span<const T>> grad_slots;
  grads.for_each_param([&](const std::string&, std::span<const T> g) { grad_slots.push_back(g); });

  std::size_t slot = 0;
  weights.for_each_param([&](const std::string&, std::span<T> w) {
    std::span<const T> g = grad_slots[slot];
    std::vector<T>& m = state.m[slot];
    std::vector<T>& v = state.v[slot];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = state.beta1 * static_cast<double>(m[i]) + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * static_cast<double>(v[i]) + (1.0 - state.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * m_hat / (std::sqrt(v_hat) + state.eps));
    }
    ++slot;
  });
}

namespace {

template <typename T>
Kernel<T> stencil_kernel(const std::array<double, 9>& s) {
  std::array<T, 9> taps;
  for (int i = 0; i < 9; ++i) taps[i] = static_cast<T>(s[i]);
  return Kernel<T>::from_stencil(taps);
}

// Tape mirror of learned_solver's nonlinear_resnet.
template <typename T>
typename Tape<T>::NodeId tape_resnet(Tape<T>& tape, const SolverWeights<T>& w,
                                     SolverWeights<T>* grads, typename Tape<T>::NodeId x) {
  for (int l = 0; l < kResnetLayers; ++l) {
    auto h = tape.conv2d(x, w.setup_resnet_kernel[l],
                         grads ? &grads->setup_resnet_kernel[l] : nullptr, 1, 1);
    h = tape.bias_add(h, w.setup_resnet_bias[l], grads ? &grads->setup_resnet_bias[l] : nullptr);
    x = tape.add(tape.tanh(h), x);
  }
  return x;
}

}  // namespace

template <typename T>
typename Tape<T>::NodeId residual_loss_of_sol(Tape<T>& tape, const ProblemSpec<T>& spec,
                                              typename Tape<T>::NodeId rhs_node,
                                              typename Tape<T>::NodeId sol_node) {
  UpwindStencil s = build_upwind_stencil(spec.velocity_x, spec.velocity_y);
  // Constant (non-learnable) kernels: gradients still flow through to sol.
  const Kernel<T>& lap_kernel = tape.own_kernel(stencil_kernel<T>(s.laplacian));
  const Kernel<T>& upw_kernel = tape.own_kernel(stencil_kernel<T>(s.upwind));

  auto coef_node = tape.constant(spec.coef);
  auto lap = tape.conv2d(sol_node, lap_kernel, nullptr, 1, 1);
  auto upw = tape.conv2d(sol_node, upw_kernel, nullptr, 1, 1);
  auto a_sol = tape.add(tape.mul(coef_node, lap), upw);
  return tape.sum_squares(tape.sub(rhs_node, a_sol));
}

template <typename T>
std::vector<ParamSlot<T>> param_slots(SolverWeights<T>& weights, SolverWeights<T>& grads) {
  std::vector<ParamSlot<T>> slots;
  weights.for_each_param([&](const std::string& name, std::span<T> v) {
    slots.push_back({name, v, {}});
  });
  std::size_t i = 0;
  grads.for_each_param([&](const std::string&, std::span<T> g) { slots[i++].grad = g; });
  return slots;
}

template <typename T>
typename Tape<T>::NodeId tape_solve_phase(Tape<T>& tape, const SolverWeights<T>& weights,
                                          SolverWeights<T>* grads,
                                          const std::vector<typename Tape<T>::NodeId>& setup_outs,
                                          typename Tape<T>::NodeId rhs_node, int level) {
  using NodeId = typename Tape<T>::NodeId;
  auto kg = [&](Kernel<T> SolverWeights<T>::* member) -> Kernel<T>* {
    return grads ? &(grads->*member) : nullptr;
  };

  std::vector<NodeId> x(level);
  x[0] = tape.conv2d(rhs_node, weights.rhs_rechannel, kg(&SolverWeights<T>::rhs_rechannel), 1, 1);
  for (int l = 0; l < level; ++l) {
    auto h = tape.conv2d(tape.mul(setup_outs[l], x[l]), weights.k_down,
                         kg(&SolverWeights<T>::k_down), 1, 1);
    x[l] = tape.add(h, x[l]);
    if (l + 1 < level) {
      x[l + 1] = tape.conv2d(x[l], weights.solve_rcnn, kg(&SolverWeights<T>::solve_rcnn), 2, 0);
    }
  }
  for (int l = level - 1; l >= 0; --l) {
    auto h = tape.conv2d(tape.mul(setup_outs[l], x[l]), weights.k_up,
                         kg(&SolverWeights<T>::k_up), 1, 1);
    x[l] = tape.add(h, x[l]);
    if (l > 0) {
      x[l - 1] = tape.add(
          x[l - 1], tape.transposed_conv2d(x[l], weights.solve_tcnn,
                                           kg(&SolverWeights<T>::solve_tcnn)));
    }
  }
  return tape.conv2d(x[0], weights.sol_rechannel, kg(&SolverWeights<T>::sol_rechannel), 1, 1);
}

template <typename T>
LossGraph<T> build_residual_loss(Tape<T>& tape, const SolverWeights<T>& weights,
                                 SolverWeights<T>* grads, const ProblemSpec<T>& spec,
                                 const Tensor<T>& rhs, int level, Tensor<T>* rhs_grad_sink) {
  using NodeId = typename Tape<T>::NodeId;
  auto kg = [&](Kernel<T> SolverWeights<T>::* member) -> Kernel<T>* {
    return grads ? &(grads->*member) : nullptr;
  };

  // Setup phase.
  auto coef_node = tape.constant(spec.coef);
  NodeId coef_l = tape.conv2d(coef_node, weights.coef_rechannel,
                              kg(&SolverWeights<T>::coef_rechannel), 1, 1);
  std::vector<NodeId> setup_outs;
  setup_outs.reserve(level);
  for (int l = 0; l < level; ++l) {
    setup_outs.push_back(tape_resnet(tape, weights, grads, coef_l));
    if (l + 1 < level) {
      coef_l = tape.conv2d(coef_l, weights.setup_rcnn, kg(&SolverWeights<T>::setup_rcnn), 2, 0);
    }
  }

  auto rhs_node = tape.leaf(rhs, rhs_grad_sink);
  LossGraph<T> graph;
  graph.sol = tape_solve_phase(tape, weights, grads, setup_outs, rhs_node, level);
  graph.loss = residual_loss_of_sol(tape, spec, rhs_node, graph.sol);
  return graph;
}

template <typename T>
double residual_loss(const SolverWeights<T>& weights, SolverWeights<T>* grads,
                     const std::vector<ProblemSpec<T>>& specs,
                     const std::vector<Tensor<T>>& rhs_batch, int level) {
  if (specs.size() != rhs_batch.size() || specs.empty()) {
    throw std::invalid_argument("residual_loss: batch mismatch");
  }
  const int n = static_cast<int>(specs.size());
  const T seed = static_cast<T>(1.0 / n);

  std::vector<double> losses(n, 0.0);
  std::vector<SolverWeights<T>> private_grads;
  if (grads) {
    private_grads.assign(n, SolverWeights<T>::zeros(weights.channels));
  }

  parallel_for(n, [&](int i) {
    Tape<T> tape;
    SolverWeights<T>* sink = grads ? &private_grads[i] : nullptr;
    LossGraph<T> g = build_residual_loss(tape, weights, sink, specs[i], rhs_batch[i], level);
    losses[i] = static_cast<double>(tape.value(g.loss).at(0, 0, 0));
    if (grads) tape.backward(g.loss, seed);
  });

  if (grads) {
    // Index-order merge keeps gradients bitwise independent of thread count.
    std::vector<std::span<T>> dst;
    grads->for_each_param([&](const std::string&, std::span<T> v) { dst.push_back(v); });
    for (int i = 0; i < n; ++i) {
      std::size_t slot = 0;
      private_grads[i].for_each_param([&](const std::string&, std::span<const T> src) {
        for (std::size_t k = 0; k < src.size(); ++k) dst[slot][k] += src[k];
        ++slot;
      });
    }
  }

  double total = 0.0;
  for (double l : losses) total += l;
  return total / n;
}

template <typename T>
SolverWeights<T> train(const TrainConfig& cfg, const TrainLogFn& log) {
  cfg.validate();

  Rng master(cfg.seed);
  SolverWeights<T> weights = init_weights<T>(cfg.channels, master.derive_seed());
  SolverWeights<T> grads = SolverWeights<T>::zeros(cfg.channels);
  AdamState<T> adam = AdamState<T>::init(weights);
  CorpusCache corpora = open_corpora(cfg.coef_distribution);

  const double vx = std::sin(cfg.velocity_angle);
  const double vy = std::cos(cfg.velocity_angle);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const StagePlan plan = stage_for_epoch(cfg, epoch);
    const double lr = lr_schedule(epoch, cfg);

    for (int batch = 0; batch < cfg.batches_per_epoch; ++batch) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::uint64_t batch_seed = master.derive_seed();
      Rng batch_rng(batch_seed);

      // All randomness is drawn here, sequentially, before any parallel work.
      std::vector<ProblemSpec<T>> specs(plan.batch);
      std::vector<Tensor<T>> rhs(plan.batch);
      for (int i = 0; i < plan.batch; ++i) {
        Tensor<T> random01 =
            sample_random_tensor<T>(cfg.coef_distribution, plan.size, batch_rng, &corpora);
        specs[i].grid_n = plan.size;
        specs[i].velocity_x = vx;
        specs[i].velocity_y = vy;
        specs[i].re_limit = cfg.re_limit;
        specs[i].coef = coef_from_random(random01, cfg.re_limit);
        rhs[i] = Tensor<T>(1, plan.size, plan.size);
        fill_normal(rhs[i], batch_rng);
      }

      grads.fill(T(0));
      const double loss = residual_loss(weights, &grads, specs, rhs, plan.level);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + " batch " + std::to_string(batch) +
                                   " (batch seed " + std::to_string(batch_seed) + ")",
                               batch_seed);
      }
      adam_step(weights, grads, adam, lr);

      if (log) {
        TrainLogRow row;
        row.epoch = epoch;
        row.batch = batch;
        row.loss = loss;
        row.lr = lr;
        row.size = plan.size;
        row.level = plan.level;
        row.batch_size = plan.batch;
        row.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.peak_bytes = process_peak_rss_bytes();
        log(row);
      }
    }
  }
  return weights;
}

#define MGCNN_INSTANTIATE(T)                                                                \
  template struct AdamState<T>;                                                             \
  template std::vector<ParamSlot<T>> param_slots(SolverWeights<T>&, SolverWeights<T>&);     \
  template void adam_step(SolverWeights<T>&, const SolverWeights<T>&, AdamState<T>&,        \
                          double);                                                          \
  template typename Tape<T>::NodeId residual_loss_of_sol(Tape<T>&, const ProblemSpec<T>&,   \
                                                         typename Tape<T>::NodeId,          \
                                                         typename Tape<T>::NodeId);         \
  template typename Tape<T>::NodeId tape_solve_phase(                                       \
      Tape<T>&, const SolverWeights<T>&, SolverWeights<T>*,                                 \
      const std::vector<typename Tape<T>::NodeId>&, typename Tape<T>::NodeId, int);         \
  template LossGraph<T> build_residual_loss(Tape<T>&, const SolverWeights<T>&,              \
                                            SolverWeights<T>*, const ProblemSpec<T>&,       \
                                            const Tensor<T>&, int, Tensor<T>*);             \
  template double residual_loss(const SolverWeights<T>&, SolverWeights<T>*,                 \
                                const std::vector<ProblemSpec<T>>&,                         \
                                const std::vector<Tensor<T>>&, int);                        \
  template SolverWeights<T> train(const TrainConfig&, const TrainLogFn&);

MGCNN_INSTANTIATE(float)
MGCNN_INSTANTIATE(double)
#undef MGCNN_INSTANTIATE

}  // namespace mgcnn
