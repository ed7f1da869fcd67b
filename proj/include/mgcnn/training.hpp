/// @file training.hpp
/// @brief Unsupervised training of the learned solver: squared residual-norm
///        loss, Adam with a stepped learning-rate schedule, progressive grid
///        sizes, and fresh random rhs/coefficients every batch.
///
/// Right-hand sides are white noise (independent standard normal entries);
/// coefficient sources come from a DistributionSpec and pass through the
/// 10^(-r log10 Re) mapping. Training doubles the grid size, increments the
/// level and halves the batch every size_step epochs. Batch elements may be
/// evaluated on worker threads; all randomness is pre-drawn and gradients are
/// merged in index order, so results are bitwise independent of thread count.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mgcnn/autodiff.hpp"
#include "mgcnn/coeff_datasets.hpp"
#include "mgcnn/discretization.hpp"
#include "mgcnn/learned_solver.hpp"

namespace mgcnn {

enum class Precision { kF32, kF64 };

Precision parse_precision(const std::string& text);
std::string to_string(Precision p);

struct TrainConfig {
  int epochs = 50;
  int batches_per_epoch = 1000;
  double lr = 0.003;
  int lr_step_epochs = 2;
  double lr_gamma = 0.8;
  int size_step = 10;
  int initial_size = 31;
  int initial_level = 4;
  int initial_batch = 16;
  int max_size = 511;
  int min_batch = 2;
  double re_limit = 1000.0;
  int channels = 8;
  Precision precision = Precision::kF64;
  std::uint64_t seed = 0;
  double velocity_angle = 0.5;  // velocity = (sin a, cos a)
  DistributionSpec coef_distribution;

  void validate() const;
};

/// Grid size / level / batch for an epoch under the doubling schedule,
/// capped at max_size and floored at min_batch.
struct StagePlan {
  int size = 0;
  int level = 0;
  int batch = 0;
};
StagePlan stage_for_epoch(const TrainConfig& cfg, int epoch);

/// lr * gamma^floor(epoch / step).
double lr_schedule(int epoch, const TrainConfig& cfg);

template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<T>> m;  // aligned with the weight registry order
  std::vector<std::vector<T>> v;

  static AdamState init(const SolverWeights<T>& weights);
};

/// Standard bias-corrected Adam update, slot-aligned with the registry.
template <typename T>
void adam_step(SolverWeights<T>& weights, const SolverWeights<T>& grads, AdamState<T>& state,
               double lr);

/// Pairs every weight span with its gradient span for grad_check / optimizer
/// style iteration.
template <typename T>
std::vector<ParamSlot<T>> param_slots(SolverWeights<T>& weights, SolverWeights<T>& grads);

/// Records the solve phase on a tape for given per-level setup-output nodes;
/// returns the solver-output node. Shared by the loss graph and by tests
/// that differentiate the solve phase in isolation.
template <typename T>
typename Tape<T>::NodeId tape_solve_phase(Tape<T>& tape, const SolverWeights<T>& weights,
                                          SolverWeights<T>* grads,
                                          const std::vector<typename Tape<T>::NodeId>& setup_outs,
                                          typename Tape<T>::NodeId rhs_node, int level);

/// Builds the combined setup+solve graph on the tape and returns the loss
/// node ||rhs - A sol||^2 together with the solver-output node. Kernel and
/// bias gradients flow into `grads` when non-null.
template <typename T>
struct LossGraph {
  typename Tape<T>::NodeId loss;
  typename Tape<T>::NodeId sol;
};

template <typename T>
LossGraph<T> build_residual_loss(Tape<T>& tape, const SolverWeights<T>& weights,
                                 SolverWeights<T>* grads, const ProblemSpec<T>& spec,
                                 const Tensor<T>& rhs, int level,
                                 Tensor<T>* rhs_grad_sink = nullptr);

/// ||rhs - A sol||^2 for an externally supplied solution node (the residual
/// part of the loss in isolation).
template <typename T>
typename Tape<T>::NodeId residual_loss_of_sol(Tape<T>& tape, const ProblemSpec<T>& spec,
                                              typename Tape<T>::NodeId rhs_node,
                                              typename Tape<T>::NodeId sol_node);

/// Mean over the batch of per-instance losses; accumulates d(mean)/d(params)
/// into `grads` when non-null. Instances run on worker threads with private
/// gradient buffers merged in index order.
template <typename T>
double residual_loss(const SolverWeights<T>& weights, SolverWeights<T>* grads,
                     const std::vector<ProblemSpec<T>>& specs,
                     const std::vector<Tensor<T>>& rhs_batch, int level);

/// One history row per batch.
struct TrainLogRow {
  int epoch = 0;
  int batch = 0;
  double loss = 0.0;
  double lr = 0.0;
  int size = 0;
  int level = 0;
  int batch_size = 0;
  double seconds = 0.0;
  std::size_t peak_bytes = 0;
};

using TrainLogFn = std::function<void(const TrainLogRow&)>;

/// Thrown when a batch produces a non-finite loss; carries the batch seed so
/// the offending draw can be replayed.
struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(const std::string& msg, std::uint64_t batch_seed)
      : std::runtime_error(msg), batch_seed(batch_seed) {}
  std::uint64_t batch_seed;
};

template <typename T>
SolverWeights<T> train(const TrainConfig& cfg, const TrainLogFn& log = nullptr);

}  // namespace mgcnn
