/// @file autodiff.hpp
/// @brief Reverse-mode differentiation over the fixed op set: conv2d,
///        transposed conv2d, elementwise add/sub/mul, per-channel bias,
///        tanh, scale and the sum-of-squares reduction.
///
/// A Tape records forward values in topological order; one backward pass from
/// a scalar loss node accumulates (+=) gradients into the kernel/bias buffers
/// registered with each node. Gradients are never zeroed implicitly: running
/// backward twice doubles them, and optimizer loops zero explicitly between
/// steps. Graphs are small at training sizes, so every forward value is kept
/// (no checkpointing). A Tape is single-threaded; distinct tapes over shared
/// read-only parameters may run concurrently as long as gradient accumulation
/// into shared buffers is serialized by the caller.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mgcnn/tensor.hpp"

namespace mgcnn {

template <typename T>
class Tape {
 public:
  using NodeId = std::int32_t;

  /// Leaf with no gradient flow (constants: coefficients, stencil inputs).
  NodeId constant(Tensor<T> value);

  /// Leaf whose gradient, if requested, is accumulated into *grad_sink.
  NodeId leaf(Tensor<T> value, Tensor<T>* grad_sink = nullptr);

  /// Stores a constant (non-learnable) kernel with a lifetime tied to the
  /// tape, for graphs that convolve with fixed stencils.
  const Kernel<T>& own_kernel(Kernel<T> kernel) {
    owned_kernels_.push_back(std::move(kernel));
    return owned_kernels_.back();
  }

  /// conv with an optionally learnable kernel; pass kernel_grad = nullptr for
  /// constant kernels (e.g. the discretized operator inside the loss).
  NodeId conv2d(NodeId x, const Kernel<T>& kernel, Kernel<T>* kernel_grad, int stride,
                int padding);
  NodeId transposed_conv2d(NodeId x, const Kernel<T>& kernel, Kernel<T>* kernel_grad);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, T factor);
  NodeId bias_add(NodeId x, const std::vector<T>& bias, std::vector<T>* bias_grad);
  NodeId tanh(NodeId a);

  /// Sum of entries as a 1x1x1 node.
  NodeId sum(NodeId a);

  /// Sum of squared entries as a 1x1x1 node.
  NodeId sum_squares(NodeId a);

  const Tensor<T>& value(NodeId id) const { return nodes_[id].value; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Reverse pass from a scalar node, seeding dL/dloss = seed.
  void backward(NodeId loss, T seed = T(1));

 private:
  enum class Op {
    kLeaf,
    kConv,
    kTconv,
    kAdd,
    kSub,
    kMul,
    kScale,
    kBias,
    kTanh,
    kSum,
    kSumSquares,
  };

  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    Tensor<T> value;
    Tensor<T> grad;  // allocated on first touch during backward
    const Kernel<T>* kernel = nullptr;
    Kernel<T>* kernel_grad = nullptr;
    const std::vector<T>* bias = nullptr;
    std::vector<T>* bias_grad = nullptr;
    Tensor<T>* grad_sink = nullptr;
    T factor = T(0);
    int stride = 1;
    int padding = 1;
  };

  NodeId push(Node node);
  void accumulate(NodeId id, const Tensor<T>& g);

  std::vector<Node> nodes_;
  std::deque<Kernel<T>> owned_kernels_;  // stable addresses for node pointers
};

/// One named parameter span paired with its gradient accumulator; the unit
/// grad_check and the optimizer operate on.
template <typename T>
struct ParamSlot {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
};

template <typename T>
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  bool pass = false;
};

/// Compares analytic gradients against central finite differences
/// (f(p+eps) - f(p-eps)) / (2 eps) for every entry of every slot.
///
/// `loss_fn(with_grad)` must rebuild the graph from the current parameter
/// values, return the loss, and when with_grad is set run backward into the
/// slot gradients (which grad_check zeroes first). The error denominator is
/// floored at 1 (mixed absolute/relative comparison), the usual gradcheck
/// convention since finite-difference noise is absolute in the loss scale.
template <typename T>
GradCheckReport<T> grad_check(const std::function<T(bool with_grad)>& loss_fn,
                              std::vector<ParamSlot<T>> slots, T eps, double tol);

}  // namespace mgcnn
