#include "mgcnn/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace mgcnn {

template <typename T>
typename Tape<T>::NodeId Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::leaf(Tensor<T> value, Tensor<T>* grad_sink) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.grad_sink = grad_sink;
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::conv2d(NodeId x, const Kernel<T>& kernel,
                                         Kernel<T>* kernel_grad, int stride, int padding) {
  Node n;
  n.op = Op::kConv;
  n.a = x;
  n.kernel = &kernel;
  n.kernel_grad = kernel_grad;
  n.stride = stride;
  n.padding = padding;
  n.value = mgcnn::conv2d(nodes_[x].value, kernel, stride, padding);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::transposed_conv2d(NodeId x, const Kernel<T>& kernel,
                                                    Kernel<T>* kernel_grad) {
  Node n;
  n.op = Op::kTconv;
  n.a = x;
  n.kernel = &kernel;
  n.kernel_grad = kernel_grad;
  n.value = mgcnn::transposed_conv2d(nodes_[x].value, kernel);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::add(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = mgcnn::add(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::sub(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.value = mgcnn::sub(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::mul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = mgcnn::mul(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::scale(NodeId a, T factor) {
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.factor = factor;
  n.value = mgcnn::scale(nodes_[a].value, factor);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::bias_add(NodeId x, const std::vector<T>& bias,
                                           std::vector<T>* bias_grad) {
  const Tensor<T>& v = nodes_[x].value;
  if (static_cast<int>(bias.size()) != v.channels()) {
    throw std::invalid_argument("bias_add: bias length must equal channel count");
  }
  Node n;
  n.op = Op::kBias;
  n.a = x;
  n.bias = &bias;
  n.bias_grad = bias_grad;
  Tensor<T> y = v;
  for (int c = 0; c < y.channels(); ++c) {
    const T b = bias[c];
    for (int i = 0; i < y.height(); ++i) {
      T* row = y.row(c, i);
      for (int j = 0; j < y.width(); ++j) row[j] += b;
    }
  }
  n.value = std::move(y);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::tanh(NodeId a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = tanh_map(nodes_[a].value);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::sum(NodeId a) {
  Node n;
  n.op = Op::kSum;
  n.a = a;
  double acc = 0.0;
  for (const T& x : nodes_[a].value.flat()) acc += static_cast<double>(x);
  n.value = Tensor<T>(1, 1, 1);
  n.value.at(0, 0, 0) = static_cast<T>(acc);
  return push(std::move(n));
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::sum_squares(NodeId a) {
  Node n;
  n.op = Op::kSumSquares;
  n.a = a;
  double acc = 0.0;
  for (const T& x : nodes_[a].value.flat()) {
    acc += static_cast<double>(x) * static_cast<double>(x);
  }
  n.value = Tensor<T>(1, 1, 1);
  n.value.at(0, 0, 0) = static_cast<T>(acc);
  return push(std::move(n));
}

template <typename T>
void Tape<T>::accumulate(NodeId id, const Tensor<T>& g) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  auto dst = n.grad.flat();
  auto src = g.flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void Tape<T>::backward(NodeId loss, T seed) {
  const Tensor<T>& lv = nodes_[loss].value;
  if (lv.size() != 1) {
    throw std::invalid_argument("backward: loss node must be scalar");
  }
  Tensor<T> seed_t(1, 1, 1);
  seed_t.at(0, 0, 0) = seed;
  accumulate(loss, seed_t);

  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    const Tensor<T>& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        if (n.grad_sink) {
          if (n.grad_sink->empty()) *n.grad_sink = Tensor<T>(g.channels(), g.height(), g.width());
          auto dst = n.grad_sink->flat();
          auto src = g.flat();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
        break;
      case Op::kConv:
        accumulate(n.a, conv2d_input_backward(g, *n.kernel, n.stride, n.padding));
        if (n.kernel_grad) {
          conv2d_kernel_backward(nodes_[n.a].value, g, n.stride, n.padding, *n.kernel_grad);
        }
        break;
      case Op::kTconv:
        // The adjoint of y = K^T x is the stride-2 conv with the same kernel.
        accumulate(n.a, mgcnn::conv2d(g, *n.kernel, 2, 0));
        if (n.kernel_grad) {
          // dK[o,c,ki,kj] = sum_{i,j} x[o,i,j] * g[c,2i+ki,2j+kj]: the same
          // reduction as the stride-2 kernel backward with roles swapped.
          conv2d_kernel_backward(g, nodes_[n.a].value, 2, 0, *n.kernel_grad);
        }
        break;
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub:
        accumulate(n.a, g);
        accumulate(n.b, mgcnn::scale(g, T(-1)));
        break;
      case Op::kMul:
        accumulate(n.a, mgcnn::mul(g, nodes_[n.b].value));
        accumulate(n.b, mgcnn::mul(g, nodes_[n.a].value));
        break;
      case Op::kScale:
        accumulate(n.a, mgcnn::scale(g, n.factor));
        break;
      case Op::kBias: {
        accumulate(n.a, g);
        if (n.bias_grad) {
          for (int c = 0; c < g.channels(); ++c) {
            T acc = 0;
            for (int i = 0; i < g.height(); ++i) {
              const T* row = g.row(c, i);
              for (int j = 0; j < g.width(); ++j) acc += row[j];
            }
            (*n.bias_grad)[c] += acc;
          }
        }
        break;
      }
      case Op::kTanh: {
        // d tanh = 1 - tanh^2, using the saved output.
        Tensor<T> gx(g.channels(), g.height(), g.width());
        auto out = gx.flat();
        auto gg = g.flat();
        auto yy = n.value.flat();
        for (std::size_t i = 0; i < out.size(); ++i) {
          out[i] = gg[i] * (T(1) - yy[i] * yy[i]);
        }
        accumulate(n.a, gx);
        break;
      }
      case Op::kSum: {
        const Tensor<T>& av = nodes_[n.a].value;
        accumulate(n.a, Tensor<T>::constant(av.channels(), av.height(), av.width(),
                                            g.at(0, 0, 0)));
        break;
      }
      case Op::kSumSquares: {
        const T s = g.at(0, 0, 0);
        accumulate(n.a, mgcnn::scale(nodes_[n.a].value, T(2) * s));
        break;
      }
    }
  }
}

template <typename T>
GradCheckReport<T> grad_check(const std::function<T(bool with_grad)>& loss_fn,
                              std::vector<ParamSlot<T>> slots, T eps, double tol) {
  for (auto& slot : slots) {
    for (T& g : slot.grad) g = T(0);
  }
  const T base = loss_fn(true);
  if (!std::isfinite(static_cast<double>(base))) {
    throw std::runtime_error("grad_check: non-finite loss");
  }

  GradCheckReport<T> report;
  for (auto& slot : slots) {
    for (std::size_t i = 0; i < slot.value.size(); ++i) {
      const T saved = slot.value[i];
      slot.value[i] = saved + eps;
      const double f_plus = static_cast<double>(loss_fn(false));
      slot.value[i] = saved - eps;
      const double f_minus = static_cast<double>(loss_fn(false));
      slot.value[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw std::runtime_error("grad_check: non-finite loss during perturbation");
      }
      const double fd = (f_plus - f_minus) / (2.0 * static_cast<double>(eps));
      const double an = static_cast<double>(slot.grad[i]);
      const double denom = std::max({1.0, std::abs(fd), std::abs(an)});
      const double rel = std::abs(an - fd) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = slot.name;
        report.worst_index = i;
      }
    }
  }
  report.pass = report.max_rel_error < tol;
  return report;
}

#define MGCNN_INSTANTIATE(T)                                                       \
  template class Tape<T>;                                                          \
  template GradCheckReport<T> grad_check(const std::function<T(bool)>&,            \
                                         std::vector<ParamSlot<T>>, T, double);

MGCNN_INSTANTIATE(float)
MGCNN_INSTANTIATE(double)
#undef MGCNN_INSTANTIATE

}  // namespace mgcnn
