#include "deeprec/activation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace deeprec {

ActivationKind::ActivationKind(Activation v, double slope, double alpha)
    : variant(v), lrelu_slope(slope), elu_alpha(alpha) {
  require(lrelu_slope > 0.0, "lrelu slope must be positive");
  require(elu_alpha > 0.0, "elu alpha must be positive");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Relu6: return "relu6";
    case Activation::Elu: return "elu";
    case Activation::LRelu: return "lrelu";
    case Activation::Selu: return "selu";
    case Activation::Linear: return "linear";
  }
  return "unknown";
}

std::string to_string(const ActivationKind& kind) { return to_string(kind.variant); }

ActivationKind parse_activation(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Activation a : all_activations()) {
    if (to_string(a) == lower) return ActivationKind(a);
  }
  if (lower == "none" || lower == "identity") return ActivationKind(Activation::Linear);
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

const std::vector<Activation>& all_activations() {
  static const std::vector<Activation> kinds = {
      Activation::Sigmoid, Activation::Tanh, Activation::Relu,  Activation::Relu6,
      Activation::Elu,     Activation::LRelu, Activation::Selu, Activation::Linear};
  return kinds;
}

template <typename T>
T activation_apply(const ActivationKind& kind, T x) {
  switch (kind.variant) {
    case Activation::Sigmoid:
      return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
    case Activation::Tanh:
      return std::tanh(x);
    case Activation::Relu:
      return x > T(0) ? x : T(0);
    case Activation::Relu6:
      return std::min(std::max(x, T(0)), T(6));
    case Activation::Elu:
      return x > T(0) ? x : T(kind.elu_alpha) * std::expm1(x);
    case Activation::LRelu:
      return x > T(0) ? x : T(kind.lrelu_slope) * x;
    case Activation::Selu:
      return x > T(0) ? T(kSeluLambda) * x : T(kSeluLambda * kSeluAlpha) * std::expm1(x);
    case Activation::Linear:
      return x;
  }
  return x;
}

template <typename T>
T activation_derivative(const ActivationKind& kind, T x) {
  switch (kind.variant) {
    case Activation::Sigmoid: {
      const T s = activation_apply(kind, x);
      return s * (T(1) - s);
    }
    case Activation::Tanh: {
      const T t = std::tanh(x);
      return T(1) - t * t;
    }
    case Activation::Relu:
      return x >= T(0) ? T(1) : T(0);
    case Activation::Relu6:
      return (x >= T(0) && x < T(6)) ? T(1) : T(0);
    case Activation::Elu:
      return x >= T(0) ? T(1) : T(kind.elu_alpha) * std::exp(x);
    case Activation::LRelu:
      return x >= T(0) ? T(1) : T(kind.lrelu_slope);
    case Activation::Selu:
      return x >= T(0) ? T(kSeluLambda) : T(kSeluLambda * kSeluAlpha) * std::exp(x);
    case Activation::Linear:
      return T(1);
  }
  return T(1);
}

template <typename T>
void activation_apply_inplace(const ActivationKind& kind, Matrix<T>& m) {
  auto x = m.array();
  const T zero(0);
  switch (kind.variant) {
    case Activation::Sigmoid:
      x = T(1) / (T(1) + (-x).exp());
      return;
    case Activation::Tanh:
      x = x.tanh();
      return;
    case Activation::Relu:
      x = x.max(zero);
      return;
    case Activation::Relu6:
      x = x.max(zero).min(T(6));
      return;
    case Activation::LRelu:
      x = x.max(zero) + T(kind.lrelu_slope) * x.min(zero);
      return;
    case Activation::Elu:
      x = x.max(zero) + T(kind.elu_alpha) * (x.min(zero).exp() - T(1));
      return;
    case Activation::Selu:
      x = T(kSeluLambda) * x.max(zero) + T(kSeluLambda * kSeluAlpha) * (x.min(zero).exp() - T(1));
      return;
    case Activation::Linear:
      return;
  }
}

template <typename T>
void activation_backward_inplace(const ActivationKind& kind, const Matrix<T>& pre, Matrix<T>& grad) {
  require_same_shape(pre, grad, "activation_backward");
  using Arr = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto z = pre.array();
  auto g = grad.array();
  const Index r = pre.rows();
  const Index c = pre.cols();
  const T zero(0);
  // select() only vectorizes with plain operands, hence the Constant arrays
  auto constant = [&](T v) { return Arr::Constant(r, c, v); };
  switch (kind.variant) {
    case Activation::Sigmoid: {
      const Arr s = T(1) / (T(1) + (-z).exp());
      g *= s * (T(1) - s);
      return;
    }
    case Activation::Tanh:
      g *= T(1) - z.tanh().square();
      return;
    case Activation::Relu:
      g *= (z >= zero).select(constant(T(1)), constant(zero));
      return;
    case Activation::Relu6:
      g *= (z >= zero).select(constant(T(1)), constant(zero));
      g *= (z < T(6)).select(constant(T(1)), constant(zero));
      return;
    case Activation::LRelu:
      g *= (z >= zero).select(constant(T(1)), constant(T(kind.lrelu_slope)));
      return;
    case Activation::Elu: {
      const Arr e = T(kind.elu_alpha) * z.min(zero).exp();
      g *= (z >= zero).select(constant(T(1)), e);
      return;
    }
    case Activation::Selu: {
      const Arr e = T(kSeluLambda * kSeluAlpha) * z.min(zero).exp();
      g *= (z >= zero).select(constant(T(kSeluLambda)), e);
      return;
    }
    case Activation::Linear:
      return;
  }
}

#define DEEPREC_INSTANTIATE(T)                                                          \
  template T activation_apply<T>(const ActivationKind&, T);                              \
  template T activation_derivative<T>(const ActivationKind&, T);                         \
  template void activation_apply_inplace<T>(const ActivationKind&, Matrix<T>&);          \
  template void activation_backward_inplace<T>(const ActivationKind&, const Matrix<T>&, \
                                               Matrix<T>&);
DEEPREC_INSTANTIATE(float)
DEEPREC_INSTANTIATE(double)
#undef DEEPREC_INSTANTIATE

}  // namespace deeprec
