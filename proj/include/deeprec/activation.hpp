#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "deeprec/tensor.hpp"

namespace deeprec {

enum class Activation { Sigmoid, Tanh, Relu, Relu6, Elu, LRelu, Selu, Linear };

// Fixed self-normalizing constants.
inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

struct ActivationKind {
  Activation variant = Activation::Selu;
  double lrelu_slope = 0.01;
  double elu_alpha = 1.0;

  ActivationKind() = default;
  ActivationKind(Activation v, double slope = 0.01, double alpha = 1.0);

  /// Sigmoid and tanh have a range narrower than the ratings scale.
  bool bounded() const { return variant == Activation::Sigmoid || variant == Activation::Tanh; }

  friend bool operator==(const ActivationKind&, const ActivationKind&) = default;
};

std::string to_string(Activation a);
std::string to_string(const ActivationKind& kind);

/// Accepts the lower-case names used on the command line ("selu", "lrelu", ...).
ActivationKind parse_activation(std::string_view name);

const std::vector<Activation>& all_activations();

template <typename T>
T activation_apply(const ActivationKind& kind, T x);

/// Right-hand derivative at kinks.
template <typename T>
T activation_derivative(const ActivationKind& kind, T x);

template <typename T>
void activation_apply_inplace(const ActivationKind& kind, Matrix<T>& m);

/// out = f'(pre) elementwise, multiplied into grad.
template <typename T>
void activation_backward_inplace(const ActivationKind& kind, const Matrix<T>& pre, Matrix<T>& grad);

}  // namespace deeprec
