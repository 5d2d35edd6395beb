#include "deeprec/optimizer.hpp"

#include <stdexcept>

namespace deeprec {

namespace {

template <typename T>
void check_aligned(const Parameters<T>& a, const Parameters<T>& b, const char* what) {
  if (a.weights.size() != b.weights.size() || a.biases.size() != b.biases.size()) {
    throw std::invalid_argument(std::string(what) + ": tensor count mismatch");
  }
  for (std::size_t i = 0; i < a.weights.size(); ++i) require_same_shape(a.weights[i], b.weights[i], what);
  for (std::size_t i = 0; i < a.biases.size(); ++i) require_same_shape(a.biases[i], b.biases[i], what);
}

}  // namespace

template <typename T>
SgdMomentum<T>::SgdMomentum(const Parameters<T>& like, double learning_rate, double momentum)
    : velocity_(like.zeros_like()), learning_rate_(learning_rate), momentum_(momentum) {
  require(learning_rate_ > 0.0, "learning rate must be positive");
  require(momentum_ >= 0.0 && momentum_ < 1.0, "momentum must lie in [0, 1)");
}

template <typename T>
SgdMomentum<T> SgdMomentum<T>::resume(Parameters<T> velocity, double learning_rate, double momentum) {
  SgdMomentum<T> opt(velocity, learning_rate, momentum);
  opt.velocity_ = std::move(velocity);
  return opt;
}

template <typename T>
void SgdMomentum<T>::step(Parameters<T>& params, const Parameters<T>& grads) {
  check_aligned(params, grads, "sgd_momentum_step");
  check_aligned(params, velocity_, "sgd_momentum_step");
  if (!grads.all_finite()) throw DivergenceError("non-finite gradient in optimizer step");

  const T mu = static_cast<T>(momentum_);
  const T lr = static_cast<T>(learning_rate_);
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    velocity_.weights[i] = mu * velocity_.weights[i] - lr * grads.weights[i];
    params.weights[i] += velocity_.weights[i];
  }
  for (std::size_t i = 0; i < params.biases.size(); ++i) {
    velocity_.biases[i] = mu * velocity_.biases[i] - lr * grads.biases[i];
    params.biases[i] += velocity_.biases[i];
  }
  ++steps_;
}

template class SgdMomentum<float>;
template class SgdMomentum<double>;

}  // namespace deeprec
