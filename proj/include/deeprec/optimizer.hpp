#pragma once

#include <cstddef>

#include "deeprec/errors.hpp"
#include "deeprec/model.hpp"

namespace deeprec {

/// Classical momentum: v <- mu v - lr g, p <- p + v.
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(const Parameters<T>& like, double learning_rate, double momentum);
  /// Resume from a saved velocity.
  static SgdMomentum resume(Parameters<T> velocity, double learning_rate, double momentum);

  /// Throws DivergenceError on a non-finite gradient, before touching params.
  void step(Parameters<T>& params, const Parameters<T>& grads);

  const Parameters<T>& velocity() const { return velocity_; }
  double learning_rate() const { return learning_rate_; }
  double momentum() const { return momentum_; }
  std::size_t steps() const { return steps_; }

 private:
  Parameters<T> velocity_;
  double learning_rate_;
  double momentum_;
  std::size_t steps_ = 0;
};

}  // namespace deeprec
