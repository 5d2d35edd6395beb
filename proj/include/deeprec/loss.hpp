#pragma once

#include "deeprec/tensor.hpp"

namespace deeprec {

/// Sum over the batch of m * (r - y)^2 divided by the number of rated entries.
/// Accumulates in double for either precision.
template <typename T>
double masked_mse(const Matrix<T>& predicted, const Matrix<T>& target, const Matrix<T>& mask);

/// d masked_mse / d predicted = 2 m (y - r) / sum(m); zero off the mask.
template <typename T>
Matrix<T> masked_mse_gradient(const Matrix<T>& predicted, const Matrix<T>& target,
                              const Matrix<T>& mask);

/// Loss and gradient in one pass.
template <typename T>
double masked_mse_with_gradient(const Matrix<T>& predicted, const Matrix<T>& target,
                                const Matrix<T>& mask, Matrix<T>& gradient);

double rmse_from_mmse(double mmse);

}  // namespace deeprec
