#include "deeprec/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace deeprec {

namespace {

template <typename T>
double rated_count(const Matrix<T>& predicted, const Matrix<T>& target, const Matrix<T>& mask,
                   const char* what) {
  require_same_shape(predicted, target, what);
  require_same_shape(predicted, mask, what);
  const double count = mask.template cast<double>().sum();
  if (!(count > 0.0)) throw std::invalid_argument(std::string(what) + ": mask has no rated entries");
  return count;
}

}  // namespace

template <typename T>
double masked_mse(const Matrix<T>& predicted, const Matrix<T>& target, const Matrix<T>& mask) {
  const double count = rated_count(predicted, target, mask, "masked_mse");
  double sum = 0.0;
  const T* y = predicted.data();
  const T* r = target.data();
  const T* m = mask.data();
  for (Index i = 0; i < predicted.size(); ++i) {
    if (m[i] != T(0)) {
      const double d = static_cast<double>(r[i]) - static_cast<double>(y[i]);
      sum += static_cast<double>(m[i]) * d * d;
    }
  }
  return sum / count;
}

template <typename T>
double masked_mse_with_gradient(const Matrix<T>& predicted, const Matrix<T>& target,
                                const Matrix<T>& mask, Matrix<T>& gradient) {
  const double count = rated_count(predicted, target, mask, "masked_mse_gradient");
  gradient.resize(predicted.rows(), predicted.cols());
  const double scale = 2.0 / count;
  double sum = 0.0;
  const T* y = predicted.data();
  const T* r = target.data();
  const T* m = mask.data();
  T* g = gradient.data();
  for (Index i = 0; i < predicted.size(); ++i) {
    if (m[i] != T(0)) {
      const double d = static_cast<double>(y[i]) - static_cast<double>(r[i]);
      sum += static_cast<double>(m[i]) * d * d;
      g[i] = static_cast<T>(scale * static_cast<double>(m[i]) * d);
    } else {
      g[i] = T(0);
    }
  }
  return sum / count;
}

template <typename T>
Matrix<T> masked_mse_gradient(const Matrix<T>& predicted, const Matrix<T>& target,
                              const Matrix<T>& mask) {
  Matrix<T> gradient;
  masked_mse_with_gradient(predicted, target, mask, gradient);
  return gradient;
}

double rmse_from_mmse(double mmse) {
  if (!(mmse >= 0.0)) throw std::invalid_argument("rmse_from_mmse: negative or NaN input");
  return std::sqrt(mmse);
}

template double masked_mse<float>(const Matrix<float>&, const Matrix<float>&, const Matrix<float>&);
template double masked_mse<double>(const Matrix<double>&, const Matrix<double>&,
                                   const Matrix<double>&);
template Matrix<float> masked_mse_gradient<float>(const Matrix<float>&, const Matrix<float>&,
                                                  const Matrix<float>&);
template Matrix<double> masked_mse_gradient<double>(const Matrix<double>&, const Matrix<double>&,
                                                    const Matrix<double>&);
template double masked_mse_with_gradient<float>(const Matrix<float>&, const Matrix<float>&,
                                                const Matrix<float>&, Matrix<float>&);
template double masked_mse_with_gradient<double>(const Matrix<double>&, const Matrix<double>&,
                                                 const Matrix<double>&, Matrix<double>&);

}  // namespace deeprec
