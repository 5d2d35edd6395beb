#include "deeprec/model.hpp"

#include <cmath>
#include <stdexcept>

namespace deeprec {

namespace {

// Rating batches are mostly zeros; the first layer skips them.
template <typename T>
bool mostly_zero(const Matrix<T>& x) {
  const Index n = x.size();
  Index nnz = 0;
  const T* d = x.data();
  for (Index i = 0; i < n; ++i) nnz += d[i] != T(0);
  return nnz * 8 < n;
}

// z = x * w^T for a sparse x, with w stored [out x in].
template <typename T>
void sparse_times_transpose(const Matrix<T>& x, const Matrix<T>& w, Matrix<T>& z) {
  const Matrix<T> wt = w.transpose();
  z.setZero();
  for (Index r = 0; r < x.rows(); ++r) {
    const T* row = x.data() + r * x.cols();
    for (Index j = 0; j < x.cols(); ++j) {
      if (row[j] != T(0)) z.row(r).noalias() += row[j] * wt.row(j);
    }
  }
}

// grad += g^T x for a sparse x.
template <typename T>
void accumulate_sparse_outer(const Matrix<T>& g, const Matrix<T>& x, Matrix<T>& grad) {
  Matrix<T> gt = Matrix<T>::Zero(x.cols(), g.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const T* row = x.data() + r * x.cols();
    for (Index j = 0; j < x.cols(); ++j) {
      if (row[j] != T(0)) gt.row(j).noalias() += row[j] * g.row(r);
    }
  }
  grad.noalias() += gt.transpose();
}

}  // namespace

template <typename T>
Parameters<T> Parameters<T>::zeros_like() const {
  Parameters<T> z;
  for (const auto& w : weights) z.weights.push_back(Matrix<T>::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) z.biases.push_back(RowVector<T>::Zero(b.size()));
  return z;
}

template <typename T>
std::size_t Parameters<T>::size() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

template <typename T>
bool Parameters<T>::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

template <typename T>
void Parameters<T>::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

template <typename T>
Matrix<T> init_xavier(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
  require(out_dim > 0 && in_dim > 0, "init_xavier: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  Matrix<T> w(static_cast<Index>(out_dim), static_cast<Index>(in_dim));
  T* data = w.data();
  for (Index i = 0; i < w.size(); ++i) data[i] = static_cast<T>(rng.uniform(-bound, bound));
  return w;
}

template <typename T>
Matrix<T> init_xavier(std::size_t out_dim, std::size_t in_dim, std::uint64_t seed) {
  Rng rng(seed);
  return init_xavier<T>(out_dim, in_dim, rng);
}

namespace {

ActivationKind output_activation_for(const ActivationKind& kind) {
  return kind.bounded() ? ActivationKind(Activation::Linear) : kind;
}

}  // namespace

template <typename T>
Autoencoder<T>::Autoencoder(ArchitectureSpec spec, std::size_t n_items, std::uint64_t seed)
    : spec_(std::move(spec)), n_items_(n_items) {
  spec_.validate();
  require(n_items_ > 0, "model needs at least one item");
  dims_ = spec_.layer_dims(n_items_);
  output_activation_ = output_activation_for(spec_.activation);

  Rng rng(seed);
  const std::size_t stored = spec_.tied ? num_encoder_layers() : num_layers();
  for (std::size_t l = 0; l < stored; ++l) {
    params_.weights.push_back(init_xavier<T>(dims_[l + 1], dims_[l], rng));
  }
  for (std::size_t l = 0; l < num_layers(); ++l) {
    params_.biases.push_back(RowVector<T>::Zero(static_cast<Index>(dims_[l + 1])));
  }
}

template <typename T>
Autoencoder<T>::Autoencoder(ArchitectureSpec spec, std::size_t n_items, Parameters<T> params)
    : spec_(std::move(spec)), n_items_(n_items), params_(std::move(params)) {
  spec_.validate();
  require(n_items_ > 0, "model needs at least one item");
  dims_ = spec_.layer_dims(n_items_);
  output_activation_ = output_activation_for(spec_.activation);
  check_params();
}

template <typename T>
void Autoencoder<T>::check_params() const {
  const std::size_t stored = spec_.tied ? num_encoder_layers() : num_layers();
  require(params_.weights.size() == stored, "parameter set has the wrong number of weights");
  require(params_.biases.size() == num_layers(), "parameter set has the wrong number of biases");
  for (std::size_t l = 0; l < stored; ++l) {
    require(params_.weights[l].rows() == static_cast<Index>(dims_[l + 1]) &&
                params_.weights[l].cols() == static_cast<Index>(dims_[l]),
            "weight " + std::to_string(l) + " does not match the architecture");
  }
  for (std::size_t l = 0; l < num_layers(); ++l) {
    require(params_.biases[l].size() == static_cast<Index>(dims_[l + 1]),
            "bias " + std::to_string(l) + " does not match the architecture");
  }
}

template <typename T>
const ActivationKind& Autoencoder<T>::layer_activation(std::size_t layer) const {
  return layer + 1 == num_layers() ? output_activation_ : spec_.activation;
}

template <typename T>
std::size_t Autoencoder<T>::weight_slot(std::size_t layer) const {
  const std::size_t e = num_encoder_layers();
  if (!spec_.tied || layer < e) return layer;
  return 2 * e - 1 - layer;
}

template <typename T>
bool Autoencoder<T>::weight_transposed(std::size_t layer) const {
  return spec_.tied && layer >= num_encoder_layers();
}

template <typename T>
Matrix<T> Autoencoder<T>::layer_weight(std::size_t layer) const {
  const Matrix<T>& w = params_.weights[weight_slot(layer)];
  if (weight_transposed(layer)) return w.transpose();
  return w;
}

template <typename T>
ForwardResult<T> Autoencoder<T>::run(const Matrix<T>& input, Mode mode, Rng* rng,
                                     const std::optional<DropoutMask<T>>* replay) const {
  if (input.cols() != static_cast<Index>(n_items_)) {
    throw std::invalid_argument("forward: input has " + std::to_string(input.cols()) +
                                " columns, model expects " + std::to_string(n_items_));
  }
  const std::size_t layers = num_layers();
  const std::size_t coding = num_encoder_layers() - 1;
  const Index rows = input.rows();

  ForwardResult<T> result;
  ForwardTape<T>& tape = result.tape;
  tape.batch_rows = rows;
  tape.inputs.reserve(layers);
  tape.pre_activations.reserve(layers);

  tape.inputs.push_back(input);
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix<T>& h = tape.inputs[l];
    const Matrix<T>& w = params_.weights[weight_slot(l)];
    Matrix<T> z(rows, static_cast<Index>(dims_[l + 1]));
    if (l == 0 && mostly_zero(h)) {
      sparse_times_transpose(h, w, z);
    } else if (weight_transposed(l)) {
      z.noalias() = h * w;
    } else {
      z.noalias() = h * w.transpose();
    }
    z.rowwise() += params_.biases[l];
    tape.pre_activations.push_back(z);
    activation_apply_inplace(layer_activation(l), z);

    if (l == coding) {
      if (replay != nullptr) {
        if (replay->has_value()) {
          require_same_shape((*replay)->scale, z, "forward: dropout mask");
          z.array() *= (*replay)->scale.array();
          tape.dropout = **replay;
        }
      } else if (mode == Mode::Train && spec_.dropout_prob > 0.0) {
        if (rng == nullptr) throw std::invalid_argument("forward: train-mode dropout needs an rng");
        const double keep = 1.0 - spec_.dropout_prob;
        const T scale = static_cast<T>(1.0 / keep);
        DropoutMask<T> mask{Matrix<T>(z.rows(), z.cols())};
        T* m = mask.scale.data();
        for (Index i = 0; i < mask.scale.size(); ++i) {
          m[i] = rng->uniform() < keep ? scale : T(0);
        }
        z.array() *= mask.scale.array();
        tape.dropout = std::move(mask);
      }
    }

    if (l + 1 < layers) {
      tape.inputs.push_back(std::move(z));
    } else {
      result.output = std::move(z);
    }
  }
  return result;
}

template <typename T>
ForwardResult<T> Autoencoder<T>::forward(const Matrix<T>& input, Mode mode, Rng* rng) const {
  return run(input, mode, rng, nullptr);
}

template <typename T>
ForwardResult<T> Autoencoder<T>::forward_with_mask(
    const Matrix<T>& input, const std::optional<DropoutMask<T>>& mask) const {
  return run(input, Mode::Train, nullptr, &mask);
}

template <typename T>
Matrix<T> Autoencoder<T>::predict(const Matrix<T>& input) const {
  if (input.cols() != static_cast<Index>(n_items_)) {
    throw std::invalid_argument("predict: input width does not match the model");
  }
  Matrix<T> h = input;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const Matrix<T>& w = params_.weights[weight_slot(l)];
    Matrix<T> z(h.rows(), static_cast<Index>(dims_[l + 1]));
    if (l == 0 && mostly_zero(h)) {
      sparse_times_transpose(h, w, z);
    } else if (weight_transposed(l)) {
      z.noalias() = h * w;
    } else {
      z.noalias() = h * w.transpose();
    }
    z.rowwise() += params_.biases[l];
    activation_apply_inplace(layer_activation(l), z);
    h = std::move(z);
  }
  return h;
}

template <typename T>
Matrix<T> Autoencoder<T>::encode(const Matrix<T>& input, Mode mode, Rng* rng) const {
  auto result = run(input, mode, rng, nullptr);
  return result.tape.inputs[num_encoder_layers()];
}

template <typename T>
Matrix<T> Autoencoder<T>::decode(const Matrix<T>& code) const {
  require(code.cols() == static_cast<Index>(spec_.coding_dim()), "decode: wrong code width");
  Matrix<T> h = code;
  for (std::size_t l = num_encoder_layers(); l < num_layers(); ++l) {
    const Matrix<T>& w = params_.weights[weight_slot(l)];
    Matrix<T> z(h.rows(), static_cast<Index>(dims_[l + 1]));
    if (weight_transposed(l)) {
      z.noalias() = h * w;
    } else {
      z.noalias() = h * w.transpose();
    }
    z.rowwise() += params_.biases[l];
    activation_apply_inplace(layer_activation(l), z);
    h = std::move(z);
  }
  return h;
}

template <typename T>
Parameters<T> Autoencoder<T>::backward(const ForwardTape<T>& tape, const Matrix<T>& output_grad) const {
  const std::size_t layers = num_layers();
  if (tape.inputs.size() != layers || tape.pre_activations.size() != layers) {
    throw std::invalid_argument("backward: tape was not recorded by a model of this shape");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (tape.inputs[l].cols() != static_cast<Index>(dims_[l]) ||
        tape.pre_activations[l].cols() != static_cast<Index>(dims_[l + 1])) {
      throw std::invalid_argument("backward: tape layer " + std::to_string(l) +
                                  " does not match the model");
    }
  }
  require_same_shape(output_grad, tape.pre_activations.back(), "backward: output gradient");

  Parameters<T> grads = params_.zeros_like();
  const std::size_t coding = num_encoder_layers() - 1;
  Matrix<T> g = output_grad;
  for (std::size_t li = layers; li-- > 0;) {
    if (li == coding && tape.dropout) g.array() *= tape.dropout->scale.array();
    activation_backward_inplace(layer_activation(li), tape.pre_activations[li], g);

    const std::size_t slot = weight_slot(li);
    const Matrix<T>& w = params_.weights[slot];
    const Matrix<T>& h = tape.inputs[li];
    if (li == 0 && mostly_zero(h)) {
      accumulate_sparse_outer(g, h, grads.weights[slot]);
    } else if (weight_transposed(li)) {
      grads.weights[slot].noalias() += h.transpose() * g;
    } else {
      grads.weights[slot].noalias() += g.transpose() * h;
    }
    grads.biases[li].noalias() += g.colwise().sum();

    if (li > 0) {
      Matrix<T> next(g.rows(), static_cast<Index>(dims_[li]));
      if (weight_transposed(li)) {
        next.noalias() = g * w.transpose();
      } else {
        next.noalias() = g * w;
      }
      g = std::move(next);
    }
  }
  return grads;
}

template struct Parameters<float>;
template struct Parameters<double>;
template class Autoencoder<float>;
template class Autoencoder<double>;
template Matrix<float> init_xavier<float>(std::size_t, std::size_t, std::uint64_t);
template Matrix<double> init_xavier<double>(std::size_t, std::size_t, std::uint64_t);
template Matrix<float> init_xavier<float>(std::size_t, std::size_t, Rng&);
template Matrix<double> init_xavier<double>(std::size_t, std::size_t, Rng&);

}  // namespace deeprec
