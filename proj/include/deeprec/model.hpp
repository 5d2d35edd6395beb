#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "deeprec/activation.hpp"
#include "deeprec/architecture.hpp"
#include "deeprec/random.hpp"
#include "deeprec/tensor.hpp"

namespace deeprec {

enum class Mode { Train, Eval };

/// Stored tensors of a model. Under tied weights the decoder has no weights of
/// its own, so `weights` holds only the encoder matrices; `biases` always has
/// one entry per layer. Gradients and optimizer velocity share this layout.
template <typename T>
struct Parameters {
  std::vector<Matrix<T>> weights;
  std::vector<RowVector<T>> biases;

  Parameters zeros_like() const;
  std::size_t size() const;
  bool all_finite() const;
  void set_zero();
};

/// Dropout on the coding-layer output. Entries are 0 or 1/(1-p).
template <typename T>
struct DropoutMask {
  Matrix<T> scale;
};

template <typename T>
struct ForwardTape {
  std::vector<Matrix<T>> inputs;          // per layer, the matrix multiplied into W
  std::vector<Matrix<T>> pre_activations; // per layer, W x + b
  std::optional<DropoutMask<T>> dropout;  // present iff a mask was applied
  Index batch_rows = 0;
};

template <typename T>
struct ForwardResult {
  Matrix<T> output;
  ForwardTape<T> tape;
};

/// Glorot-uniform draw on ±sqrt(6 / (in + out)).
template <typename T>
Matrix<T> init_xavier(std::size_t out_dim, std::size_t in_dim, std::uint64_t seed);

template <typename T>
Matrix<T> init_xavier(std::size_t out_dim, std::size_t in_dim, Rng& rng);

template <typename T>
class Autoencoder {
 public:
  /// Xavier-initialized weights, zero biases.
  Autoencoder(ArchitectureSpec spec, std::size_t n_items, std::uint64_t seed);

  /// Adopt existing parameters (checkpoint load, precision casts).
  Autoencoder(ArchitectureSpec spec, std::size_t n_items, Parameters<T> params);

  const ArchitectureSpec& spec() const { return spec_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t num_layers() const { return dims_.size() - 1; }
  std::size_t num_encoder_layers() const { return spec_.encoder_dims.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  bool tied() const { return spec_.tied; }

  const Parameters<T>& params() const { return params_; }
  Parameters<T>& params() { return params_; }

  std::size_t parameter_count() const { return params_.size(); }

  /// Activation applied after layer `layer`; the output layer stays linear for
  /// bounded activations.
  const ActivationKind& layer_activation(std::size_t layer) const;

  /// Index into params().weights used by `layer`, and whether it is used transposed.
  std::size_t weight_slot(std::size_t layer) const;
  bool weight_transposed(std::size_t layer) const;

  /// The effective [out x in] weight of a layer (materialized copy).
  Matrix<T> layer_weight(std::size_t layer) const;

  /// Train mode samples a fresh coding-layer dropout mask from `rng`.
  ForwardResult<T> forward(const Matrix<T>& input, Mode mode, Rng* rng = nullptr) const;

  /// Forward with a given coding-layer mask, e.g. to replay a tape.
  ForwardResult<T> forward_with_mask(const Matrix<T>& input,
                                     const std::optional<DropoutMask<T>>& mask) const;

  /// Eval-mode output only.
  Matrix<T> predict(const Matrix<T>& input) const;

  /// Coding-layer output (dropout applied in train mode).
  Matrix<T> encode(const Matrix<T>& input, Mode mode, Rng* rng = nullptr) const;
  Matrix<T> decode(const Matrix<T>& code) const;

  /// Gradients for every stored tensor. Tied weights accumulate the encoder and
  /// decoder contributions into one matrix.
  Parameters<T> backward(const ForwardTape<T>& tape, const Matrix<T>& output_grad) const;

  template <typename U>
  Autoencoder<U> cast() const;

 private:
  ForwardResult<T> run(const Matrix<T>& input, Mode mode, Rng* rng,
                       const std::optional<DropoutMask<T>>* replay) const;
  void check_params() const;

  ArchitectureSpec spec_;
  std::size_t n_items_;
  std::vector<std::size_t> dims_;
  ActivationKind output_activation_;
  Parameters<T> params_;
};

template <typename T>
template <typename U>
Autoencoder<U> Autoencoder<T>::cast() const {
  Parameters<U> p;
  for (const auto& w : params_.weights) p.weights.push_back(w.template cast<U>());
  for (const auto& b : params_.biases) p.biases.push_back(b.template cast<U>());
  return Autoencoder<U>(spec_, n_items_, std::move(p));
}

}  // namespace deeprec
