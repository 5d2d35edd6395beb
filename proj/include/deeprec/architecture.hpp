#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "deeprec/activation.hpp"

namespace deeprec {

class ArchitectureError : public std::invalid_argument {
 public:
  ArchitectureError(const std::string& message, std::size_t position)
      : std::invalid_argument(message + " (token " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Layer layout written as "n,512,512,1024,dp(0.8),512,512,n". The leading and
/// trailing `n` stand for the item count, bound when a dataset is loaded.
struct ArchitectureSpec {
  std::vector<std::size_t> encoder_dims;  // last entry is the coding dim
  double dropout_prob = 0.0;
  std::vector<std::size_t> decoder_dims;  // hidden decoder dims, output `n` excluded
  ActivationKind activation{};
  bool tied = false;

  std::size_t coding_dim() const { return encoder_dims.back(); }
  std::size_t num_layers() const { return encoder_dims.size() + decoder_dims.size() + 1; }

  /// Full dimension chain n, e1, ..., ek, d1, ..., dm, n.
  std::vector<std::size_t> layer_dims(std::size_t n_items) const;

  /// Decoder hidden dims mirror the encoder, as required for tied weights.
  bool mirrored() const;

  void validate() const;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Without a dp(p) token the coding layer is the middle hidden token
/// (the earlier one of the two middles for an even count).
ArchitectureSpec parse_architecture(std::string_view text);

/// Canonical form; dp(p) is written whenever p > 0 or the coding layer is not
/// the implicit middle.
std::string serialize_architecture(const ArchitectureSpec& spec);

/// Trainable parameters: every stored weight once plus every layer's bias.
std::size_t parameter_count(const ArchitectureSpec& spec, std::size_t n_items);

}  // namespace deeprec
