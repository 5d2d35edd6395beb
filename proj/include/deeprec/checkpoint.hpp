#pragma once

#include <stdexcept>
#include <string>

#include "deeprec/training.hpp"

namespace deeprec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary layout (little-endian):
///   8 bytes  magic "DEEPREC\0"
///   u32      format version
///   u64      header length H
///   H bytes  JSON header: architecture string, activation, tied flag,
///            n_items, scalar type, epoch, metrics, item tokens, tensor table
///   payload  tensors in header order, row-major raw floats
///   u64      payload length, u64 FNV-1a hash of the payload
template <typename T>
void save_checkpoint(const CheckpointRecord<T>& record, const std::string& path);

/// Throws CheckpointError on version mismatch, truncation or corruption.
template <typename T>
CheckpointRecord<T> load_checkpoint(const std::string& path);

/// Also rejects a checkpoint whose architecture (string, activation, tied)
/// differs from `expected`.
template <typename T>
CheckpointRecord<T> load_checkpoint(const std::string& path, const ArchitectureSpec& expected);

/// "n,128,n" plus activation and tying, e.g. "n,128,n|selu|untied".
std::string architecture_signature(const ArchitectureSpec& spec);

}  // namespace deeprec
