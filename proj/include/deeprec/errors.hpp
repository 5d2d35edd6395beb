#pragma once

#include <stdexcept>
#include <string>

namespace deeprec {

/// Training produced a non-finite or runaway loss.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& message, long epoch = -1, long step = -1)
      : std::runtime_error(message), epoch_(epoch), step_(step) {}

  long epoch() const { return epoch_; }
  long step() const { return step_; }

 private:
  long epoch_;
  long step_;
};

}  // namespace deeprec
