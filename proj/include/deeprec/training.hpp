#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "deeprec/data.hpp"
#include "deeprec/errors.hpp"
#include "deeprec/model.hpp"
#include "deeprec/optimizer.hpp"

namespace deeprec {

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 128;
  double learning_rate = 0.001;
  double momentum = 0.9;
  int refeed_count = 0;     // dense re-feeding passes per iteration
  std::uint64_t seed = 1;
  int eval_every = 1;
  bool refeed_dropout = true;     // dropout stays on during re-feed passes
  bool clip_predictions = false;  // clamp to [1, 5] when scoring
  int threads = 1;

  // Divergence guard: abort when the step loss exceeds blowup_factor x the
  // first step's loss for blowup_patience consecutive steps.
  double blowup_factor = 10.0;
  int blowup_patience = 5;

  void validate() const;
};

struct StepMetrics {
  double loss = 0.0;                  // masked loss on the sparse batch
  double rated = 0.0;                 // rated entries in the batch
  std::vector<double> refeed_losses;  // one per re-feed pass, in order
};

/// Hook for instrumentation; called after every optimizer update with the
/// pass index (0 = sparse pass, k = k-th re-feed pass).
template <typename T>
using UpdateObserver = std::function<void(int pass, const Matrix<T>& input, const Matrix<T>& target,
                                          const Parameters<T>& grads)>;

/// Sparse forward/backward/update followed by refeed_count dense passes where
/// the detached output f(x) is both input and target under an all-ones mask.
template <typename T>
StepMetrics train_step(Autoencoder<T>& model, const Batch<T>& batch, const TrainConfig& config,
                       SgdMomentum<T>& optimizer, Rng& rng,
                       const UpdateObserver<T>& observer = nullptr);

/// Feeds each eval user's training vector through the model (eval mode) and
/// returns the RMSE over all eval ratings.
template <typename T>
double evaluate(const Autoencoder<T>& model, const RatingDataset& train, const EvalSet& eval,
                bool clip_predictions = false, std::size_t users_per_batch = 256);

template <typename T>
struct CheckpointRecord {
  int epoch = 0;
  Autoencoder<T> model;
  Parameters<T> velocity;
  double eval_rmse = 0.0;
  double train_mmse = 0.0;
  std::vector<std::string> item_tokens;  // column order of the model
  std::string train_data;                // training file the model was fit on, if known
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double train_mmse = 0.0;
  double train_rmse = 0.0;
  double refeed_mmse = std::numeric_limits<double>::quiet_NaN();  // NaN without re-feeding
  double valid_rmse = std::numeric_limits<double>::quiet_NaN();   // NaN when not evaluated
  double wall_ms = 0.0;
};

template <typename T>
struct FitResult {
  std::vector<EpochMetrics> history;
  std::optional<CheckpointRecord<T>> best;  // lowest validation RMSE seen
  bool diverged = false;
  std::string divergence_message;
};

template <typename T>
struct FitHooks {
  std::function<void(const EpochMetrics&)> on_epoch;
  std::function<void(const CheckpointRecord<T>&)> on_best;
  UpdateObserver<T> on_update;
};

/// Runs `epochs` passes of train_step. Validation runs every eval_every epochs
/// (and after the last one); the lowest-RMSE state is kept as `best`. Without a
/// validation set, `best` tracks the latest epoch with eval_rmse NaN.
template <typename T>
FitResult<T> fit(Autoencoder<T>& model, const RatingDataset& train, const EvalSet* validation,
                 const TrainConfig& config, const FitHooks<T>& hooks = {});

/// CSV header and row for the per-epoch metrics stream.
std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

void set_thread_count(int threads);

}  // namespace deeprec
