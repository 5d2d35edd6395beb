#include "deeprec/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "deeprec/loss.hpp"

namespace deeprec {

void TrainConfig::validate() const {
  require(epochs >= 0, "epochs must be non-negative");
  require(batch_size >= 1, "batch size must be at least 1");
  require(learning_rate > 0.0, "learning rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(refeed_count >= 0, "refeed count must be non-negative");
  require(eval_every >= 1, "eval_every must be at least 1");
  require(threads >= 1, "thread count must be at least 1");
  require(blowup_factor > 1.0 && blowup_patience >= 1, "invalid divergence guard");
}

void set_thread_count(int threads) {
#ifdef _OPENMP
  Eigen::setNbThreads(std::max(1, threads));
#else
  (void)threads;
#endif
}

template <typename T>
StepMetrics train_step(Autoencoder<T>& model, const Batch<T>& batch, const TrainConfig& config,
                       SgdMomentum<T>& optimizer, Rng& rng, const UpdateObserver<T>& observer) {
  StepMetrics metrics;
  metrics.rated = batch.mask.template cast<double>().sum();

  auto pass = model.forward(batch.ratings, Mode::Train, &rng);
  Matrix<T> grad;
  metrics.loss = masked_mse_with_gradient(pass.output, batch.ratings, batch.mask, grad);
  if (!std::isfinite(metrics.loss)) throw DivergenceError("non-finite training loss");
  {
    const auto grads = model.backward(pass.tape, grad);
    optimizer.step(model.params(), grads);
    if (observer) observer(0, batch.ratings, batch.ratings, grads);
  }

  if (config.refeed_count == 0) return metrics;
  const Matrix<T> ones = Matrix<T>::Ones(batch.ratings.rows(), batch.ratings.cols());
  // Detached: the previous output is a constant input and target.
  Matrix<T> dense = std::move(pass.output);
  for (int k = 1; k <= config.refeed_count; ++k) {
    const Mode mode = config.refeed_dropout ? Mode::Train : Mode::Eval;
    auto refeed = model.forward(dense, mode, &rng);
    const double loss = masked_mse_with_gradient(refeed.output, dense, ones, grad);
    if (!std::isfinite(loss)) throw DivergenceError("non-finite re-feed loss");
    metrics.refeed_losses.push_back(loss);
    const auto grads = model.backward(refeed.tape, grad);
    optimizer.step(model.params(), grads);
    if (observer) observer(k, dense, dense, grads);
    dense = std::move(refeed.output);
  }
  return metrics;
}

template <typename T>
double evaluate(const Autoencoder<T>& model, const RatingDataset& train, const EvalSet& eval,
                bool clip_predictions, std::size_t users_per_batch) {
  require(!eval.empty(), "evaluate: empty evaluation set");
  require(model.n_items() == train.n_items(), "evaluate: model and training data disagree on n_items");
  require(users_per_batch >= 1, "evaluate: users_per_batch must be positive");

  // user -> indices into eval.entries
  std::map<std::uint32_t, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < eval.entries.size(); ++i) {
    const auto& e = eval.entries[i];
    if (e.user >= train.n_users() || e.item >= train.n_items()) {
      throw std::invalid_argument("evaluate: eval rating references a user or item missing from train");
    }
    by_user[e.user].push_back(i);
  }

  double sum_sq = 0.0;
  std::vector<std::uint32_t> users;
  users.reserve(users_per_batch);
  auto flush = [&] {
    if (users.empty()) return;
    const auto batch = make_batch<T>(train, users);
    const Matrix<T> pred = model.predict(batch.ratings);
    for (std::size_t r = 0; r < users.size(); ++r) {
      for (std::size_t idx : by_user[users[r]]) {
        const auto& e = eval.entries[idx];
        double y = static_cast<double>(pred(static_cast<Index>(r), e.item));
        if (clip_predictions) y = std::clamp(y, 1.0, 5.0);
        const double d = static_cast<double>(e.rating) - y;
        sum_sq += d * d;
      }
    }
    users.clear();
  };
  for (const auto& [user, idx] : by_user) {
    users.push_back(user);
    if (users.size() == users_per_batch) flush();
  }
  flush();
  return rmse_from_mmse(sum_sq / static_cast<double>(eval.entries.size()));
}

template <typename T>
FitResult<T> fit(Autoencoder<T>& model, const RatingDataset& train, const EvalSet* validation,
                 const TrainConfig& config, const FitHooks<T>& hooks) {
  config.validate();
  require(model.n_items() == train.n_items(), "fit: model and training data disagree on n_items");
  set_thread_count(config.threads);
  if (validation != nullptr && validation->empty()) validation = nullptr;

  FitResult<T> result;
  SgdMomentum<T> optimizer(model.params(), config.learning_rate, config.momentum);
  auto snapshot = [&](int epoch, double eval_rmse, double train_mmse) {
    return CheckpointRecord<T>{epoch, model, optimizer.velocity(), eval_rmse, train_mmse,
                               train.item_tokens(), {}};
  };

  if (config.epochs == 0) {
    const double rmse = validation ? evaluate(model, train, *validation, config.clip_predictions)
                                   : std::numeric_limits<double>::quiet_NaN();
    result.best = snapshot(0, rmse, std::numeric_limits<double>::quiet_NaN());
    if (hooks.on_best) hooks.on_best(*result.best);
    return result;
  }

  Rng dropout_rng(Rng::splitmix(config.seed));
  double initial_loss = -1.0;
  int over_threshold = 0;
  long global_step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    BatchIterator<T> batches(train, config.batch_size,
                             Rng::splitmix(config.seed ^ (0x5bd1e995ULL * static_cast<std::uint64_t>(epoch))));
    double sum_sq = 0.0;
    double sum_rated = 0.0;
    double refeed_sum = 0.0;
    long refeed_passes = 0;
    try {
      while (auto batch = batches.next()) {
        StepMetrics step;
        try {
          step = train_step(model, *batch, config, optimizer, dropout_rng, hooks.on_update);
        } catch (const DivergenceError& e) {
          throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(global_step),
                                epoch, global_step);
        }
        ++global_step;
        if (initial_loss < 0.0) initial_loss = step.loss;
        over_threshold = step.loss > config.blowup_factor * initial_loss ? over_threshold + 1 : 0;
        if (over_threshold >= config.blowup_patience) {
          char msg[160];
          std::snprintf(msg, sizeof(msg),
                        "loss %.4g exceeded %.0fx the initial loss %.4g for %d consecutive steps",
                        step.loss, config.blowup_factor, initial_loss, config.blowup_patience);
          throw DivergenceError(std::string(msg) + " at epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(global_step),
                                epoch, global_step);
        }
        sum_sq += step.loss * step.rated;
        sum_rated += step.rated;
        for (double l : step.refeed_losses) refeed_sum += l;
        refeed_passes += static_cast<long>(step.refeed_losses.size());
      }
    } catch (const DivergenceError& e) {
      result.diverged = true;
      result.divergence_message = e.what();
      return result;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_mmse = sum_rated > 0.0 ? sum_sq / sum_rated : 0.0;
    m.train_rmse = std::sqrt(m.train_mmse);
    if (refeed_passes > 0) m.refeed_mmse = refeed_sum / static_cast<double>(refeed_passes);

    if (validation && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      m.valid_rmse = evaluate(model, train, *validation, config.clip_predictions);
      if (!std::isfinite(m.valid_rmse)) {
        result.diverged = true;
        result.divergence_message = "non-finite validation RMSE at epoch " + std::to_string(epoch);
        m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        result.history.push_back(m);
        if (hooks.on_epoch) hooks.on_epoch(m);
        return result;
      }
      if (!result.best || m.valid_rmse < result.best->eval_rmse) {
        result.best = snapshot(epoch, m.valid_rmse, m.train_mmse);
        if (hooks.on_best) hooks.on_best(*result.best);
      }
    } else if (!validation) {
      result.best = snapshot(epoch, std::numeric_limits<double>::quiet_NaN(), m.train_mmse);
      if (hooks.on_best) hooks.on_best(*result.best);
    }
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(m);
    if (hooks.on_epoch) hooks.on_epoch(m);
  }
  return result;
}

std::string metrics_csv_header() { return "epoch,train_mmse,train_rmse,refeed_mmse,valid_rmse,wall_ms"; }

std::string metrics_csv_row(const EpochMetrics& m) {
  auto num = [](double v) -> std::string {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
  };
  return std::to_string(m.epoch) + "," + num(m.train_mmse) + "," + num(m.train_rmse) + "," +
         num(m.refeed_mmse) + "," + num(m.valid_rmse) + "," + num(m.wall_ms);
}

#define DEEPREC_INSTANTIATE(T)                                                                  \
  template StepMetrics train_step<T>(Autoencoder<T>&, const Batch<T>&, const TrainConfig&,     \
                                     SgdMomentum<T>&, Rng&, const UpdateObserver<T>&);         \
  template double evaluate<T>(const Autoencoder<T>&, const RatingDataset&, const EvalSet&,     \
                              bool, std::size_t);                                              \
  template FitResult<T> fit<T>(Autoencoder<T>&, const RatingDataset&, const EvalSet*,          \
                               const TrainConfig&, const FitHooks<T>&);
DEEPREC_INSTANTIATE(float)
DEEPREC_INSTANTIATE(double)
#undef DEEPREC_INSTANTIATE

}  // namespace deeprec
