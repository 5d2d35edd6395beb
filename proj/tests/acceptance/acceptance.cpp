// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--strict] [--curves FILE] [--report FILE] [criterion ...]
//
// The summary is also written to the report file (acceptance_report.txt).
// Exit status is 0 once every selected criterion has been evaluated; --strict
// also turns any FAIL into exit status 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <unistd.h>
#include <vector>

#include "deeprec/checkpoint.hpp"
#include "deeprec/loss.hpp"
#include "deeprec/synthetic.hpp"
#include "deeprec/training.hpp"
#include "test_support.hpp"

using namespace deeprec;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

ArchitectureSpec arch(const std::string& text, Activation act, bool tied = false) {
  auto spec = parse_architecture(text);
  spec.activation = ActivationKind(act);
  spec.tied = tied;
  return spec;
}

std::string curves_path = "acceptance_curves.csv";
std::string report_path = "acceptance_report.txt";

void emit_curve(const std::string& criterion, const std::string& config, std::uint64_t seed,
                const FitResult<float>& r) {
  static bool first = true;
  std::ofstream out(curves_path, first ? std::ios::trunc : std::ios::app);
  if (first) out << "criterion,config,seed," << metrics_csv_header() << "\n";
  first = false;
  for (const auto& m : r.history) out << criterion << ",\"" << config << "\"," << seed << "," << metrics_csv_row(m) << "\n";
}

// ---------------------------------------------------------------------------
// desk-scale corpora

struct Corpus {
  TimeSplit split;
};

Corpus make_corpus(std::size_t users) {
  SyntheticCorpusConfig cfg;
  cfg.n_users = users;
  const auto records = generate_synthetic_corpus(cfg);
  SplitSpec spec;
  spec.train_start = cfg.first_day;
  spec.train_end = *parse_date("2005-11-30");
  spec.test_start = spec.train_end + 1;
  spec.test_end = *parse_date("2005-12-31");
  spec.split_seed = 1;
  Corpus c{time_split(records, spec)};
  std::printf("  corpus %zu users: train %zu ratings, validation %zu, test %zu\n", users,
              c.split.train.n_ratings(), c.split.validation.size(), c.split.test.size());
  std::fflush(stdout);
  return c;
}

const Corpus& small_corpus() {
  static const Corpus c = make_corpus(6000);
  return c;
}

const Corpus& large_corpus() {
  static const Corpus c = make_corpus(20000);
  return c;
}

FitResult<float> train_run(const Corpus& corpus, const std::string& text, Activation act, std::size_t batch,
                           double lr, int epochs, std::uint64_t seed, int refeed = 0) {
  Autoencoder<float> model(arch(text, act), corpus.split.train.n_items(), seed);
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.learning_rate = lr;
  cfg.refeed_count = refeed;
  cfg.seed = seed;
  return fit(model, corpus.split.train, &corpus.split.validation, cfg);
}

double best_valid(const FitResult<float>& r) {
  double best = INFINITY;
  for (const auto& m : r.history)
    if (std::isfinite(m.valid_rmse)) best = std::min(best, m.valid_rmse);
  return best;
}

// ---------------------------------------------------------------------------
// 1. gradient check

double batch_loss(const Autoencoder<double>& model, const Matrix<double>& x, const Matrix<double>& mask,
                  const std::optional<DropoutMask<double>>& dropout) {
  return testing::naive_masked_mse(model.forward_with_mask(x, dropout).output, x, mask);
}

Verdict gradient_check() {
  // Entries below the floor carry central-difference round-off of ~1e-10.
  const double floor = 1e-5;
  double worst = 0.0, worst_abs = 0.0;
  int models = 0;
  for (bool tied : {false, true}) {
    for (Activation act : all_activations()) {
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        Autoencoder<double> model(arch("n,8,8,12,dp(0.5),8,8,n", act, tied), 20, seed);
        Rng rng(seed * 101);
        for (auto& b : model.params().biases)
          for (Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.2, 0.2);
        Matrix<double> x, mask;
        testing::random_rating_batch(6, 20, 0.3, rng, x, mask);
        Rng drop(seed);
        const auto fwd = model.forward(x, Mode::Train, &drop);
        const auto grads = model.backward(fwd.tape, masked_mse_gradient(fwd.output, x, mask));
        const auto numeric = testing::finite_difference_gradient(
            model, [&] { return batch_loss(model, x, mask, fwd.tape.dropout); }, 1e-5);
        const auto analytic = testing::flatten(grads);
        worst = std::max(worst, testing::max_relative_error(analytic, numeric, floor));
        for (std::size_t k = 0; k < analytic.size(); ++k) worst_abs = std::max(worst_abs, std::abs(analytic[k] - numeric[k]));
        ++models;
      }
    }
  }
  return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " (floor 1e-5), max abs error " +
                           fmt("%.2e", worst_abs) + " over " + std::to_string(models) + " models"};
}

// ---------------------------------------------------------------------------
// 2. loss oracle

Verdict loss_oracle() {
  Rng rng(77);
  double worst = 0.0;
  int dense = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index rows = 1 + static_cast<Index>(rng.below(16));
    const Index cols = 1 + static_cast<Index>(rng.below(40));
    Matrix<double> r, m;
    testing::random_rating_batch(rows, cols, rng.uniform(0.05, 0.6), rng, r, m);
    if (trial % 4 == 0) {
      m.setOnes();
      ++dense;
    }
    const auto y = testing::random_matrix<double>(rows, cols, rng, -1.0, 7.0);
    worst = std::max(worst, std::abs(masked_mse(y, r, m) - testing::naive_masked_mse(y, r, m)));
    worst = std::max(worst, (masked_mse_gradient(y, r, m) - testing::naive_masked_mse_gradient(y, r, m))
                                .cwiseAbs()
                                .maxCoeff());
  }
  return {worst <= 1e-12, "max abs deviation " + fmt("%.2e", worst) + " on 100 batches (" +
                              std::to_string(dense) + " dense)"};
}

// ---------------------------------------------------------------------------
// 3. PCA

Verdict pca_equivalence() {
  Rng rng(5);
  Matrix<double> u(200, 5), v(5, 30);
  for (Index i = 0; i < u.size(); ++i) u.data()[i] = rng.normal();
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
  Matrix<double> a = u * v;
  for (Index i = 0; i < a.size(); ++i) a.data()[i] += 0.1 * rng.normal();

  // The model carries biases, so its optimum is the rank-5 fit of the
  // column-centred matrix.
  Matrix<double> centred = a;
  for (Index j = 0; j < a.cols(); ++j) centred.col(j).array() -= a.col(j).mean();
  const double svd = testing::truncated_svd_mse(centred, 5);

  Autoencoder<double> model(arch("n,5,n", Activation::Linear), 30, 3);
  Batch<double> batch{a, Matrix<double>::Ones(200, 30), {}};
  TrainConfig cfg;
  SgdMomentum<double> opt(model.params(), 0.01, 0.9);
  Rng drop(1);
  for (int step = 0; step < 30000; ++step) train_step(model, batch, cfg, opt, drop);
  const double ae = masked_mse(model.predict(a), a, batch.mask);
  const double gap = std::abs(ae - svd) / svd;
  return {gap <= 0.05, "autoencoder MSE " + fmt("%.5f", ae) + ", truncated SVD MSE " + fmt("%.5f", svd) +
                           ", gap " + fmt("%.2f%%", 100 * gap)};
}

// ---------------------------------------------------------------------------
// 4. activation trend

Verdict activation_trend() {
  const auto& corpus = small_corpus();
  const std::vector<Activation> good = {Activation::Elu, Activation::Selu, Activation::LRelu};
  const std::vector<Activation> bad = {Activation::Sigmoid, Activation::Relu6};
  const std::vector<Activation> shown = {Activation::Relu, Activation::Tanh};
  std::map<Activation, double> med;
  std::string detail;
  for (const auto* group : {&good, &bad, &shown}) {
    for (Activation act : *group) {
      std::vector<double> finals;
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto r = train_run(corpus, "n,128,128,128,n", act, 16, 0.001, 30, seed);
        emit_curve("4", to_string(act), seed, r);
        finals.push_back(r.diverged || r.history.empty() ? INFINITY : r.history.back().train_rmse);
      }
      med[act] = median3(finals);
      detail += to_string(act) + " " + fmt("%.4f", med[act]) + ", ";
      std::printf("  %s median train RMSE %.4f\n", to_string(act).c_str(), med[act]);
      std::fflush(stdout);
    }
  }
  bool pass = true;
  for (Activation g : good)
    for (Activation b : bad) pass = pass && med[g] < med[b];
  detail.resize(detail.size() - 2);
  return {pass, "median final train RMSE: " + detail};
}

// ---------------------------------------------------------------------------
// 5. depth trend

Verdict depth_trend() {
  const auto& corpus = small_corpus();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto shallow = train_run(corpus, "n,128,n", Activation::Selu, 16, 0.001, 25, seed);
    const auto deep = train_run(corpus, "n,128,128,128,128,128,n", Activation::Selu, 16, 0.001, 25, seed);
    emit_curve("5", "n,128,n", seed, shallow);
    emit_curve("5", "n,128,128,128,128,128,n", seed, deep);
    const double s = best_valid(shallow), d = best_valid(deep);
    if (d <= s - 0.005) ++wins;
    detail += "seed " + std::to_string(seed) + " " + fmt("%.4f", s) + " vs " + fmt("%.4f", d) + "; ";
    std::printf("  seed %llu best valid RMSE 2-layer %.4f, 6-layer %.4f\n", static_cast<unsigned long long>(seed), s,
                d);
    std::fflush(stdout);
  }
  return {wins >= 2, std::to_string(wins) + "/3 seeds with margin >= 0.005 (2-layer vs 6-layer: " +
                         detail.substr(0, detail.size() - 2) + ")"};
}

// ---------------------------------------------------------------------------
// 6. dropout effect

Verdict dropout_effect() {
  const auto& corpus = large_corpus();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    double rise[2];
    int k = 0;
    for (const char* text : {"n,128,128,256,128,128,n", "n,128,128,256,dp(0.8),128,128,n"}) {
      const auto r = train_run(corpus, text, Activation::Selu, 128, 0.001, 50, seed);
      emit_curve("6", text, seed, r);
      rise[k++] = r.diverged || r.history.size() < 50 ? INFINITY : r.history.back().valid_rmse - best_valid(r);
    }
    const bool ok = rise[0] >= 0.01 && rise[1] <= 0.005;
    if (ok) ++wins;
    detail += "seed " + std::to_string(seed) + " " + fmt("%.4f", rise[0]) + "/" + fmt("%.4f", rise[1]) + "; ";
    std::printf("  seed %llu epoch-50 minus minimum: dp 0 %.4f, dp 0.8 %.4f\n",
                static_cast<unsigned long long>(seed), rise[0], rise[1]);
    std::fflush(stdout);
  }
  return {wins >= 2, std::to_string(wins) + "/3 seeds (epoch-50 RMSE above own minimum, dp 0 / dp 0.8: " +
                         detail.substr(0, detail.size() - 2) + ")"};
}

// ---------------------------------------------------------------------------
// 7. re-feeding effect

Verdict refeed_effect() {
  const auto& corpus = large_corpus();
  const std::string text = "n,128,128,256,dp(0.8),128,128,n";
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto base = train_run(corpus, text, Activation::Selu, 128, 0.001, 30, seed);
    const auto fast = train_run(corpus, text, Activation::Selu, 128, 0.005, 30, seed);
    const auto refed = train_run(corpus, text, Activation::Selu, 128, 0.005, 30, seed, 1);
    emit_curve("7", "lr 0.001", seed, base);
    emit_curve("7", "lr 0.005", seed, fast);
    emit_curve("7", "lr 0.005 refeed 1", seed, refed);
    const double b = base.diverged ? INFINITY : base.history.back().valid_rmse;
    const double f = fast.diverged ? INFINITY : fast.history.back().valid_rmse;
    const double rf = refed.diverged ? INFINITY : refed.history.back().valid_rmse;
    const bool ok = (fast.diverged || f > b) && rf <= b;
    if (ok) ++wins;
    detail += "seed " + std::to_string(seed) + " " + fmt("%.4f", b) + "/" + (fast.diverged ? "diverged" : fmt("%.4f", f)) +
              "/" + fmt("%.4f", rf) + "; ";
    std::printf("  seed %llu final valid RMSE base %.4f, 5x lr %.4f%s, 5x lr + refeed %.4f\n",
                static_cast<unsigned long long>(seed), b, f, fast.diverged ? " (diverged)" : "", rf);
    std::fflush(stdout);
  }
  return {wins >= 2, std::to_string(wins) + "/3 seeds (final valid RMSE base / 5x lr / 5x lr + refeed: " +
                         detail.substr(0, detail.size() - 2) + ")"};
}

// ---------------------------------------------------------------------------
// 8. re-feed mechanics

Verdict refeed_mechanics() {
  Rng rng(3);
  Matrix<double> r, m;
  testing::random_rating_batch(12, 15, 0.3, rng, r, m);
  Batch<double> batch{r, m, {}};
  bool counts = true;
  for (int refeed : {0, 1, 2, 3}) {
    Autoencoder<double> model(arch("n,6,dp(0.3),6,n", Activation::Selu), 15, 2);
    SgdMomentum<double> opt(model.params(), 0.001, 0.9);
    TrainConfig cfg;
    cfg.refeed_count = refeed;
    Rng drop(1);
    std::vector<int> passes;
    train_step<double>(model, batch, cfg, opt, drop,
                       [&](int pass, const Matrix<double>&, const Matrix<double>&, const Parameters<double>&) {
                         passes.push_back(pass);
                       });
    counts = counts && opt.steps() == static_cast<std::size_t>(1 + refeed) &&
             passes.size() == static_cast<std::size_t>(1 + refeed);
  }

  bool detached = true;
  for (bool tied : {false, true}) {
    Autoencoder<double> model(arch("n,7,5,7,n", Activation::Elu, tied), 15, 4);
    Autoencoder<double> twin = model;
    SgdMomentum<double> opt(model.params(), 0.01, 0.9);
    TrainConfig cfg;
    cfg.refeed_count = 1;
    Rng drop(1);
    Matrix<double> seen_in, seen_target;
    Parameters<double> seen;
    train_step<double>(model, batch, cfg, opt, drop,
                       [&](int pass, const Matrix<double>& in, const Matrix<double>& target, const Parameters<double>& g) {
                         if (pass == 1) std::tie(seen_in, seen_target, seen) = std::tie(in, target, g);
                       });
    SgdMomentum<double> twin_opt(twin.params(), 0.01, 0.9);
    const auto first = twin.forward(r, Mode::Eval);
    twin_opt.step(twin.params(), twin.backward(first.tape, masked_mse_gradient(first.output, r, m)));
    const Matrix<double> frozen = first.output;
    const Matrix<double> ones = Matrix<double>::Ones(frozen.rows(), frozen.cols());
    const auto second = twin.forward(frozen, Mode::Eval);
    const auto expected = twin.backward(second.tape, masked_mse_gradient(second.output, frozen, ones));
    const auto numeric = testing::finite_difference_gradient(
        twin, [&] { return masked_mse(twin.forward(frozen, Mode::Eval).output, frozen, ones); });
    detached = detached && seen_in == frozen && seen_target == frozen &&
               testing::flatten(seen) == testing::flatten(expected) &&
               testing::max_relative_error(testing::flatten(expected), numeric) < 1e-5;
  }
  return {counts && detached, std::string("update count ") + (counts ? "exact" : "WRONG") + ", detached target " +
                                  (detached ? "exact" : "WRONG")};
}

// ---------------------------------------------------------------------------
// 9. split protocol

std::vector<RatingRecord> million_record_log() {
  SyntheticCorpusConfig cfg;
  cfg.n_users = 24000;
  cfg.n_items = 4000;
  cfg.seed = 9;
  auto records = generate_synthetic_corpus(cfg);
  // re-ratings, some straddling the boundary
  Rng rng(4);
  const std::size_t base = records.size();
  while (records.size() < 1000000) {
    auto r = records[rng.below(base)];
    r.timestamp += static_cast<std::int64_t>(rng.below(40 * 86400));
    r.timestamp_text = std::to_string(r.timestamp);
    r.rating = static_cast<float>(1 + rng.below(5));
    records.push_back(r);
  }
  return records;
}

using Key = std::tuple<std::string, std::string, std::int64_t, float>;

Verdict split_protocol() {
  const auto records = million_record_log();
  SplitSpec spec;
  spec.train_start = 12784 + 30;
  spec.train_end = 12784 + 300;
  spec.test_start = spec.train_end + 1;
  spec.test_end = 12784 + 340;
  spec.split_seed = 11;
  const auto split = time_split(records, spec);

  // scan oracle: latest per pair, then day windows, then cold filtering
  std::map<std::pair<std::string, std::string>, std::size_t> latest;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, fresh] = latest.try_emplace({records[i].user, records[i].item}, i);
    if (!fresh && records[i].timestamp >= records[it->second].timestamp) it->second = i;
  }
  std::set<Key> train, interval;
  std::set<std::string> train_users, train_items;
  for (const auto& [pair, i] : latest) {
    const auto& r = records[i];
    const DayNumber day = static_cast<DayNumber>(std::floor(static_cast<double>(r.timestamp) / 86400.0));
    const Key key{r.user, r.item, r.timestamp, r.rating};
    if (day >= spec.train_start && day <= spec.train_end) {
      train.insert(key);
      train_users.insert(r.user);
      train_items.insert(r.item);
    } else if (day >= spec.test_start && day <= spec.test_end) {
      interval.insert(key);
    }
  }
  std::set<Key> warm;
  for (const auto& k : interval)
    if (train_users.count(std::get<0>(k)) && train_items.count(std::get<1>(k))) warm.insert(k);

  auto keys = [](const std::vector<RatingRecord>& rs) {
    std::set<Key> out;
    for (const auto& r : rs) out.insert({r.user, r.item, r.timestamp, r.rating});
    return out;
  };
  const auto got_train = keys(split.train_records);
  const auto got_test = keys(split.test.records);
  const auto got_valid = keys(split.validation.records);

  std::size_t leaks = 0;
  for (const auto& r : split.train_records) {
    const DayNumber d = day_of(r.timestamp);
    leaks += d < spec.train_start || d > spec.train_end;
  }
  for (const auto* eval : {&split.test, &split.validation})
    for (const auto& r : eval->records) {
      const DayNumber d = day_of(r.timestamp);
      leaks += d < spec.test_start || d > spec.test_end;
    }
  std::set<Key> got_eval = got_test;
  got_eval.insert(got_valid.begin(), got_valid.end());
  const bool disjoint = got_eval.size() == got_test.size() + got_valid.size();
  const bool exact = got_train == train && got_eval == warm && disjoint &&
                     split.interval_ratings == interval.size() &&
                     split.cold_dropped == interval.size() - warm.size();

  const double frac = static_cast<double>(split.validation.size()) /
                      static_cast<double>(split.validation.size() + split.test.size());
  const auto again = time_split(records, spec);
  const bool deterministic = keys(again.validation.records) == got_valid && keys(again.test.records) == got_test &&
                             keys(again.train_records) == got_train;

  const bool pass = leaks == 0 && exact && frac >= 0.48 && frac <= 0.52 && deterministic;
  return {pass, std::to_string(records.size()) + " records, " + std::to_string(leaks) + " leaks, oracle " +
                    (exact ? "match" : "MISMATCH") + " (" + std::to_string(warm.size()) + " warm of " +
                    std::to_string(interval.size()) + "), validation share " + fmt("%.4f", frac) + ", rerun " +
                    (deterministic ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 10. parameter count

Verdict parameter_count_check() {
  const auto spec = arch("n,128,n", Activation::Selu);
  Autoencoder<float> model(spec, 17768, 1);
  const std::size_t counted = model.parameter_count();
  const std::size_t formula = parameter_count(spec, 17768);
  return {counted == 4566504 && formula == 4566504,
          "instantiated " + std::to_string(counted) + ", formula " + std::to_string(formula)};
}

// ---------------------------------------------------------------------------
// 11. round trips

template <typename T>
bool checkpoint_round_trip(const std::string& text, bool tied, const std::string& dir) {
  auto spec = arch(text, Activation::Selu, tied);
  Autoencoder<T> model(spec, 50, 7);
  Rng rng(8);
  for (auto& b : model.params().biases)
    for (Index i = 0; i < b.size(); ++i) b[i] = static_cast<T>(rng.normal());
  Parameters<T> velocity = model.params();
  for (auto* p : testing::parameter_scalars(velocity)) *p = static_cast<T>(rng.normal());
  CheckpointRecord<T> rec{12, model, velocity, 0.91234, 0.8, {}, "train.csv"};
  for (int i = 0; i < 50; ++i) rec.item_tokens.push_back("item" + std::to_string(i));
  const std::string path = dir + "/ck.bin";
  save_checkpoint(rec, path);
  const auto back = load_checkpoint<T>(path);
  const auto a = testing::flatten(rec.model.params()), b = testing::flatten(back.model.params());
  const auto va = testing::flatten(rec.velocity), vb = testing::flatten(back.velocity);
  const auto x = testing::random_matrix<T>(4, 50, rng, 0.0, 5.0);
  const Matrix<T> pa = model.predict(x), pb = back.model.predict(x);
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0 && va.size() == vb.size() &&
         std::memcmp(va.data(), vb.data(), va.size() * sizeof(T)) == 0 &&
         std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(T)) == 0 && back.model.spec() == model.spec() &&
         back.epoch == rec.epoch && back.eval_rmse == rec.eval_rmse && back.item_tokens == rec.item_tokens &&
         back.train_data == rec.train_data;
}

Verdict round_trips() {
  const fs::path dir = fs::temp_directory_path() / ("deeprec_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  int ok = 0, total = 0;
  for (const char* text : {"n,32,n", "n,16,8,dp(0.5),16,n", "n,20,10,dp(0.3),12,n"}) {
    for (bool tied : {false, true}) {
      if (tied && !parse_architecture(text).mirrored()) continue;
      ok += checkpoint_round_trip<float>(text, tied, dir.string());
      ok += checkpoint_round_trip<double>(text, tied, dir.string());
      total += 2;
    }
  }
  fs::remove_all(dir);

  int strings_ok = 0;
  const std::vector<std::string> table = {"n,128,256,256,dp(0.65),256,128,n", "n,256,256,512,dp(0.8),256,256,n",
                                          "n,512,512,1024,dp(0.8),512,512,n"};
  for (const auto& s : table) {
    const auto spec = parse_architecture(s);
    strings_ok += serialize_architecture(spec) == s && parse_architecture(serialize_architecture(spec)) == spec;
  }
  return {ok == total && strings_ok == static_cast<int>(table.size()),
          std::to_string(ok) + "/" + std::to_string(total) + " checkpoints bit-exact, " + std::to_string(strings_ok) +
              "/" + std::to_string(table.size()) + " architecture strings lossless"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"gradient check", gradient_check},
      {"loss oracle", loss_oracle},
      {"pca equivalence", pca_equivalence},
      {"activation trend", activation_trend},
      {"depth trend", depth_trend},
      {"dropout effect", dropout_effect},
      {"refeed effect", refeed_effect},
      {"refeed mechanics", refeed_mechanics},
      {"split protocol", split_protocol},
      {"parameter count", parameter_count_check},
      {"round trips", round_trips},
  };
  bool strict = false;
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0) {
      strict = true;
    } else if (std::strcmp(argv[i], "--curves") == 0 && i + 1 < argc) {
      curves_path = argv[++i];
    } else if (std::strcmp(argv[i], "--report") == 0 && i + 1 < argc) {
      report_path = argv[++i];
    } else {
      selected.insert(std::atoi(argv[i]));
    }
  }
  set_thread_count(1);

  int failed = 0;
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char head[96];
    std::snprintf(head, sizeof(head), "criterion %2d %-17s %s", id, criteria[i].first, v.pass ? "PASS" : "FAIL");
    const std::string line = std::string(head) + "  " + v.detail + " [" + fmt("%.1f", secs) + " s]";
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    lines.push_back(line);
    failed += !v.pass;
  }
  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  std::printf("%d of %zu criteria failed\n", failed, lines.size());
  std::ofstream report(report_path);
  for (const auto& l : lines) report << l << "\n";
  report << failed << " of " << lines.size() << " criteria failed\n";
  return strict && failed ? 1 : 0;
}
