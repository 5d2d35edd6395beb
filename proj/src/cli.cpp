#include "deeprec/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "deeprec/architecture.hpp"
#include "deeprec/checkpoint.hpp"
#include "deeprec/data.hpp"
#include "deeprec/experiments.hpp"
#include "deeprec/synthetic.hpp"
#include "deeprec/training.hpp"

namespace deeprec {

namespace fs = std::filesystem;

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

DayNumber require_date(const std::string& text, const char* flag) {
  const auto day = parse_date(text);
  if (!day) throw std::invalid_argument(std::string(flag) + ": expected YYYY-MM-DD, got '" + text + "'");
  return *day;
}

struct SplitOptions {
  std::string input;
  std::string train_start, train_end, test_start, test_end;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

struct TrainOptions {
  std::string data;
  std::string eval_data;
  std::string test_data;
  std::string arch = "n,128,128,128,n";
  std::string activation = "selu";
  bool tied = false;
  TrainConfig config;
  std::string checkpoint_dir;
  std::string metrics_out;
};

struct EvaluateOptions {
  std::string checkpoint;
  std::string data;
  std::string train_data;
  bool clip = false;
  int threads = 1;
};

struct PredictOptions {
  std::string checkpoint;
  std::string train_data;
  std::vector<std::string> users;
  std::string users_file;
  std::size_t top_k = 0;
  bool include_rated = false;
  bool clip = false;
  std::string out;
};

struct SynthOptions {
  SyntheticCorpusConfig config;
  std::string out;
  std::string first_day = "2005-01-01";
};

struct ParamsOptions {
  std::string arch;
  std::size_t n_items = 0;
  bool tied = false;
};

int run_split(const SplitOptions& o, std::ostream& out) {
  const auto records = read_ratings_file(o.input);
  if (records.empty()) throw std::invalid_argument("split: input has no ratings");
  DayNumber first = day_of(records.front().timestamp);
  DayNumber last = first;
  for (const auto& r : records) {
    first = std::min(first, day_of(r.timestamp));
    last = std::max(last, day_of(r.timestamp));
  }
  SplitSpec spec;
  spec.train_start = o.train_start.empty() ? first : require_date(o.train_start, "--train-start");
  spec.train_end = require_date(o.train_end, "--train-end");
  spec.test_start = o.test_start.empty() ? spec.train_end + 1 : require_date(o.test_start, "--test-start");
  spec.test_end = o.test_end.empty() ? std::max(last, spec.test_start) : require_date(o.test_end, "--test-end");
  spec.split_seed = o.seed;

  const auto split = time_split(records, spec);
  fs::create_directories(o.out_dir);
  const std::string ext = format_for_path(o.input) == TextFormat::Tsv ? ".tsv" : ".csv";
  const auto dir = fs::path(o.out_dir);
  write_ratings_file((dir / ("train" + ext)).string(), split.train_records);
  write_ratings_file((dir / ("test" + ext)).string(), split.test.records);
  write_ratings_file((dir / ("valid" + ext)).string(), split.validation.records);
  const std::string manifest = split_manifest_json(split, spec);
  std::ofstream((dir / "manifest.json").string()) << manifest << '\n';
  out << manifest << '\n';
  return kExitOk;
}

int run_train(TrainOptions o, std::ostream& out, std::ostream& err) {
  auto spec = parse_architecture(o.arch);
  spec.activation = parse_activation(o.activation);
  spec.tied = o.tied;
  spec.validate();

  const auto train_records = read_ratings_file(o.data);
  const auto train = RatingDataset::from_records(train_records);
  if (train.n_users() == 0) throw std::invalid_argument("train: no ratings in " + o.data);
  std::optional<EvalSet> validation;
  if (!o.eval_data.empty()) {
    std::size_t dropped = 0;
    validation = make_eval_set(train, read_ratings_file(o.eval_data), &dropped);
    if (dropped > 0) err << "note: dropped " << dropped << " eval ratings on users/items unseen in training\n";
  }

  Autoencoder<float> model(spec, train.n_items(), o.config.seed);
  err << "model " << architecture_signature(spec) << " n=" << train.n_items() << " params="
      << model.parameter_count() << " users=" << train.n_users() << " ratings=" << train.n_ratings() << '\n';

  std::unique_ptr<std::ofstream> metrics_file;
  std::ostream* metrics = &out;
  if (!o.metrics_out.empty()) {
    metrics_file = std::make_unique<std::ofstream>(o.metrics_out);
    if (!*metrics_file) throw std::runtime_error("cannot write metrics to '" + o.metrics_out + "'");
    metrics = metrics_file.get();
  }
  *metrics << metrics_csv_header() << '\n';

  const std::string train_path = fs::absolute(o.data).string();
  if (!o.checkpoint_dir.empty()) fs::create_directories(o.checkpoint_dir);
  FitHooks<float> hooks;
  hooks.on_epoch = [&](const EpochMetrics& m) {
    *metrics << metrics_csv_row(m) << '\n';
    metrics->flush();
  };
  if (!o.checkpoint_dir.empty()) {
    hooks.on_best = [&](const CheckpointRecord<float>& best) {
      auto record = best;
      record.train_data = train_path;
      save_checkpoint(record, (fs::path(o.checkpoint_dir) / "best.ckpt").string());
    };
  }

  auto result = fit(model, train, validation ? &*validation : nullptr, o.config, hooks);
  if (!o.checkpoint_dir.empty()) {
    CheckpointRecord<float> last{result.history.empty() ? 0 : result.history.back().epoch,
                                 model,
                                 model.params().zeros_like(),
                                 result.history.empty() ? NAN : result.history.back().valid_rmse,
                                 result.history.empty() ? NAN : result.history.back().train_mmse,
                                 train.item_tokens(),
                                 train_path};
    save_checkpoint(last, (fs::path(o.checkpoint_dir) / "last.ckpt").string());
  }
  if (result.diverged) {
    err << "diverged: " << result.divergence_message << '\n';
    return kExitDiverged;
  }
  if (result.best && std::isfinite(result.best->eval_rmse)) {
    err << "best epoch " << result.best->epoch << " valid_rmse=" << format_number(result.best->eval_rmse) << '\n';
  }
  if (!o.test_data.empty() && result.best) {
    const auto test = make_eval_set(train, read_ratings_file(o.test_data));
    const double rmse = evaluate(result.best->model, train, test, o.config.clip_predictions);
    err << "test_rmse=" << format_number(rmse) << " (best checkpoint, epoch " << result.best->epoch << ")\n";
  }
  return kExitOk;
}

struct LoadedModel {
  CheckpointRecord<float> record;
  RatingDataset train;
};

LoadedModel load_for_scoring(const std::string& checkpoint, const std::string& train_override,
                             std::ostream& err) {
  auto record = load_checkpoint<float>(checkpoint);
  const std::string train_path = train_override.empty() ? record.train_data : train_override;
  if (train_path.empty()) {
    throw std::invalid_argument("checkpoint does not record its training data; pass --train-data");
  }
  std::size_t dropped = 0;
  auto train = RatingDataset::from_records(read_ratings_file(train_path), record.item_tokens, &dropped);
  if (dropped > 0) err << "note: ignored " << dropped << " training ratings on items unknown to the model\n";
  if (train.n_items() != record.model.n_items()) {
    throw std::invalid_argument("training data does not match the checkpoint's item vocabulary");
  }
  return LoadedModel{std::move(record), std::move(train)};
}

int run_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& err) {
  set_thread_count(o.threads);
  auto loaded = load_for_scoring(o.checkpoint, o.train_data, err);
  std::size_t dropped = 0;
  const auto eval = make_eval_set(loaded.train, read_ratings_file(o.data), &dropped);
  if (dropped > 0) err << "note: dropped " << dropped << " ratings on users/items unseen in training\n";
  const double rmse = evaluate(loaded.record.model, loaded.train, eval, o.clip);
  out << "rmse=" << format_number(rmse) << '\n';
  return kExitOk;
}

int run_predict(const PredictOptions& o, std::ostream& out, std::ostream& err) {
  auto loaded = load_for_scoring(o.checkpoint, o.train_data, err);
  const auto& train = loaded.train;
  std::vector<std::string> tokens = o.users;
  if (!o.users_file.empty()) {
    std::ifstream in(o.users_file);
    if (!in) throw std::runtime_error("cannot open users file '" + o.users_file + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) tokens.push_back(line);
    }
  }
  if (tokens.empty()) throw std::invalid_argument("predict: no users given (--users or --users-file)");

  std::vector<std::uint32_t> ids;
  std::vector<std::string> kept;
  for (const auto& t : tokens) {
    const auto id = train.find_user(t);
    if (!id) {
      err << "warning: user '" << t << "' has no training ratings; skipped\n";
      continue;
    }
    ids.push_back(*id);
    kept.push_back(t);
  }

  std::unique_ptr<std::ofstream> file;
  std::ostream* sink = &out;
  if (!o.out.empty()) {
    file = std::make_unique<std::ofstream>(o.out);
    if (!*file) throw std::runtime_error("cannot write '" + o.out + "'");
    sink = file.get();
  }
  *sink << "user,item,score\n";
  const auto batch = make_batch<float>(train, ids);
  const Matrix<float> pred = loaded.record.model.predict(batch.ratings);
  char buf[32];
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::vector<std::uint32_t> items;
    for (std::uint32_t j = 0; j < train.n_items(); ++j) {
      if (o.include_rated || batch.mask(static_cast<Index>(r), j) == 0.0f) items.push_back(j);
    }
    auto score = [&](std::uint32_t j) {
      float s = pred(static_cast<Index>(r), j);
      return o.clip ? std::clamp(s, 1.0f, 5.0f) : s;
    };
    if (o.top_k > 0 && o.top_k < items.size()) {
      std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(o.top_k), items.end(),
                        [&](std::uint32_t a, std::uint32_t b) {
                          return score(a) > score(b) || (score(a) == score(b) && a < b);
                        });
      items.resize(o.top_k);
    }
    for (std::uint32_t j : items) {
      std::snprintf(buf, sizeof(buf), "%.6g", static_cast<double>(score(j)));
      *sink << kept[r] << ',' << train.item_token(j) << ',' << buf << '\n';
    }
  }
  return kExitOk;
}

int run_synth(SynthOptions o, std::ostream& out) {
  o.config.first_day = require_date(o.first_day, "--first-day");
  const auto records = generate_synthetic_corpus(o.config);
  if (o.out.empty()) {
    write_ratings(out, records, TextFormat::Csv);
  } else {
    write_ratings_file(o.out, records);
  }
  return kExitOk;
}

}  // namespace

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                   const std::string& self) {
  CLI::App app{"Deep autoencoder collaborative filtering: split, train, evaluate, predict", "deeprec"};
  app.require_subcommand(1);

  SplitOptions split;
  auto* split_cmd = app.add_subcommand("split", "Time-based train/test/validation split");
  split_cmd->add_option("--input", split.input, "Rating log (user,item,rating,timestamp)")->required();
  split_cmd->add_option("--train-start", split.train_start, "First training day (default: earliest)");
  split_cmd->add_option("--train-end", split.train_end, "Last training day, inclusive")->required();
  split_cmd->add_option("--test-start", split.test_start, "First testing day (default: train-end + 1)");
  split_cmd->add_option("--test-end", split.test_end, "Last testing day (default: latest)");
  split_cmd->add_option("--seed", split.seed, "Seed for the test/validation coin flips")->capture_default_str();
  split_cmd->add_option("--out-dir", split.out_dir, "Output directory")->capture_default_str();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train an autoencoder and write metrics/checkpoints");
  train_cmd->add_option("--data", train.data, "Training ratings")->required();
  train_cmd->add_option("--eval-data", train.eval_data, "Validation ratings for checkpoint selection");
  train_cmd->add_option("--test-data", train.test_data, "Test ratings scored once with the best checkpoint");
  train_cmd->add_option("--arch", train.arch, "Architecture, e.g. n,512,512,1024,dp(0.8),512,512,n")
      ->capture_default_str();
  train_cmd->add_option("--activation", train.activation, "sigmoid|tanh|relu|relu6|elu|lrelu|selu|linear")
      ->capture_default_str();
  train_cmd->add_flag("--tied", train.tied, "Decoder weights are transposed encoder weights");
  train_cmd->add_option("--lr", train.config.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", train.config.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--batch-size", train.config.batch_size, "Users per batch")->capture_default_str();
  train_cmd->add_option("--epochs", train.config.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--refeed", train.config.refeed_count,
                        "Dense re-feeding passes per iteration (1 when given without a value)")
      ->expected(0, 1)
      ->default_str("1");
  train_cmd->add_flag("--no-refeed-dropout", "Disable coding-layer dropout during re-feed passes");
  train_cmd->add_option("--eval-every", train.config.eval_every, "Validate every N epochs")->capture_default_str();
  train_cmd->add_option("--seed", train.config.seed, "Seed for init, shuffling and dropout")->capture_default_str();
  train_cmd->add_option("--threads", train.config.threads, "Worker threads (deterministic at 1)")
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-dir", train.checkpoint_dir, "Directory for best.ckpt and last.ckpt");
  train_cmd->add_option("--metrics-out", train.metrics_out, "Per-epoch metrics CSV (default: stdout)");
  train_cmd->add_flag("--clip-predictions", train.config.clip_predictions, "Clamp predictions to [1, 5] when scoring");

  EvaluateOptions evaluate_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "RMSE of a checkpoint on a ratings file");
  eval_cmd->add_option("--checkpoint", evaluate_opts.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", evaluate_opts.data, "Ratings to score (e.g. test.csv)")->required();
  eval_cmd->add_option("--train-data", evaluate_opts.train_data,
                       "Training ratings fed as model input (default: path recorded in the checkpoint)");
  eval_cmd->add_flag("--clip-predictions", evaluate_opts.clip, "Clamp predictions to [1, 5]");
  eval_cmd->add_option("--threads", evaluate_opts.threads, "Worker threads")->capture_default_str();

  PredictOptions predict;
  auto* predict_cmd = app.add_subcommand("predict", "Dense or top-K predictions for users as CSV");
  predict_cmd->add_option("--checkpoint", predict.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--train-data", predict.train_data, "Training ratings (default: recorded path)");
  predict_cmd->add_option("--users", predict.users, "User ids")->delimiter(',');
  predict_cmd->add_option("--users-file", predict.users_file, "File with one user id per line");
  predict_cmd->add_option("--top-k", predict.top_k, "Keep the K best unrated items (0 = all)")->capture_default_str();
  predict_cmd->add_flag("--include-rated", predict.include_rated, "Also score items the user already rated");
  predict_cmd->add_flag("--clip-predictions", predict.clip, "Clamp predictions to [1, 5]");
  predict_cmd->add_option("--out", predict.out, "Output CSV (default: stdout)");

  std::string plan_path;
  std::string exe = self;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation plan and aggregate the results");
  ablate_cmd->add_option("--plan", plan_path, "Plan JSON")->required();
  ablate_cmd->add_option("--exe", exe, "deeprec executable used for child runs");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic timestamped rating log");
  synth_cmd->add_option("--out", synth.out, "Output file (default: stdout)");
  synth_cmd->add_option("--users", synth.config.n_users, "Users")->capture_default_str();
  synth_cmd->add_option("--items", synth.config.n_items, "Items")->capture_default_str();
  synth_cmd->add_option("--rank", synth.config.rank, "Latent rank")->capture_default_str();
  synth_cmd->add_option("--ratings-per-user", synth.config.mean_ratings_per_user, "Mean ratings per user")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.config.noise_sd, "Rating noise standard deviation")->capture_default_str();
  synth_cmd->add_option("--first-day", synth.first_day, "First day of the log")->capture_default_str();
  synth_cmd->add_option("--days", synth.config.span_days, "Days covered by the log")->capture_default_str();
  synth_cmd->add_option("--seed", synth.config.seed, "Seed")->capture_default_str();

  ParamsOptions params;
  auto* params_cmd = app.add_subcommand("params", "Trainable parameter count of an architecture");
  params_cmd->add_option("--arch", params.arch, "Architecture string")->required();
  params_cmd->add_option("--n", params.n_items, "Item count bound to 'n'")->required();
  params_cmd->add_flag("--tied", params.tied, "Count tied weights once");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*split_cmd) return run_split(split, out);
    if (*train_cmd) {
      if (train_cmd->count("--refeed") == 0) train.config.refeed_count = 0;
      train.config.refeed_dropout = train_cmd->count("--no-refeed-dropout") == 0;
      return run_train(train, out, err);
    }
    if (*eval_cmd) return run_evaluate(evaluate_opts, out, err);
    if (*predict_cmd) return run_predict(predict, out, err);
    if (*ablate_cmd) {
      const auto plan = load_ablation_plan(plan_path);
      const auto summary = run_ablation(plan, exe);
      std::size_t failed = 0;
      for (const auto& r : summary.runs) failed += r.exit_code != 0;
      err << summary.runs.size() << " runs, " << failed << " failed; summary in " << plan.output_dir << '\n';
      out << summary.summary_csv;
      return kExitOk;
    }
    if (*synth_cmd) return run_synth(synth, out);
    if (*params_cmd) {
      auto spec = parse_architecture(params.arch);
      spec.tied = params.tied;
      spec.validate();
      out << parameter_count(spec, params.n_items) << '\n';
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace deeprec
