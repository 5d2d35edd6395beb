#include "deeprec/experiments.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "deeprec/activation.hpp"
#include "deeprec/architecture.hpp"

extern char** environ;

namespace deeprec {

namespace fs = std::filesystem;

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string resolved_architecture(const GridPoint& p) {
  auto spec = parse_architecture(p.architecture);
  if (p.dropout) spec.dropout_prob = *p.dropout;
  spec.validate();
  return serialize_architecture(spec);
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
    out += keep ? c : '_';
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

}  // namespace

std::string GridPoint::key() const {
  if (!label.empty()) return label;
  std::string k = resolved_architecture(*this) + "|" + activation + "|lr=" + format_number(learning_rate);
  if (refeed > 0) k += "|rf=" + std::to_string(refeed);
  if (tied) k += "|tied";
  return k;
}

void AblationPlan::validate() const {
  if (name.empty()) throw std::invalid_argument("ablation plan needs a name");
  if (seeds.empty()) throw std::invalid_argument("ablation plan needs at least one seed");
  if (train_data.empty()) throw std::invalid_argument("ablation plan needs a dataset");
  if (output_dir.empty()) throw std::invalid_argument("ablation plan needs an output_dir");
  if (epochs < 0 || batch_size == 0 || workers < 1) throw std::invalid_argument("ablation plan has invalid run settings");
  for (const auto& p : grid) {
    resolved_architecture(p);
    parse_activation(p.activation);
    if (!(p.learning_rate > 0.0) || p.refeed < 0) {
      throw std::invalid_argument("grid point '" + p.key() + "' has invalid lr/refeed");
    }
  }
}

AblationPlan parse_ablation_plan(const std::string& json_text, const std::string& base_dir) {
  AblationPlan plan;
  try {
    const auto j = nlohmann::json::parse(json_text);
    plan.name = j.at("name").get<std::string>();
    const auto& dataset = j.at("dataset");
    if (dataset.is_string()) {
      const std::string dir = resolve(base_dir, dataset.get<std::string>());
      plan.train_data = (fs::path(dir) / "train.csv").string();
      plan.eval_data = (fs::path(dir) / "valid.csv").string();
    } else {
      plan.train_data = resolve(base_dir, dataset.at("train").get<std::string>());
      plan.eval_data = resolve(base_dir, dataset.value("eval", std::string()));
    }
    plan.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    plan.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    plan.epochs = j.value("epochs", plan.epochs);
    plan.batch_size = j.value("batch_size", plan.batch_size);
    plan.momentum = j.value("momentum", plan.momentum);
    plan.eval_every = j.value("eval_every", plan.eval_every);
    plan.workers = j.value("workers", plan.workers);
    for (const auto& g : j.value("grid", nlohmann::json::array())) {
      GridPoint p;
      p.label = g.value("label", std::string());
      p.architecture = g.value("arch", p.architecture);
      p.activation = g.value("activation", p.activation);
      if (g.contains("dropout") && !g["dropout"].is_null()) p.dropout = g["dropout"].get<double>();
      p.learning_rate = g.value("lr", p.learning_rate);
      p.refeed = g.value("refeed", p.refeed);
      p.tied = g.value("tied", p.tied);
      plan.grid.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed ablation plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

AblationPlan load_ablation_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open plan '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ablation_plan(ss.str(), fs::path(path).parent_path().string());
}

std::vector<std::string> train_arguments(const AblationPlan& plan, const GridPoint& point,
                                         std::uint64_t seed, const std::string& metrics_path) {
  std::vector<std::string> args = {
      "train",
      "--data", plan.train_data,
      "--arch", resolved_architecture(point),
      "--activation", point.activation,
      "--lr", format_number(point.learning_rate),
      "--momentum", format_number(plan.momentum),
      "--batch-size", std::to_string(plan.batch_size),
      "--epochs", std::to_string(plan.epochs),
      "--eval-every", std::to_string(plan.eval_every),
      "--seed", std::to_string(seed),
      "--threads", "1",
      "--metrics-out", metrics_path,
  };
  if (!plan.eval_data.empty()) {
    args.push_back("--eval-data");
    args.push_back(plan.eval_data);
  }
  if (point.refeed > 0) {
    args.push_back("--refeed");
    args.push_back(std::to_string(point.refeed));
  }
  if (point.tied) args.push_back("--tied");
  return args;
}

namespace {

pid_t spawn_child(const std::string& executable, const std::vector<std::string>& args,
                  const std::string& log_path) {
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log_path.c_str(),
                                   O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);

  std::vector<std::string> storage;
  storage.push_back(executable);
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);

  pid_t pid = -1;
  const int rc = posix_spawn(&pid, executable.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  return rc == 0 ? pid : -1;
}

int exit_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

}  // namespace

AblationSummary run_ablation(const AblationPlan& plan, const std::string& executable) {
  plan.validate();
  fs::create_directories(fs::path(plan.output_dir) / "runs");

  struct Pending {
    RunOutcome outcome;
    std::vector<std::string> args;
  };
  std::vector<Pending> queue;
  for (const auto& point : plan.grid) {
    for (std::uint64_t seed : plan.seeds) {
      const std::string stem = (fs::path(plan.output_dir) / "runs" /
                                (sanitize(point.key()) + "_seed" + std::to_string(seed)))
                                   .string();
      Pending p;
      p.outcome.config = point.key();
      p.outcome.seed = seed;
      p.outcome.metrics_path = stem + ".metrics.csv";
      p.outcome.log_path = stem + ".log";
      p.args = train_arguments(plan, point, seed, p.outcome.metrics_path);
      queue.push_back(std::move(p));
    }
  }

  std::vector<RunOutcome> done(queue.size());
  std::vector<std::pair<pid_t, std::size_t>> running;
  std::size_t next = 0;
  auto reap_one = [&] {
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    for (auto it = running.begin(); it != running.end(); ++it) {
      if (it->first == pid) {
        done[it->second].exit_code = exit_status(status);
        running.erase(it);
        return;
      }
    }
  };
  while (next < queue.size() || !running.empty()) {
    while (next < queue.size() && running.size() < static_cast<std::size_t>(plan.workers)) {
      done[next] = queue[next].outcome;
      std::error_code ec;
      fs::remove(queue[next].outcome.metrics_path, ec);
      const pid_t pid = spawn_child(executable, queue[next].args, queue[next].outcome.log_path);
      if (pid < 0) {
        done[next].exit_code = 127;
      } else {
        running.emplace_back(pid, next);
      }
      ++next;
    }
    if (!running.empty()) reap_one();
  }

  auto summary = summarize_runs(plan, std::move(done));
  std::ofstream(fs::path(plan.output_dir) / "summary.csv") << summary.summary_csv;
  std::ofstream(fs::path(plan.output_dir) / "long.csv") << summary.long_csv;
  std::ofstream(fs::path(plan.output_dir) / "runs.csv") << summary.runs_csv;
  return summary;
}

AblationSummary summarize_runs(const AblationPlan& plan, std::vector<RunOutcome> runs) {
  AblationSummary s;
  s.summary_csv = "plan,config,seed,epoch,train_rmse,valid_rmse\n";
  s.long_csv = "plan,config,seed,epoch,metric,value\n";
  s.runs_csv = "plan,config,seed,status,exit_code,best_valid_rmse\n";
  auto quote = [](const std::string& field) {
    if (field.find_first_of(",\"") == std::string::npos) return field;
    std::string q = "\"";
    for (char c : field) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (const auto& run : runs) {
    const std::string prefix = quote(plan.name) + "," + quote(run.config) + "," + std::to_string(run.seed);
    double best = NAN;
    std::ifstream in(run.metrics_path);
    std::string line;
    bool header = true;
    while (in && std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      const auto f = split_csv_line(line);
      if (f.size() < 5) continue;
      const std::string& epoch = f[0];
      const std::string& train_rmse = f[2];
      const std::string& valid_rmse = f[4];
      s.summary_csv += prefix + "," + epoch + "," + train_rmse + "," + valid_rmse + "\n";
      if (!train_rmse.empty()) s.long_csv += prefix + "," + epoch + ",train_rmse," + train_rmse + "\n";
      if (!valid_rmse.empty()) {
        s.long_csv += prefix + "," + epoch + ",valid_rmse," + valid_rmse + "\n";
        const double v = std::stod(valid_rmse);
        if (std::isnan(best) || v < best) best = v;
      }
    }
    s.runs_csv += prefix + "," + (run.exit_code == 0 ? "ok" : "failed") + "," +
                  std::to_string(run.exit_code) + "," + (std::isnan(best) ? "" : format_number(best)) + "\n";
  }
  s.runs = std::move(runs);
  return s;
}

}  // namespace deeprec
