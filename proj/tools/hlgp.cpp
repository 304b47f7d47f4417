// hlgp: command-line driver for H-LSTM grow-and-prune training.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hlgp/checkpoint.hpp"
#include "hlgp/config.hpp"
#include "hlgp/errors.hpp"
#include "hlgp/metrics.hpp"
#include "hlgp/sparsity.hpp"
#include "hlgp/train.hpp"

namespace fs = std::filesystem;
using namespace hlgp;

namespace {

constexpr const char* kEventLog = "events.jsonl";
constexpr const char* kLockFile = ".hlgp.lock";

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms.count()));
  return buf;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

// Owns an output directory for one command. Files are written into a
// private staging directory and moved into place only by commit(); if the
// command fails the staging directory is discarded and the output directory
// is left as it was.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    created_ = !fs::exists(dir_);
    fs::create_directories(dir_);
    lock_ = dir_ / kLockFile;
    const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (created_) fs::remove(dir_);
      throw std::runtime_error("output directory " + dir_.string() + " is locked by another process (" +
                               lock_.string() + ")");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    (void)!::write(fd, pid.data(), pid.size());
    ::close(fd);
    staging_ = dir_ / (".staging-" + std::to_string(::getpid()));
    fs::remove_all(staging_);
    fs::create_directory(staging_);
    if (fs::exists(dir_ / kEventLog)) fs::copy_file(dir_ / kEventLog, staging_ / kEventLog);
    events_.open(staging_ / kEventLog, std::ios::app);
  }

  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  ~OutputDir() {
    events_.close();
    std::error_code ec;
    fs::remove_all(staging_, ec);
    fs::remove(lock_, ec);
    if (!committed_ && created_) fs::remove_all(dir_, ec);
  }

  fs::path staged(const std::string& name) const { return staging_ / name; }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream out(staged(name), std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + staged(name).string());
  }

  void log(const nlohmann::json& record) {
    nlohmann::json r = record;
    r["timestamp"] = utc_timestamp();
    events_ << r.dump() << '\n';
  }

  void log(const Event& e) {
    log(nlohmann::json{{"phase", e.phase},
                       {"epoch", e.epoch},
                       {"loss", finite_or_null(e.loss)},
                       {"metric", finite_or_null(e.metric)},
                       {"sparsity", e.sparsity}});
  }

  void commit() {
    events_.close();
    for (const auto& entry : fs::directory_iterator(staging_)) {
      fs::rename(entry.path(), dir_ / entry.path().filename());
    }
    committed_ = true;
  }

 private:
  fs::path dir_;
  fs::path lock_;
  fs::path staging_;
  std::ofstream events_;
  bool created_ = false;
  bool committed_ = false;
};

// "d/final" → "d/final.hlgp" when only the latter exists.
fs::path resolve_checkpoint(const std::string& arg) {
  fs::path p(arg);
  if (fs::is_regular_file(p)) return p;
  fs::path with_ext = p;
  with_ext += ".hlgp";
  if (fs::is_regular_file(with_ext)) return with_ext;
  throw std::runtime_error("no checkpoint at " + arg);
}

struct Loaded {
  Checkpoint ckpt;
  RunConfig config;
};

Loaded load(const std::string& arg) {
  Loaded l;
  l.ckpt = load_checkpoint(resolve_checkpoint(arg));
  if (l.ckpt.config.empty()) throw std::runtime_error("checkpoint carries no run configuration");
  l.config = parse_run_config(l.ckpt.config);
  return l;
}

std::string checkpoint_name(const TrainingState& s) { return phase_tag(s.phase, s.prune_iteration) + ".hlgp"; }

Hooks hooks_for(OutputDir& out, const RunConfig& config, const GpSchedule& schedule) {
  Hooks h;
  h.on_event = [&out](const Event& e) { out.log(e); };
  h.on_checkpoint = [&out, &config, schedule](const TrainingState& s) {
    save_checkpoint(out.staged(checkpoint_name(s)), Checkpoint{s, schedule, dump_run_config(config)});
  };
  h.on_warning = [&out](const std::string& w) {
    std::cerr << "warning: " << w << '\n';
    out.log(nlohmann::json{{"phase", "warning"}, {"message", w}});
  };
  return h;
}

void save_state(OutputDir& out, const std::string& name, const TrainingState& s, const RunConfig& config,
                const GpSchedule& schedule) {
  save_checkpoint(out.staged(name), Checkpoint{s, schedule, dump_run_config(config)});
}

void print_metric(const Dataset& d, const std::string& split, double value) {
  std::printf("split=%s metric=%s value=%.17g\n", split.c_str(), std::string(to_string(d.metric)).c_str(),
              value);
}

void report(const Checkpoint& ckpt) {
  const Model& m = ckpt.state.model;
  const SizeReport size = count_params(m);
  std::cout << "phase: " << phase_tag(ckpt.state.phase, ckpt.state.prune_iteration) << "\n\n";
  const SizeRow row{std::string(to_string(m.spec().kind)), m.spec().stack_depth, size, std::nullopt};
  render_size_table(std::cout, std::span<const SizeRow>(&row, 1));
  std::cout << '\n';
  render_size_report(std::cout, size);
  std::cout << '\n';
  PhaseSparsityTable table = phase_table(ckpt.state.history);
  if (table.columns.empty()) {
    table.columns = {"Current"};
    table.reports = {sparsity_report(m)};
  }
  render_sparsity_table(std::cout, table);
  char buf[64];
  std::snprintf(buf, sizeof buf, "total sparsity: %.2f%%\n", 100.0 * total_sparsity(m));
  std::cout << '\n' << buf;
}

// Line-oriented text form; see README.
void export_text(std::ostream& os, const Checkpoint& ckpt) {
  const Model& m = ckpt.state.model;
  os << "hlgp-export 1\n";
  os << "spec kind=" << to_string(m.spec().kind) << " input_width=" << m.spec().input_width
     << " cell_width=" << m.spec().cell_width << " stack_depth=" << m.spec().stack_depth
     << " hidden_activation=" << to_string(m.spec().hidden_activation) << " hidden=";
  for (std::size_t k = 0; k < m.spec().gate_hidden_widths().size(); ++k) {
    os << (k ? "," : "") << m.spec().gate_hidden_widths()[k];
  }
  os << " output_width=" << m.output_width() << '\n';
  char buf[32];
  for (const AffineLayer* a : m.affine_layers()) {
    os << "layer " << a->name << ' ' << a->weight.rows() << ' ' << a->weight.cols() << '\n';
    for (std::size_t r = 0; r < a->weight.rows(); ++r) {
      os << 'w';
      for (std::size_t c = 0; c < a->weight.cols(); ++c) {
        std::snprintf(buf, sizeof buf, " %.17g", a->weight.weights(r, c));
        os << buf;
      }
      os << '\n';
    }
    for (std::size_t r = 0; r < a->weight.rows(); ++r) {
      os << "m ";
      for (std::size_t c = 0; c < a->weight.cols(); ++c) os << (a->weight.mask(r, c) ? '1' : '0');
      os << '\n';
    }
    os << 'b';
    for (double b : a->bias) {
      std::snprintf(buf, sizeof buf, " %.17g", b);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"H-LSTM grow-and-prune training"};
  app.require_subcommand(1);

  std::string config_path, out_dir, ckpt_path, resume_path, split = "eval", export_path;
  std::optional<double> sparsity;
  std::optional<std::size_t> epochs;

  auto* init = app.add_subcommand("init", "Write a seed checkpoint from a run configuration");
  init->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  init->add_option("--out", out_dir, "Output directory")->required();
  init->add_option("--sparsity", sparsity, "Override the seed sparsity")->check(CLI::Range(0.0, 0.999999));

  auto* train = app.add_subcommand("train", "Train a checkpoint for a number of epochs");
  train->add_option("checkpoint", ckpt_path, "Input checkpoint")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--epochs", epochs, "Epochs (default: training.train_epochs)");

  auto* grow = app.add_subcommand("grow", "Run the gradient-based growth phase");
  grow->add_option("checkpoint", ckpt_path, "Input checkpoint")->required();
  grow->add_option("--out", out_dir, "Output directory")->required();

  auto* prune = app.add_subcommand("prune", "Run iterative pruning with retraining and rollback");
  prune->add_option("checkpoint", ckpt_path, "Input checkpoint")->required();
  prune->add_option("--out", out_dir, "Output directory")->required();

  auto* gp = app.add_subcommand("gp", "Run the full grow-and-prune pipeline");
  gp->add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  gp->add_option("--resume", resume_path, "Continue from a phase checkpoint");
  gp->add_option("--out", out_dir, "Output directory (default: output_dir from the config)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on its task");
  eval->add_option("checkpoint", ckpt_path, "Checkpoint")->required();
  eval->add_option("--split", split, "eval or train")->check(CLI::IsMember({"eval", "train"}));

  auto* rep = app.add_subcommand("report", "Print size and sparsity tables");
  rep->add_option("checkpoint", ckpt_path, "Checkpoint")->required();

  auto* exp = app.add_subcommand("export", "Write weights and masks as text");
  exp->add_option("checkpoint", ckpt_path, "Checkpoint")->required();
  exp->add_option("--out", export_path, "Output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed()) {
      RunConfig config = load_run_config(config_path);
      if (sparsity) config.pipeline.schedule.seed_sparsity = *sparsity;
      validate(config);
      OutputDir out(out_dir);
      const TrainingState s = initialize(config.pipeline, task_input_width(config.task),
                                         task_output_width(config.task));
      save_state(out, "seed.hlgp", s, config, config.pipeline.schedule);
      out.write_text("config.json", dump_run_config(config));
      out.log(nlohmann::json{{"phase", "seed"}, {"epoch", 0}, {"sparsity", total_sparsity(s.model)}});
      out.commit();
    } else if (train->parsed() || grow->parsed() || prune->parsed()) {
      Loaded l = load(ckpt_path);
      const TaskData data = make_task(l.config.task);
      const TrainConfig& tc = l.config.pipeline.train;
      const GpSchedule& schedule = l.ckpt.schedule;
      OutputDir out(out_dir);
      const Hooks hooks = hooks_for(out, l.config, schedule);
      TrainingState& s = l.ckpt.state;
      if (train->parsed()) {
        train_phase(s, data.train, data.eval, tc, epochs.value_or(tc.train_epochs), "train", hooks);
        s.phase = Phase::kTrained;
        save_state(out, "trained.hlgp", s, l.config, schedule);
      } else if (grow->parsed()) {
        growth_phase(s, schedule, data.train, data.eval, tc, hooks);
      } else {
        const PruneOutcome o = prune_phase(s, schedule, data.train, data.eval, tc, hooks);
        out.log(nlohmann::json{{"phase", "prune-summary"},
                               {"committed_iterations", o.committed_iterations},
                               {"metric", finite_or_null(o.final_metric)},
                               {"diagnostic", o.diagnostic}});
        save_state(out, "post-prune.hlgp", s, l.config, schedule);
      }
      out.commit();
    } else if (gp->parsed()) {
      std::optional<TrainingState> resume;
      RunConfig config;
      if (!resume_path.empty()) {
        Loaded l = load(resume_path);
        config = l.config;
        resume = std::move(l.ckpt.state);
      } else if (!config_path.empty()) {
        config = load_run_config(config_path);
      } else {
        throw ContractError("gp needs --config or --resume");
      }
      if (out_dir.empty()) out_dir = config.output_dir;
      if (out_dir.empty()) throw ContractError("no output directory: pass --out or set output_dir");
      const TaskData data = make_task(config.task);
      OutputDir out(out_dir);
      out.write_text("config.json", dump_run_config(config));
      const TrainingState final_state =
          gp_pipeline(config.pipeline, data, hooks_for(out, config, config.pipeline.schedule), std::move(resume));
      out.log(nlohmann::json{{"phase", "final"},
                             {"epoch", final_state.epoch},
                             {"metric", finite_or_null(evaluate(final_state.model, data.eval))},
                             {"sparsity", total_sparsity(final_state.model)}});
      out.commit();
    } else if (eval->parsed()) {
      const Loaded l = load(ckpt_path);
      const TaskData data = make_task(l.config.task);
      const Dataset& d = split == "train" ? data.train : data.eval;
      print_metric(d, split, evaluate(l.ckpt.state.model, d));
    } else if (rep->parsed()) {
      report(load_checkpoint(resolve_checkpoint(ckpt_path)));
    } else if (exp->parsed()) {
      const Checkpoint ckpt = load_checkpoint(resolve_checkpoint(ckpt_path));
      if (export_path.empty()) {
        export_text(std::cout, ckpt);
      } else {
        const fs::path tmp = export_path + ".tmp";
        {
          std::ofstream os(tmp);
          export_text(os, ckpt);
          if (!os) throw std::runtime_error("cannot write " + export_path);
        }
        fs::rename(tmp, export_path);
      }
    }
  } catch (const ParseError& e) {
    std::cerr << "error: parse: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
