#include "hlgp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hlgp/errors.hpp"

namespace hlgp {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& section, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ParseError(section, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw ParseError(section, "unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(section, std::string("key '") + key + "': " + e.what());
  }
}

template <typename Enum, typename FromString>
void read_enum(const json& obj, const char* key, Enum& out, const std::string& section,
               FromString from_string) {
  if (!obj.contains(key)) return;
  std::string name;
  read(obj, key, name, section);
  try {
    out = from_string(name);
  } catch (const ContractError& e) {
    throw ParseError(section, e.what());
  }
}

}  // namespace

std::size_t task_input_width(const TaskConfig& task) {
  switch (task.kind) {
    case TaskKind::kAdding: return 2;
    case TaskKind::kCopy: return task.vocab + 2;
    case TaskKind::kCharLm: return corpus_alphabet().size();
  }
  return 0;
}

std::size_t task_output_width(const TaskConfig& task) {
  switch (task.kind) {
    case TaskKind::kAdding: return 1;
    case TaskKind::kCopy: return task.vocab;
    case TaskKind::kCharLm: return corpus_alphabet().size();
  }
  return 0;
}

void validate(const RunConfig& config) {
  const TaskConfig& t = config.task;
  if (t.train_size == 0 || t.eval_size == 0) throw ContractError("task split sizes must be positive");
  if (t.kind == TaskKind::kAdding && t.length < 2) throw ContractError("adding task needs length >= 2");
  if (t.kind == TaskKind::kCopy && (t.vocab < 2 || t.payload_len < 1)) {
    throw ContractError("copy task needs vocab >= 2 and payload_len >= 1");
  }
  if (t.kind == TaskKind::kCharLm && t.length < 1) throw ContractError("char_lm needs length >= 1");
  CellSpec cell = config.pipeline.cell;
  const std::size_t in = task_input_width(t);
  if (cell.input_width != 0 && cell.input_width != in) {
    throw ShapeError("cell.input_width " + std::to_string(cell.input_width) +
                     " does not match the task input width " + std::to_string(in));
  }
  cell.input_width = in;
  cell.validate();
  config.pipeline.schedule.validate();
  config.pipeline.train.validate();
  const OptimizerConfig& o = config.pipeline.train.optimizer;
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0) || !(o.beta2 >= 0.0 && o.beta2 < 1.0)) {
    throw ContractError("adam betas must be in [0,1)");
  }
  if (!(o.epsilon > 0.0)) throw ContractError("epsilon must be positive");
  if (!(o.momentum >= 0.0 && o.momentum < 1.0)) throw ContractError("momentum must be in [0,1)");
  if (o.weight_decay < 0.0) throw ContractError("weight_decay must be >= 0");
}

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError("config", e.what());
  }
  check_keys(root, "config",
             {"seed", "output_dir", "task", "cell", "schedule", "optimizer", "lr_schedule",
              "training"});
  RunConfig c;
  read(root, "seed", c.pipeline.seed, "config");
  c.task.seed = c.pipeline.seed;
  read(root, "output_dir", c.output_dir, "config");

  if (root.contains("task")) {
    const json& j = root["task"];
    check_keys(j, "task",
               {"kind", "length", "payload_len", "blank_len", "vocab", "train_size", "eval_size",
                "seed"});
    read_enum(j, "kind", c.task.kind, "task", task_kind_from_string);
    read(j, "length", c.task.length, "task");
    read(j, "payload_len", c.task.payload_len, "task");
    read(j, "blank_len", c.task.blank_len, "task");
    read(j, "vocab", c.task.vocab, "task");
    read(j, "train_size", c.task.train_size, "task");
    read(j, "eval_size", c.task.eval_size, "task");
    read(j, "seed", c.task.seed, "task");
  }
  if (root.contains("cell")) {
    const json& j = root["cell"];
    CellSpec& s = c.pipeline.cell;
    check_keys(j, "cell",
               {"kind", "input_width", "cell_width", "hidden_layer_widths", "stack_depth",
                "io_dropout", "hidden_dropout", "hidden_activation"});
    read_enum(j, "kind", s.kind, "cell", cell_kind_from_string);
    read(j, "input_width", s.input_width, "cell");
    read(j, "cell_width", s.cell_width, "cell");
    read(j, "hidden_layer_widths", s.hidden_layer_widths, "cell");
    read(j, "stack_depth", s.stack_depth, "cell");
    read(j, "io_dropout", s.io_dropout, "cell");
    read(j, "hidden_dropout", s.hidden_dropout, "cell");
    read_enum(j, "hidden_activation", s.hidden_activation, "cell", activation_from_string);
  }
  if (root.contains("schedule")) {
    const json& j = root["schedule"];
    GpSchedule& s = c.pipeline.schedule;
    check_keys(j, "schedule",
               {"alpha", "beta", "seed_sparsity", "growth_epochs", "retrain_epochs_per_prune",
                "accuracy_threshold"});
    read(j, "alpha", s.alpha, "schedule");
    read(j, "beta", s.beta, "schedule");
    read(j, "seed_sparsity", s.seed_sparsity, "schedule");
    read(j, "growth_epochs", s.growth_epochs, "schedule");
    read(j, "retrain_epochs_per_prune", s.retrain_epochs_per_prune, "schedule");
    read(j, "accuracy_threshold", s.accuracy_threshold, "schedule");
  }
  TrainConfig& tr = c.pipeline.train;
  if (root.contains("optimizer")) {
    const json& j = root["optimizer"];
    check_keys(j, "optimizer",
               {"kind", "lr", "beta1", "beta2", "epsilon", "momentum", "weight_decay"});
    read_enum(j, "kind", tr.optimizer.kind, "optimizer", optimizer_kind_from_string);
    read(j, "lr", tr.optimizer.lr, "optimizer");
    read(j, "beta1", tr.optimizer.beta1, "optimizer");
    read(j, "beta2", tr.optimizer.beta2, "optimizer");
    read(j, "epsilon", tr.optimizer.epsilon, "optimizer");
    read(j, "momentum", tr.optimizer.momentum, "optimizer");
    read(j, "weight_decay", tr.optimizer.weight_decay, "optimizer");
  }
  tr.schedule.base_lr = tr.optimizer.lr;
  if (root.contains("lr_schedule")) {
    const json& j = root["lr_schedule"];
    check_keys(j, "lr_schedule", {"kind", "factor", "period"});
    read_enum(j, "kind", tr.schedule.kind, "lr_schedule", lr_schedule_kind_from_string);
    read(j, "factor", tr.schedule.factor, "lr_schedule");
    read(j, "period", tr.schedule.period, "lr_schedule");
  }
  if (root.contains("training")) {
    const json& j = root["training"];
    check_keys(j, "training", {"batch_size", "shift_epochs", "train_epochs", "clip_norm"});
    read(j, "batch_size", tr.batch_size, "training");
    read(j, "shift_epochs", tr.shift_epochs, "training");
    read(j, "train_epochs", tr.train_epochs, "training");
    read(j, "clip_norm", tr.clip_norm, "training");
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("config", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& c) {
  const CellSpec& s = c.pipeline.cell;
  const GpSchedule& g = c.pipeline.schedule;
  const TrainConfig& tr = c.pipeline.train;
  json root;
  root["seed"] = c.pipeline.seed;
  root["output_dir"] = c.output_dir;
  root["task"] = {{"kind", to_string(c.task.kind)},
                  {"length", c.task.length},
                  {"payload_len", c.task.payload_len},
                  {"blank_len", c.task.blank_len},
                  {"vocab", c.task.vocab},
                  {"train_size", c.task.train_size},
                  {"eval_size", c.task.eval_size},
                  {"seed", c.task.seed}};
  root["cell"] = {{"kind", to_string(s.kind)},
                  {"input_width", s.input_width},
                  {"cell_width", s.cell_width},
                  {"hidden_layer_widths", s.hidden_layer_widths},
                  {"stack_depth", s.stack_depth},
                  {"io_dropout", s.io_dropout},
                  {"hidden_dropout", s.hidden_dropout},
                  {"hidden_activation", to_string(s.hidden_activation)}};
  root["schedule"] = {{"alpha", g.alpha},
                      {"beta", g.beta},
                      {"seed_sparsity", g.seed_sparsity},
                      {"growth_epochs", g.growth_epochs},
                      {"retrain_epochs_per_prune", g.retrain_epochs_per_prune},
                      {"accuracy_threshold", g.accuracy_threshold}};
  root["optimizer"] = {{"kind", to_string(tr.optimizer.kind)},
                       {"lr", tr.schedule.base_lr},
                       {"beta1", tr.optimizer.beta1},
                       {"beta2", tr.optimizer.beta2},
                       {"epsilon", tr.optimizer.epsilon},
                       {"momentum", tr.optimizer.momentum},
                       {"weight_decay", tr.optimizer.weight_decay}};
  root["lr_schedule"] = {{"kind", to_string(tr.schedule.kind)},
                         {"factor", tr.schedule.factor},
                         {"period", tr.schedule.period}};
  root["training"] = {{"batch_size", tr.batch_size},
                      {"shift_epochs", tr.shift_epochs},
                      {"train_epochs", tr.train_epochs},
                      {"clip_norm", tr.clip_norm}};
  return root.dump(2) + "\n";
}

}  // namespace hlgp
