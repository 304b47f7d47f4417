#include "hlgp/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hlgp/errors.hpp"

namespace hlgp {
namespace {

constexpr const char* kPrunePrefix = "post-prune-iter-";

void emit(TrainingState& state, const Hooks& hooks, Event e) {
  e.sparsity = total_sparsity(state.model);
  state.history.events.push_back(e);
  if (hooks.on_event) hooks.on_event(e);
}

void checkpoint(const TrainingState& state, const Hooks& hooks) {
  if (hooks.on_checkpoint) hooks.on_checkpoint(state);
}

void warn(const Hooks& hooks, const std::string& message) {
  if (hooks.on_warning) hooks.on_warning(message);
}

bool has_hidden_layers(const Model& model) {
  for (const auto& layer : model.layers()) {
    for (const auto& gate : layer.gates) {
      if (!gate.hidden.empty()) return true;
    }
  }
  return false;
}

}  // namespace

void TrainConfig::validate() const {
  schedule.validate();
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  if (clip_norm < 0.0) throw ContractError("clip_norm must be >= 0");
}

std::string phase_tag(Phase phase, std::uint32_t prune_iteration) {
  switch (phase) {
    case Phase::kSeed: return "seed";
    case Phase::kPostGrowth: return "post-growth";
    case Phase::kPostShift: return "post-shift";
    case Phase::kTrained: return "trained";
    case Phase::kPostPrune: return kPrunePrefix + std::to_string(prune_iteration);
    case Phase::kFinal: return "final";
  }
  return "seed";
}

std::pair<Phase, std::uint32_t> phase_from_tag(const std::string& tag) {
  if (tag == "seed") return {Phase::kSeed, 0};
  if (tag == "post-growth") return {Phase::kPostGrowth, 0};
  if (tag == "post-shift") return {Phase::kPostShift, 0};
  if (tag == "trained") return {Phase::kTrained, 0};
  if (tag == "final") return {Phase::kFinal, 0};
  const std::string prefix = kPrunePrefix;
  if (tag.rfind(prefix, 0) == 0 && tag.size() > prefix.size()) {
    const std::string digits = tag.substr(prefix.size());
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return {Phase::kPostPrune, static_cast<std::uint32_t>(std::stoul(digits))};
    }
  }
  throw ContractError("unknown phase tag '" + tag + "'");
}

void History::snapshot(const std::string& name, const Model& model) {
  SparsityReport report = sparsity_report(model);
  for (auto& [n, r] : snapshots) {
    if (n == name) {
      r = std::move(report);
      return;
    }
  }
  snapshots.emplace_back(name, std::move(report));
}

const SparsityReport* History::find(const std::string& name) const {
  for (const auto& [n, r] : snapshots) {
    if (n == name) return &r;
  }
  return nullptr;
}

TrainingState initialize(const PipelineConfig& config, std::size_t input_width,
                         std::size_t output_width) {
  config.schedule.validate();
  config.train.validate();
  CellSpec spec = config.cell;
  if (spec.input_width != 0 && spec.input_width != input_width) {
    throw ShapeError("configured input width " + std::to_string(spec.input_width) +
                     " != task input width " + std::to_string(input_width));
  }
  spec.input_width = input_width;
  TrainingState state;
  state.rng = Rng(config.seed);
  state.model = Model::build(spec, output_width, state.rng);
  if (config.schedule.seed_sparsity > 0.0) {
    for (AffineLayer* layer : state.model.masked_layers()) {
      SeedMask sm = seed_mask(layer->weight.rows(), layer->weight.cols(),
                              config.schedule.seed_sparsity, state.rng);
      layer->weight.mask = std::move(sm.mask);
      layer->weight.apply_mask();
    }
  }
  OptimizerConfig opt = config.train.optimizer;
  opt.lr = config.train.schedule.base_lr;
  state.optimizer = OptimizerState::create(opt, state.model);
  state.history.snapshot("seed", state.model);
  return state;
}

NodeId record_sample_loss(Tape& tape, const Model& model, const Sample& sample, MetricKind metric,
                          Mode mode, Rng* rng) {
  if (sample.targets.empty()) throw ContractError("sample has no targets");
  const auto outputs = record_sequence(tape, model, sample.inputs, mode, rng);
  std::vector<NodeId> losses;
  losses.reserve(sample.targets.size());
  for (const Target& t : sample.targets) {
    if (t.step >= outputs.size()) throw ContractError("target step beyond sequence end");
    losses.push_back(metric == MetricKind::kMse
                         ? tape.squared_error(outputs[t.step], t.value)
                         : tape.softmax_cross_entropy(outputs[t.step], t.label));
  }
  const NodeId total = tape.sum(losses);
  if (losses.size() == 1) return total;
  return tape.scale_shift(total, 1.0 / static_cast<double>(losses.size()), 0.0);
}

Gradients sample_gradients(const Model& model, const Sample& sample, MetricKind metric) {
  Tape tape;
  Gradients grads = model.zero_gradients();
  const NodeId loss = record_sample_loss(tape, model, sample, metric, Mode::kEval, nullptr);
  tape.backward(loss, grads);
  return grads;
}

GradientAccumulator::GradientAccumulator(const Model& model) : sum_(model.zero_gradients()) {}

void GradientAccumulator::add(const Gradients& grads) {
  sum_.add(grads);
  ++count_;
}

Gradients GradientAccumulator::average() const {
  if (count_ == 0) throw ContractError("no gradients accumulated");
  Gradients avg = sum_;
  avg.scale(1.0 / static_cast<double>(count_));
  return avg;
}

Gradients GradientAccumulator::average_magnitude() const {
  Gradients avg = average();
  for (std::size_t s = 0; s < avg.size(); ++s) {
    for (double& v : avg[s].weight.data()) v = std::abs(v);
    for (double& v : avg[s].bias) v = std::abs(v);
  }
  return avg;
}

Gradients accumulate_avg_grads(const Model& model, const Dataset& dataset) {
  if (dataset.samples.empty()) throw ContractError("gradient accumulation needs a nonempty dataset");
  GradientAccumulator acc(model);
  Tape tape;
  Gradients per_sample = model.zero_gradients();
  for (const Sample& s : dataset.samples) {
    tape.clear();
    per_sample.zero();
    const NodeId loss = record_sample_loss(tape, model, s, dataset.metric, Mode::kEval, nullptr);
    tape.backward(loss, per_sample);
    acc.add(per_sample);
  }
  return acc.average_magnitude();
}

double train_epoch(TrainingState& state, const Dataset& train, const TrainConfig& config) {
  if (train.samples.empty()) throw ContractError("training set is empty");
  state.optimizer.config.lr = config.schedule.lr_at(state.epoch);
  std::vector<std::size_t> order(train.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), state.rng);

  Tape tape;
  Gradients grads = state.model.zero_gradients();
  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
    const std::size_t end = std::min(order.size(), begin + config.batch_size);
    grads.zero();
    for (std::size_t k = begin; k < end; ++k) {
      tape.clear();
      const NodeId loss = record_sample_loss(tape, state.model, train.samples[order[k]],
                                             train.metric, Mode::kTrain, &state.rng);
      loss_sum += tape.value(loss)[0];
      tape.backward(loss, grads);
    }
    grads.scale(1.0 / static_cast<double>(end - begin));
    if (config.clip_norm > 0.0) {
      const double norm = std::sqrt(grads.squared_norm());
      if (norm > config.clip_norm) grads.scale(config.clip_norm / norm);
    }
    optimizer_step(state.optimizer, state.model, grads);
  }
  ++state.epoch;
  return loss_sum / static_cast<double>(order.size());
}

void train_phase(TrainingState& state, const Dataset& train, const Dataset& eval,
                 const TrainConfig& config, std::size_t epochs, const std::string& phase,
                 const Hooks& hooks) {
  for (std::size_t e = 0; e < epochs; ++e) {
    const double loss = train_epoch(state, train, config);
    emit(state, hooks, Event{phase, state.epoch, loss, evaluate(state.model, eval), 0.0});
  }
}

void growth_phase(TrainingState& state, const GpSchedule& schedule, const Dataset& train,
                  const Dataset& eval, const TrainConfig& config, const Hooks& hooks) {
  schedule.validate();
  if (schedule.growth_epochs > 0 && has_hidden_layers(state.model) &&
      state.model.spec().hidden_activation != Activation::kLeakyRelu) {
    throw ContractError("growth expects leaky ReLU hidden activations");
  }
  for (std::size_t e = 0; e < schedule.growth_epochs; ++e) {
    const Gradients avg = accumulate_avg_grads(state.model, train);
    for (AffineLayer* layer : state.model.masked_layers()) {
      grow(layer->weight, avg[layer->slot].weight, schedule.alpha);
    }
    const double loss = train_epoch(state, train, config);
    emit(state, hooks, Event{"growth", state.epoch, loss, evaluate(state.model, eval), 0.0});
  }
  state.phase = Phase::kPostGrowth;
  state.history.snapshot("post-growth", state.model);
  checkpoint(state, hooks);
}

bool activation_shift(TrainingState& state, const Dataset& train, const Dataset& eval,
                      const TrainConfig& config, std::size_t retrain_epochs, const Hooks& hooks) {
  if (state.model.spec().hidden_activation == Activation::kRelu) return false;
  state.model.set_hidden_activation(Activation::kRelu);
  train_phase(state, train, eval, config, retrain_epochs, "shift", hooks);
  return true;
}

PruneIteration prune_iteration(TrainingState& state, const GpSchedule& schedule,
                               const Dataset& train, const Dataset& eval,
                               const TrainConfig& config, const Hooks& hooks) {
  PruneIteration it;
  for (AffineLayer* layer : state.model.masked_layers()) {
    it.removed += prune_step(layer->weight, schedule.beta).removed;
  }
  it.neurons_removed = prune_neurons(state.model);
  mask_optimizer_state(state.optimizer, state.model);
  if (it.removed == 0) return it;

  const MetricKind metric = eval.metric;
  const std::string phase = "prune-iter-" + std::to_string(state.prune_iteration + 1);
  it.best_metric = evaluate(state.model, eval);
  it.met = meets_threshold(metric, it.best_metric, schedule.accuracy_threshold);
  for (std::size_t e = 0; e < schedule.retrain_epochs_per_prune && !it.met; ++e) {
    const double loss = train_epoch(state, train, config);
    const double m = evaluate(state.model, eval);
    emit(state, hooks, Event{phase, state.epoch, loss, m, 0.0});
    if (lower_is_better(metric) ? m < it.best_metric : m > it.best_metric) it.best_metric = m;
    it.met = meets_threshold(metric, m, schedule.accuracy_threshold);
  }
  return it;
}

PruneOutcome prune_phase(TrainingState& state, const GpSchedule& schedule, const Dataset& train,
                         const Dataset& eval, const TrainConfig& config, const Hooks& hooks) {
  schedule.validate();
  PruneOutcome out;
  out.final_metric = evaluate(state.model, eval);
  if (!meets_threshold(eval.metric, out.final_metric, schedule.accuracy_threshold)) {
    out.stop = PruneStop::kInputFailsThreshold;
    out.diagnostic = "model fails the threshold before pruning (metric " +
                     std::to_string(out.final_metric) + "); returned unchanged";
    warn(hooks, out.diagnostic);
    return out;
  }
  TrainingState committed = state;
  while (true) {
    const PruneIteration it = prune_iteration(state, schedule, train, eval, config, hooks);
    if (it.removed == 0) {
      state = committed;
      out.stop = PruneStop::kNoProgress;
      out.diagnostic = "pruning ratio removes no weights at the current size; stopping";
      warn(hooks, out.diagnostic);
      break;
    }
    if (!it.met) {
      state = committed;
      out.stop = PruneStop::kThresholdFailed;
      out.diagnostic = "iteration " + std::to_string(state.prune_iteration + 1) +
                       " missed the threshold (best " + std::to_string(it.best_metric) +
                       "); rolled back";
      break;
    }
    ++state.prune_iteration;
    ++out.committed_iterations;
    state.phase = Phase::kPostPrune;
    state.history.snapshot("post-prune", state.model);
    out.final_metric = it.best_metric;
    committed = state;
    checkpoint(state, hooks);
  }
  out.final_metric = evaluate(state.model, eval);
  return out;
}

TrainingState gp_pipeline(const PipelineConfig& config, const TaskData& data, const Hooks& hooks,
                          std::optional<TrainingState> resume) {
  TrainingState state;
  if (resume) {
    state = std::move(*resume);
  } else {
    state = initialize(config, data.train.input_width, data.train.output_width);
    checkpoint(state, hooks);
  }
  if (state.phase == Phase::kSeed) {
    growth_phase(state, config.schedule, data.train, data.eval, config.train, hooks);
  }
  if (state.phase == Phase::kPostGrowth) {
    activation_shift(state, data.train, data.eval, config.train, config.train.shift_epochs, hooks);
    state.phase = Phase::kPostShift;
    checkpoint(state, hooks);
  }
  if (state.phase == Phase::kPostShift) {
    train_phase(state, data.train, data.eval, config.train, config.train.train_epochs, "train",
                hooks);
    state.phase = Phase::kTrained;
    checkpoint(state, hooks);
  }
  if (state.phase == Phase::kTrained || state.phase == Phase::kPostPrune) {
    prune_phase(state, config.schedule, data.train, data.eval, config.train, hooks);
    state.phase = Phase::kFinal;
    state.history.snapshot("post-prune", state.model);
    checkpoint(state, hooks);
  }
  return state;
}

PhaseSparsityTable phase_table(const History& history) {
  PhaseSparsityTable table;
  const SparsityReport* seed = history.find("seed");
  const SparsityReport* grown = history.find("post-growth");
  const SparsityReport* pruned = history.find("post-prune");
  if (seed == nullptr) return table;
  table.columns = {"Seed", "Post-Growth", "Post-Pruning"};
  table.reports = {*seed, grown ? *grown : *seed, pruned ? *pruned : (grown ? *grown : *seed)};
  return table;
}

}  // namespace hlgp
