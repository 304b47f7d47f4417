#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hlgp/cells.hpp"
#include "hlgp/optim.hpp"
#include "hlgp/rng.hpp"
#include "hlgp/sparsity.hpp"
#include "hlgp/tape.hpp"
#include "hlgp/tasks.hpp"

namespace hlgp {

struct TrainConfig {
  OptimizerConfig optimizer;
  LrSchedule schedule;
  std::size_t batch_size = 16;
  std::size_t shift_epochs = 3;
  std::size_t train_epochs = 20;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables

  void validate() const;
  bool operator==(const TrainConfig& other) const = default;
};

enum class Phase { kSeed, kPostGrowth, kPostShift, kTrained, kPostPrune, kFinal };

// "seed", "post-growth", "post-shift", "trained", "post-prune-iter-<k>", "final".
std::string phase_tag(Phase phase, std::uint32_t prune_iteration);
std::pair<Phase, std::uint32_t> phase_from_tag(const std::string& tag);

struct Event {
  std::string phase;
  std::uint64_t epoch = 0;
  double loss = 0.0;
  double metric = 0.0;
  double sparsity = 0.0;

  bool operator==(const Event& other) const = default;
};

struct History {
  std::vector<Event> events;
  // Named sparsity snapshots: "seed", "post-growth", "post-prune".
  std::vector<std::pair<std::string, SparsityReport>> snapshots;

  void snapshot(const std::string& name, const Model& model);
  const SparsityReport* find(const std::string& name) const;

  bool operator==(const History& other) const = default;
};

// Everything a run needs to continue bit-identically: the unit of
// checkpointing and rollback.
struct TrainingState {
  Model model;
  OptimizerState optimizer;
  Rng rng;
  std::uint64_t epoch = 0;  // global epoch counter driving the lr schedule
  Phase phase = Phase::kSeed;
  std::uint32_t prune_iteration = 0;
  History history;

  bool operator==(const TrainingState& other) const = default;
};

struct PipelineConfig {
  CellSpec cell;
  GpSchedule schedule;
  TrainConfig train;
  std::uint64_t seed = 1;

  bool operator==(const PipelineConfig& other) const = default;
};

using EventSink = std::function<void(const Event&)>;
using CheckpointSink = std::function<void(const TrainingState&)>;

struct Hooks {
  EventSink on_event;
  CheckpointSink on_checkpoint;
  std::function<void(const std::string&)> on_warning;
};

// Builds the model (input width taken from the task), applies seed masks,
// and records the "seed" snapshot.
TrainingState initialize(const PipelineConfig& config, std::size_t input_width,
                         std::size_t output_width);

// Mean per-target loss of one sample: squared error for mse tasks, softmax
// cross-entropy otherwise.
NodeId record_sample_loss(Tape& tape, const Model& model, const Sample& sample, MetricKind metric,
                          Mode mode, Rng* rng);
Gradients sample_gradients(const Model& model, const Sample& sample, MetricKind metric);

class GradientAccumulator {
 public:
  explicit GradientAccumulator(const Model& model);

  void add(const Gradients& grads);
  std::size_t count() const { return count_; }
  Gradients average() const;
  // |average|, elementwise.
  Gradients average_magnitude() const;

 private:
  Gradients sum_;
  std::size_t count_ = 0;
};

// |mean over samples of per-sample gradients| (eval mode, no updates).
Gradients accumulate_avg_grads(const Model& model, const Dataset& dataset);

// One shuffled minibatch pass; returns mean training loss.
double train_epoch(TrainingState& state, const Dataset& train, const TrainConfig& config);

// Trains `epochs` epochs, emitting one event per epoch.
void train_phase(TrainingState& state, const Dataset& train, const Dataset& eval,
                 const TrainConfig& config, std::size_t epochs, const std::string& phase,
                 const Hooks& hooks);

void growth_phase(TrainingState& state, const GpSchedule& schedule, const Dataset& train,
                  const Dataset& eval, const TrainConfig& config, const Hooks& hooks);

// Leaky ReLU → ReLU with weights untouched, then retrain. Returns false (and
// does nothing) when the model already uses ReLU.
bool activation_shift(TrainingState& state, const Dataset& train, const Dataset& eval,
                      const TrainConfig& config, std::size_t retrain_epochs, const Hooks& hooks);

struct PruneIteration {
  std::size_t removed = 0;
  std::size_t neurons_removed = 0;
  double best_metric = 0.0;
  bool met = false;
};

// Prunes every gate matrix by beta, removes dead neurons, then retrains
// until the threshold is met or the budget runs out.
PruneIteration prune_iteration(TrainingState& state, const GpSchedule& schedule,
                               const Dataset& train, const Dataset& eval,
                               const TrainConfig& config, const Hooks& hooks);

enum class PruneStop { kThresholdFailed, kNoProgress, kInputFailsThreshold };

struct PruneOutcome {
  std::size_t committed_iterations = 0;
  PruneStop stop = PruneStop::kThresholdFailed;
  double final_metric = 0.0;
  std::string diagnostic;
};

// Iterates prune_iteration, committing each iteration that meets the
// threshold and rolling back to the last commit (model, optimizer, rng) on
// the first that does not.
PruneOutcome prune_phase(TrainingState& state, const GpSchedule& schedule, const Dataset& train,
                         const Dataset& eval, const TrainConfig& config, const Hooks& hooks);

// seed → growth → activation shift → training → pruning → final. A state
// loaded from any phase checkpoint resumes from that point.
TrainingState gp_pipeline(const PipelineConfig& config, const TaskData& data, const Hooks& hooks,
                          std::optional<TrainingState> resume = std::nullopt);

PhaseSparsityTable phase_table(const History& history);

}  // namespace hlgp
