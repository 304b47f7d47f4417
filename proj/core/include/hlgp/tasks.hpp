#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "hlgp/cells.hpp"
#include "hlgp/matrix.hpp"
#include "hlgp/rng.hpp"

namespace hlgp {

enum class TaskKind { kAdding, kCopy, kCharLm };
enum class MetricKind { kMse, kTokenAccuracy, kBitsPerChar };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);
std::string_view to_string(MetricKind kind);
MetricKind metric_kind_from_string(std::string_view name);

// True when lower metric values are better (mse, bits per char).
bool lower_is_better(MetricKind metric);
bool meets_threshold(MetricKind metric, double value, double threshold);

// Supervision at one step: `value` for regression, `label` for classification.
struct Target {
  std::size_t step = 0;
  Vector value;
  std::size_t label = 0;

  bool operator==(const Target& other) const = default;
};

struct Sample {
  std::vector<Vector> inputs;
  std::vector<Target> targets;

  bool operator==(const Sample& other) const = default;
};

struct Dataset {
  TaskKind kind = TaskKind::kAdding;
  MetricKind metric = MetricKind::kMse;
  std::size_t input_width = 0;
  std::size_t output_width = 0;
  std::vector<Sample> samples;

  bool operator==(const Dataset& other) const = default;
};

struct TaskConfig {
  TaskKind kind = TaskKind::kAdding;
  std::size_t length = 30;       // adding: sequence length; char_lm: window length
  std::size_t payload_len = 5;   // copy
  std::size_t blank_len = 10;    // copy
  std::size_t vocab = 8;         // copy
  std::size_t train_size = 512;
  std::size_t eval_size = 256;
  std::uint64_t seed = 1;

  bool operator==(const TaskConfig& other) const = default;
};

struct TaskData {
  Dataset train;
  Dataset eval;
};

// Each step is (value in [0,1], marker in {0,1}) with exactly two markers;
// the final step is supervised with the sum of the two marked values.
Dataset gen_adding(std::size_t n_samples, std::size_t length, Rng& rng);

// One-hot width vocab+2 (tokens, blank = vocab, cue = vocab+1). Inputs are
// the payload, blank_len blanks, the cue, then payload_len blanks during
// which the payload must be emitted.
Dataset gen_copy(std::size_t n_samples, std::size_t payload_len, std::size_t blank_len,
                 std::size_t vocab, Rng& rng);

// Next-character prediction over windows of the embedded corpus. The first
// 90% of the text feeds train windows, the rest eval windows.
Dataset gen_char_lm(std::size_t n_samples, std::size_t length, bool eval_split, Rng& rng);
std::string_view embedded_corpus();
std::vector<char> corpus_alphabet();

// Deterministic in config.seed; train and eval never share a sample.
TaskData make_task(const TaskConfig& config);

// Maps a sample's inputs to one output vector per step.
using Predictor = std::function<std::vector<Vector>(std::span<const Vector>)>;

double evaluate(const Predictor& predictor, const Dataset& dataset);
double evaluate(const Model& model, const Dataset& dataset);

void export_dataset(std::ostream& os, const Dataset& dataset);
Dataset import_dataset(std::istream& is);

}  // namespace hlgp
