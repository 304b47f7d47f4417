#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlgp/cells.hpp"
#include "hlgp/tasks.hpp"

namespace hlgp {

struct LayerSize {
  std::string name;
  std::uint64_t dense_params = 0;   // weights + biases
  std::uint64_t active_params = 0;  // active weights + biases

  std::uint64_t flops() const { return 2 * active_params; }
  double compression() const;

  bool operator==(const LayerSize& other) const = default;
};

// Recurrent layers only; the dense readout is not counted.
struct SizeReport {
  std::vector<LayerSize> layers;
  LayerSize total;

  bool operator==(const SizeReport& other) const = default;
};

// Closed-form dense counts. Each gate is a chain of affine maps
// [d+n → m1 → ... → mk → n]; LSTM and H-LSTM have four gates, GRU three.
SizeReport count_params(const CellSpec& spec);
// Dense counts from shapes, active counts from masks. Biases always count
// as active.
SizeReport count_params(const Model& model);

std::uint64_t count_flops(const SizeReport& report);
std::uint64_t count_flops(std::uint64_t active_params);

// "2.1M", "394K", "950".
std::string format_count(std::uint64_t n);

struct HiddenActivity {
  std::string name;              // hidden layer, e.g. "layer1.f.hidden1"
  std::uint64_t positive = 0;    // strictly positive outputs
  std::uint64_t total = 0;
  std::uint64_t downstream_flops = 0;  // 2 × nnz of the projection it feeds

  double fraction() const;
  // (1 − fraction) × downstream_flops.
  double flops_reduction() const;
};

struct ActivationStats {
  std::vector<HiddenActivity> layers;
  double fraction = 0.0;  // over all hidden outputs
  std::uint64_t raw_flops = 0;
  double effective_flops = 0.0;
  bool leaky = false;  // stats taken under leaky ReLU; zeros are not expected
};

// Eval-mode pass over every sample, counting strictly positive hidden-layer
// outputs.
ActivationStats relu_activation_stats(const Model& model, const Dataset& dataset);

struct Latency {
  std::chrono::nanoseconds median{0};
  std::vector<std::chrono::nanoseconds> samples;
};

// Median wall-clock of `repetitions` eval-mode forwards over `input`;
// `warmup` untimed runs go first.
Latency measure_latency(const Model& model, std::span<const Vector> input, std::size_t repetitions,
                        std::size_t warmup = 1);

struct SizeRow {
  std::string model;
  std::size_t layers = 1;
  SizeReport size;
  std::optional<std::chrono::nanoseconds> latency;
};

// Model / #Layers / #Param / FLOPs / CR / Latency, aligned.
void render_size_table(std::ostream& os, std::span<const SizeRow> rows);
// Per-layer dense, active, FLOPs and CR for one report.
void render_size_report(std::ostream& os, const SizeReport& report);

}  // namespace hlgp
