#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "hlgp/cells.hpp"
#include "hlgp/tape.hpp"

namespace hlgp {

enum class OptimizerKind { kAdam, kNesterov };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;
  double weight_decay = 0.0;

  bool operator==(const OptimizerConfig& other) const = default;
};

enum class LrScheduleKind { kConstant, kStepDecay, kPerEpochDecay };

std::string_view to_string(LrScheduleKind kind);
LrScheduleKind lr_schedule_kind_from_string(std::string_view name);

struct LrSchedule {
  LrScheduleKind kind = LrScheduleKind::kConstant;
  double base_lr = 3e-4;
  double factor = 1.0;
  std::size_t period = 1;

  void validate() const;
  double lr_at(std::uint64_t epoch) const;

  bool operator==(const LrSchedule& other) const = default;
};

// Adam keeps first/second moments; Nesterov SGD uses `first` as velocity.
// Moments at dormant positions are held at zero.
struct OptimizerState {
  OptimizerConfig config;
  std::uint64_t steps = 0;
  std::vector<LayerGrad> first;
  std::vector<LayerGrad> second;

  static OptimizerState create(const OptimizerConfig& config, const Model& model);

  bool operator==(const OptimizerState& other) const = default;
};

// Applies one update using config.lr, then re-masks. L2 weight decay is
// added to the gradient of active weights and biases only. Throws
// NumericError (leaving everything untouched) on a non-finite gradient.
void optimizer_step(OptimizerState& opt, Model& model, const Gradients& grads);

// Zeroes moment entries wherever the mask is dormant.
void mask_optimizer_state(OptimizerState& opt, const Model& model);

}  // namespace hlgp
