#include "hlgp/optim.hpp"

#include <cmath>
#include <string>

#include "hlgp/errors.hpp"

namespace hlgp {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "nesterov_sgd";
}

OptimizerKind optimizer_kind_from_string(std::string_view name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "nesterov_sgd" || name == "nesterov") return OptimizerKind::kNesterov;
  throw ContractError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(LrScheduleKind kind) {
  switch (kind) {
    case LrScheduleKind::kConstant: return "constant";
    case LrScheduleKind::kStepDecay: return "step_decay";
    case LrScheduleKind::kPerEpochDecay: return "per_epoch_decay";
  }
  return "constant";
}

LrScheduleKind lr_schedule_kind_from_string(std::string_view name) {
  if (name == "constant") return LrScheduleKind::kConstant;
  if (name == "step_decay") return LrScheduleKind::kStepDecay;
  if (name == "per_epoch_decay") return LrScheduleKind::kPerEpochDecay;
  throw ContractError("unknown lr schedule '" + std::string(name) + "'");
}

void LrSchedule::validate() const {
  if (!(base_lr > 0.0)) throw ContractError("learning rate must be positive");
  if (!(factor > 0.0 && factor <= 1.0)) throw ContractError("lr decay factor must be in (0,1]");
  if (period < 1) throw ContractError("lr decay period must be >= 1");
}

double LrSchedule::lr_at(std::uint64_t epoch) const {
  switch (kind) {
    case LrScheduleKind::kConstant:
      return base_lr;
    case LrScheduleKind::kStepDecay:
      return base_lr * std::pow(factor, static_cast<double>(epoch / period));
    case LrScheduleKind::kPerEpochDecay:
      return base_lr * std::pow(factor, static_cast<double>(epoch));
  }
  return base_lr;
}

OptimizerState OptimizerState::create(const OptimizerConfig& config, const Model& model) {
  if (!(config.lr > 0.0)) throw ContractError("learning rate must be positive");
  OptimizerState s;
  s.config = config;
  const Gradients zeros = model.zero_gradients();
  for (std::size_t k = 0; k < zeros.size(); ++k) {
    s.first.push_back(zeros[k]);
    if (config.kind == OptimizerKind::kAdam) s.second.push_back(zeros[k]);
  }
  return s;
}

void mask_optimizer_state(OptimizerState& opt, const Model& model) {
  for (const AffineLayer* layer : model.masked_layers()) {
    const auto bits = layer->weight.mask.bits();
    for (auto* buffers : {&opt.first, &opt.second}) {
      if (buffers->empty()) continue;
      auto w = (*buffers)[layer->slot].weight.data();
      for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k] == 0) w[k] = 0.0;
      }
    }
  }
}

namespace {

struct Hyper {
  OptimizerKind kind;
  double lr, beta1, beta2, eps, momentum, decay;
  double bias1, bias2;  // Adam bias corrections
};

inline void update_entry(const Hyper& h, double& w, double g, double& m, double* v) {
  g += h.decay * w;
  if (h.kind == OptimizerKind::kAdam) {
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
    const double m_hat = m / h.bias1;
    const double v_hat = *v / h.bias2;
    w -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
  } else {
    m = h.momentum * m + g;
    w -= h.lr * (g + h.momentum * m);
  }
}

}  // namespace

void optimizer_step(OptimizerState& opt, Model& model, const Gradients& grads) {
  const auto layers = model.affine_layers();
  if (grads.size() != layers.size() || opt.first.size() != layers.size()) {
    throw ShapeError("optimizer/gradient/model slot counts differ");
  }
  const bool adam = opt.config.kind == OptimizerKind::kAdam;
  if (adam && opt.second.size() != layers.size()) throw ShapeError("adam second moments missing");
  if (!grads.all_finite()) throw NumericError("non-finite gradient; optimizer step aborted");
  for (const AffineLayer* layer : layers) {
    const LayerGrad& g = grads[layer->slot];
    if (!g.weight.same_shape(layer->weight.weights) || g.bias.size() != layer->bias.size()) {
      throw ShapeError("gradient shape mismatch for " + layer->name);
    }
  }

  ++opt.steps;
  const auto& c = opt.config;
  Hyper h{c.kind, c.lr, c.beta1, c.beta2, c.epsilon, c.momentum, c.weight_decay, 1.0, 1.0};
  if (adam) {
    h.bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.steps));
    h.bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.steps));
  }

  for (AffineLayer* layer : layers) {
    const std::size_t s = layer->slot;
    const LayerGrad& g = grads[s];
    auto w = layer->weight.weights.data();
    const auto bits = layer->weight.mask.bits();
    auto m = opt.first[s].weight.data();
    auto v = adam ? opt.second[s].weight.data() : std::span<double>{};
    const auto gw = g.weight.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (bits[k] == 0) {
        w[k] = 0.0;
        m[k] = 0.0;
        if (adam) v[k] = 0.0;
        continue;
      }
      update_entry(h, w[k], gw[k], m[k], adam ? &v[k] : nullptr);
    }
    auto& mb = opt.first[s].bias;
    for (std::size_t k = 0; k < layer->bias.size(); ++k) {
      update_entry(h, layer->bias[k], g.bias[k], mb[k], adam ? &opt.second[s].bias[k] : nullptr);
    }
  }
}

}  // namespace hlgp
