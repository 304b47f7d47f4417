#include "hlgp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>

#include "hlgp/errors.hpp"
#include "hlgp/tape.hpp"

namespace hlgp {
namespace {

std::uint64_t affine_params(std::uint64_t in, std::uint64_t out) { return in * out + out; }

std::string layer_label(CellKind kind, std::size_t index) {
  const char* base = kind == CellKind::kHlstm ? "H-LSTM" : kind == CellKind::kLstm ? "LSTM" : "GRU";
  return std::string(base) + " layer" + std::to_string(index + 1);
}

void finish_total(SizeReport& r) {
  r.total = LayerSize{"Total", 0, 0};
  for (const auto& l : r.layers) {
    r.total.dense_params += l.dense_params;
    r.total.active_params += l.active_params;
  }
}

std::string ratio(double x) {
  char buf[32];
  if (std::isinf(x)) return "inf";
  std::snprintf(buf, sizeof buf, "%.2fx", x);
  return buf;
}

}  // namespace

double LayerSize::compression() const {
  if (active_params == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(dense_params) / static_cast<double>(active_params);
}

SizeReport count_params(const CellSpec& spec) {
  spec.validate();
  SizeReport r;
  const std::size_t gates = spec.kind == CellKind::kGru ? 3 : 4;
  const auto hidden = spec.gate_hidden_widths();
  for (std::size_t l = 0; l < spec.stack_depth; ++l) {
    std::uint64_t in = spec.layer_input_width(l) + spec.cell_width;
    std::uint64_t per_gate = 0;
    for (std::size_t w : hidden) {
      per_gate += affine_params(in, w);
      in = w;
    }
    per_gate += affine_params(in, spec.cell_width);
    const std::uint64_t total = gates * per_gate;
    r.layers.push_back(LayerSize{layer_label(spec.kind, l), total, total});
  }
  finish_total(r);
  return r;
}

SizeReport count_params(const Model& model) {
  SizeReport r;
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerSize row{layer_label(layers[l].kind, l), 0, 0};
    auto add = [&row](const AffineLayer& a) {
      row.dense_params += a.weight.weights.size() + a.bias.size();
      row.active_params += a.weight.active_count() + a.bias.size();
    };
    for (const auto& gate : layers[l].gates) {
      for (const auto& h : gate.hidden) add(h);
      add(gate.output);
    }
    r.layers.push_back(std::move(row));
  }
  finish_total(r);
  return r;
}

std::uint64_t count_flops(const SizeReport& report) { return report.total.flops(); }

std::uint64_t count_flops(std::uint64_t active_params) { return 2 * active_params; }

std::string format_count(std::uint64_t n) {
  char buf[32];
  if (n >= 1'000'000) {
    std::snprintf(buf, sizeof buf, "%.1fM", static_cast<double>(n) / 1e6);
  } else if (n >= 1'000) {
    std::snprintf(buf, sizeof buf, "%.0fK", static_cast<double>(n) / 1e3);
  } else {
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(n));
  }
  return buf;
}

double HiddenActivity::fraction() const {
  return total == 0 ? 0.0 : static_cast<double>(positive) / static_cast<double>(total);
}

double HiddenActivity::flops_reduction() const {
  return (1.0 - fraction()) * static_cast<double>(downstream_flops);
}

ActivationStats relu_activation_stats(const Model& model, const Dataset& dataset) {
  ActivationStats stats;
  stats.leaky = model.spec().hidden_activation != Activation::kRelu;
  stats.raw_flops = count_flops(count_params(model));

  // Hidden layer → index into stats.layers, in model order.
  std::map<const AffineLayer*, std::size_t> index;
  for (const auto& layer : model.layers()) {
    for (const auto& gate : layer.gates) {
      for (std::size_t h = 0; h < gate.hidden.size(); ++h) {
        const MaskedMatrix& next = h + 1 < gate.hidden.size() ? gate.hidden[h + 1].weight
                                                               : gate.output.weight;
        index[&gate.hidden[h]] = stats.layers.size();
        stats.layers.push_back(HiddenActivity{gate.hidden[h].name, 0, 0, 2 * next.active_count()});
      }
    }
  }

  Tape tape;
  for (const Sample& s : dataset.samples) {
    tape.clear();
    record_sequence(tape, model, s.inputs, Mode::kEval, nullptr);
    for (NodeId id = 0; id < tape.node_count(); ++id) {
      const AffineLayer* src = tape.activation_source(id);
      if (src == nullptr) continue;
      const auto it = index.find(src);
      if (it == index.end()) continue;
      HiddenActivity& a = stats.layers[it->second];
      for (double v : tape.value(id)) a.positive += v > 0.0 ? 1 : 0;
      a.total += tape.width(id);
    }
  }

  std::uint64_t positive = 0;
  std::uint64_t total = 0;
  double reduction = 0.0;
  for (const auto& a : stats.layers) {
    positive += a.positive;
    total += a.total;
    reduction += a.flops_reduction();
  }
  stats.fraction = total == 0 ? 0.0 : static_cast<double>(positive) / static_cast<double>(total);
  stats.effective_flops = static_cast<double>(stats.raw_flops) - reduction;
  return stats;
}

Latency measure_latency(const Model& model, std::span<const Vector> input, std::size_t repetitions,
                        std::size_t warmup) {
  if (repetitions < 3) throw ContractError("latency needs at least 3 repetitions");
  if (input.empty()) throw ContractError("latency input sequence is empty");
  using Clock = std::chrono::steady_clock;
  for (std::size_t k = 0; k < warmup; ++k) (void)predict(model, input);
  Latency out;
  for (std::size_t k = 0; k < repetitions; ++k) {
    const auto t0 = Clock::now();
    const auto y = predict(model, input);
    const auto t1 = Clock::now();
    if (y.empty()) throw ContractError("empty forward");
    out.samples.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0));
  }
  std::vector<std::chrono::nanoseconds> sorted = out.samples;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  out.median = n % 2 == 1 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2;
  return out;
}

void render_size_table(std::ostream& os, std::span<const SizeRow> rows) {
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.model.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %7s  %8s  %8s  %8s  %12s\n", static_cast<int>(name_w),
                "Model", "#Layers", "#Param", "FLOPs", "CR", "Latency(ms)");
  os << buf;
  for (const auto& r : rows) {
    const std::string latency =
        r.latency ? std::to_string(static_cast<double>(r.latency->count()) / 1e6) : "-";
    std::snprintf(buf, sizeof buf, "%-*s  %7zu  %8s  %8s  %8s  %12s\n", static_cast<int>(name_w),
                  r.model.c_str(), r.layers, format_count(r.size.total.active_params).c_str(),
                  format_count(r.size.total.flops()).c_str(),
                  ratio(r.size.total.compression()).c_str(), latency.c_str());
    os << buf;
  }
}

void render_size_report(std::ostream& os, const SizeReport& report) {
  std::size_t name_w = 6;
  for (const auto& l : report.layers) name_w = std::max(name_w, l.name.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %12s  %12s  %12s  %8s\n", static_cast<int>(name_w),
                "Layers", "Dense", "Active", "FLOPs", "CR");
  os << buf;
  auto row = [&](const LayerSize& l) {
    std::snprintf(buf, sizeof buf, "%-*s  %12llu  %12llu  %12llu  %8s\n",
                  static_cast<int>(name_w), l.name.c_str(),
                  static_cast<unsigned long long>(l.dense_params),
                  static_cast<unsigned long long>(l.active_params),
                  static_cast<unsigned long long>(l.flops()), ratio(l.compression()).c_str());
    os << buf;
  };
  for (const auto& l : report.layers) row(l);
  row(report.total);
}

}  // namespace hlgp
