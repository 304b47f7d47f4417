#include "hlgp/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "hlgp/errors.hpp"

namespace hlgp {
namespace {

// floor(x) that treats values a hair below an integer as that integer.
std::size_t tolerant_floor(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::floor(x));
}

std::string layer_label(CellKind kind, std::size_t index) {
  const char* base = kind == CellKind::kHlstm ? "H-LSTM" : kind == CellKind::kLstm ? "LSTM" : "GRU";
  return std::string(base) + " layer" + std::to_string(index + 1);
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
  return buf;
}

}  // namespace

void GpSchedule::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractError("alpha must be in (0,1]");
  if (!(beta > 0.0 && beta < 1.0)) throw ContractError("beta must be in (0,1)");
  if (!(seed_sparsity >= 0.0 && seed_sparsity < 1.0)) {
    throw ContractError("seed_sparsity must be in [0,1)");
  }
}

std::size_t nearest_rank(std::size_t n, double p) {
  if (n == 0) throw ContractError("percentile of an empty set");
  if (!(p > 0.0 && p <= 1.0)) throw ContractError("percentile fraction must be in (0,1]");
  const double x = p * static_cast<double>(n);
  const double r = std::round(x);
  std::size_t k = std::abs(x - r) <= 1e-9 * std::max(1.0, x) ? static_cast<std::size_t>(r)
                                                              : static_cast<std::size_t>(std::ceil(x));
  return std::clamp<std::size_t>(k, 1, n);
}

double percentile_threshold(std::span<const double> values, double p) {
  const std::size_t k = nearest_rank(values.size(), p);
  std::vector<double> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return sorted[k - 1];
}

SeedMask seed_mask(std::size_t rows, std::size_t cols, double sparsity, Rng& rng) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw ContractError("seed sparsity must be in [0,1)");
  const std::size_t n = rows * cols;
  SeedMask out;
  out.mask = Mask(rows, cols, false);
  out.requested_active = std::min(n, tolerant_floor((1.0 - sparsity) * static_cast<double>(n)));

  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < out.requested_active; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out.mask.bits()[idx[i]] = 1;
  }

  std::vector<std::size_t> empty_rows, empty_cols;
  for (std::size_t r = 0; r < rows; ++r) {
    if (out.mask.row_empty(r)) empty_rows.push_back(r);
  }
  for (std::size_t c = 0; c < cols; ++c) {
    if (out.mask.col_empty(c)) empty_cols.push_back(c);
  }
  std::shuffle(empty_rows.begin(), empty_rows.end(), rng);
  std::shuffle(empty_cols.begin(), empty_cols.end(), rng);
  // Pairing an empty row with an empty column fixes both with one entry.
  const std::size_t paired = std::min(empty_rows.size(), empty_cols.size());
  for (std::size_t k = 0; k < paired; ++k) out.mask.set(empty_rows[k], empty_cols[k], true);
  for (std::size_t k = paired; k < empty_rows.size(); ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, cols - 1);
    out.mask.set(empty_rows[k], pick(rng), true);
  }
  for (std::size_t k = paired; k < empty_cols.size(); ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
    out.mask.set(pick(rng), empty_cols[k], true);
  }
  const std::size_t active = out.mask.active_count();
  out.repaired = active - out.requested_active;
  out.achieved_sparsity = n == 0 ? 0.0 : 1.0 - static_cast<double>(active) / static_cast<double>(n);
  return out;
}

GrowResult grow(MaskedMatrix& m, const Matrix& avg_grad, double alpha) {
  if (avg_grad.rows() != m.rows() || avg_grad.cols() != m.cols()) {
    throw ShapeError("gradient shape does not match mask shape");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractError("alpha must be in (0,1]");
  std::vector<double> mags(avg_grad.size());
  std::transform(avg_grad.data().begin(), avg_grad.data().end(), mags.begin(),
                 [](double g) { return std::abs(g); });
  GrowResult out;
  out.threshold = percentile_threshold(mags, alpha);
  auto bits = m.mask.bits();
  auto w = m.weights.data();
  for (std::size_t k = 0; k < mags.size(); ++k) {
    if (bits[k] == 0 && mags[k] > out.threshold) {
      bits[k] = 1;
      w[k] = 0.0;
      out.activated.emplace_back(k / m.cols(), k % m.cols());
    }
  }
  return out;
}

PruneResult prune_step(MaskedMatrix& m, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ContractError("beta must be in (0,1)");
  auto bits = m.mask.bits();
  auto w = m.weights.data();
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < bits.size(); ++k) {
    if (bits[k] != 0) active.push_back(k);
  }
  PruneResult out;
  out.active_before = active.size();
  if (active.empty()) {
    out.no_active = true;
    return out;
  }
  const std::size_t k = tolerant_floor(beta * static_cast<double>(active.size()));
  if (k == 0) return out;
  // Flat index order equals (row, col) order, so it breaks magnitude ties.
  std::partial_sort(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(k), active.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double wa = std::abs(w[a]);
                      const double wb = std::abs(w[b]);
                      return wa != wb ? wa < wb : a < b;
                    });
  for (std::size_t j = 0; j < k; ++j) {
    bits[active[j]] = 0;
    w[active[j]] = 0.0;
  }
  out.removed = k;
  return out;
}

std::size_t prune_neurons(std::span<MaskedMatrix* const> chain) {
  for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
    if (chain[j]->rows() != chain[j + 1]->cols()) {
      throw ShapeError("gate chain widths do not line up");
    }
  }
  std::size_t removed = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
      MaskedMatrix& in = *chain[j];
      MaskedMatrix& out = *chain[j + 1];
      for (std::size_t u = 0; u < in.rows(); ++u) {
        const bool no_input = in.mask.row_empty(u);
        const bool no_output = out.mask.col_empty(u);
        if (!no_input && !no_output) continue;
        if (no_input && no_output) continue;  // already removed
        for (std::size_t c = 0; c < in.cols(); ++c) {
          in.mask.set(u, c, false);
          in.weights(u, c) = 0.0;
        }
        for (std::size_t r = 0; r < out.rows(); ++r) {
          out.mask.set(r, u, false);
          out.weights(r, u) = 0.0;
        }
        ++removed;
        changed = true;
      }
    }
  }
  return removed;
}

std::size_t prune_neurons(DnnGate& gate) {
  if (gate.hidden.empty()) return 0;
  std::vector<MaskedMatrix*> chain;
  for (auto& h : gate.hidden) chain.push_back(&h.weight);
  chain.push_back(&gate.output.weight);
  return prune_neurons(chain);
}

std::size_t prune_neurons(Model& model) {
  std::size_t removed = 0;
  for (auto& layer : model.layers()) {
    for (auto& gate : layer.gates) removed += prune_neurons(gate);
  }
  return removed;
}

double LayerSparsity::sparsity() const {
  return total == 0 ? 0.0 : 1.0 - static_cast<double>(active) / static_cast<double>(total);
}

SparsityReport sparsity_report(const Model& model) {
  SparsityReport report;
  report.total.name = "Total";
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const CellLayer& layer = model.layers()[l];
    LayerSparsity row;
    row.name = layer_label(layer.kind, l);
    for (const auto& gate : layer.gates) {
      for (const auto& h : gate.hidden) {
        row.active += h.weight.active_count();
        row.total += h.weight.weights.size();
      }
      row.active += gate.output.weight.active_count();
      row.total += gate.output.weight.weights.size();
    }
    report.total.active += row.active;
    report.total.total += row.total;
    report.layers.push_back(std::move(row));
  }
  return report;
}

SparsityReport matrix_sparsity_report(const Model& model) {
  SparsityReport report;
  report.total.name = "Total";
  for (const AffineLayer* layer : model.masked_layers()) {
    LayerSparsity row{layer->name, layer->weight.active_count(), layer->weight.weights.size()};
    report.total.active += row.active;
    report.total.total += row.total;
    report.layers.push_back(std::move(row));
  }
  return report;
}

double total_sparsity(const Model& model) { return sparsity_report(model).total.sparsity(); }

void render_sparsity_table(std::ostream& os, const PhaseSparsityTable& table) {
  if (table.reports.size() != table.columns.size()) {
    throw ContractError("sparsity table columns and reports differ in length");
  }
  if (table.reports.empty()) return;
  const auto& first = table.reports.front();
  std::size_t name_w = 6;
  for (const auto& row : first.layers) name_w = std::max(name_w, row.name.size());
  std::size_t col_w = 8;
  for (const auto& c : table.columns) col_w = std::max(col_w, c.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(name_w), "Layers");
  os << buf;
  for (const auto& c : table.columns) {
    std::snprintf(buf, sizeof buf, "  %*s", static_cast<int>(col_w), c.c_str());
    os << buf;
  }
  os << '\n';
  auto emit = [&](const std::string& name, auto getter) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(name_w), name.c_str());
    os << buf;
    for (const auto& rep : table.reports) {
      std::snprintf(buf, sizeof buf, "  %*s", static_cast<int>(col_w),
                    percent(getter(rep).sparsity()).c_str());
      os << buf;
    }
    os << '\n';
  };
  for (std::size_t i = 0; i < first.layers.size(); ++i) {
    for (const auto& rep : table.reports) {
      if (rep.layers.size() != first.layers.size()) {
        throw ContractError("sparsity reports have different layer counts");
      }
    }
    emit(first.layers[i].name, [i](const SparsityReport& r) -> const LayerSparsity& {
      return r.layers[i];
    });
  }
  emit("Total", [](const SparsityReport& r) -> const LayerSparsity& { return r.total; });
}

void render_sparsity_rows(std::ostream& os, const PhaseSparsityTable& table) {
  if (table.reports.size() != table.columns.size()) {
    throw ContractError("sparsity table columns and reports differ in length");
  }
  os << "layer";
  for (const auto& c : table.columns) os << ',' << c;
  os << '\n';
  if (table.reports.empty()) return;
  char buf[64];
  auto emit_row = [&](const std::string& name, auto getter) {
    os << name;
    for (const auto& rep : table.reports) {
      std::snprintf(buf, sizeof buf, ",%.6f", getter(rep).sparsity());
      os << buf;
    }
    os << '\n';
  };
  for (std::size_t i = 0; i < table.reports.front().layers.size(); ++i) {
    emit_row(table.reports.front().layers[i].name,
             [i](const SparsityReport& r) -> const LayerSparsity& { return r.layers.at(i); });
  }
  emit_row("Total", [](const SparsityReport& r) -> const LayerSparsity& { return r.total; });
}

}  // namespace hlgp
