#pragma once

// Oracles and fixtures shared by the unit and acceptance tests. Everything
// here is written with plain loops and <cmath> so that it does not lean on
// the code under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "hlgp/cells.hpp"
#include "hlgp/tape.hpp"
#include "hlgp/tasks.hpp"
#include "hlgp/train.hpp"

namespace support {

using hlgp::Activation;
using hlgp::CellKind;
using hlgp::Model;
using hlgp::Rng;
using hlgp::Vector;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double apply(Activation kind, double z) {
  switch (kind) {
    case Activation::kIdentity: return z;
    case Activation::kSigmoid: return sigmoid(z);
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kLeakyRelu: return z >= 0.0 ? z : 0.01 * z;
  }
  return z;
}

// y = (W ⊙ M) x + b by explicit triple loop.
inline Vector matvec(const hlgp::AffineLayer& a, const Vector& x) {
  Vector y(a.weight.rows(), 0.0);
  for (std::size_t r = 0; r < a.weight.rows(); ++r) {
    double acc = a.bias[r];
    for (std::size_t c = 0; c < a.weight.cols(); ++c) {
      if (a.weight.mask(r, c)) acc += a.weight.weights(r, c) * x[c];
    }
    y[r] = acc;
  }
  return y;
}

inline Vector gate(const hlgp::DnnGate& g, const Vector& in) {
  Vector cur = in;
  for (const auto& h : g.hidden) {
    cur = matvec(h, cur);
    for (double& v : cur) v = apply(g.hidden_activation, v);
  }
  Vector out = matvec(g.output, cur);
  for (double& v : out) v = apply(g.gate_activation, v);
  return out;
}

inline Vector concat(const Vector& a, const Vector& b) {
  Vector v = a;
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

struct State {
  Vector h;
  Vector c;
};

// One eval-mode step of an LSTM-family layer (f, i, o, g gates).
inline State lstm_family_step(const hlgp::CellLayer& layer, const Vector& x, const State& s) {
  const Vector xh = concat(x, s.h);
  const Vector f = gate(layer.gates[0], xh);
  const Vector i = gate(layer.gates[1], xh);
  const Vector o = gate(layer.gates[2], xh);
  const Vector g = gate(layer.gates[3], xh);
  State out{Vector(layer.cell_width), Vector(layer.cell_width)};
  for (std::size_t k = 0; k < layer.cell_width; ++k) {
    out.c[k] = f[k] * s.c[k] + i[k] * g[k];
    out.h[k] = o[k] * std::tanh(out.c[k]);
  }
  return out;
}

inline Vector gru_step(const hlgp::CellLayer& layer, const Vector& x, const Vector& h) {
  const Vector xh = concat(x, h);
  const Vector z = gate(layer.gates[0], xh);
  const Vector r = gate(layer.gates[1], xh);
  Vector rh(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) rh[k] = r[k] * h[k];
  const Vector n = gate(layer.gates[2], concat(x, rh));
  Vector out(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) out[k] = (1.0 - z[k]) * n[k] + z[k] * h[k];
  return out;
}

// Top-layer outputs of a stacked eval-mode unroll from zero state.
inline std::vector<Vector> unroll(const Model& model, const std::vector<Vector>& xs) {
  const auto& layers = model.layers();
  std::vector<State> states;
  for (const auto& l : layers) {
    states.push_back({Vector(l.cell_width, 0.0), Vector(l.cell_width, 0.0)});
  }
  std::vector<Vector> outs;
  for (const Vector& x : xs) {
    Vector in = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].kind == CellKind::kGru) {
        states[l].h = gru_step(layers[l], in, states[l].h);
      } else {
        states[l] = lstm_family_step(layers[l], in, states[l]);
      }
      in = states[l].h;
    }
    outs.push_back(in);
  }
  return outs;
}

inline std::vector<Vector> predict(const Model& model, const std::vector<Vector>& xs) {
  std::vector<Vector> outs;
  for (const Vector& h : unroll(model, xs)) outs.push_back(matvec(model.readout(), h));
  return outs;
}

inline hlgp::CellSpec spec(CellKind kind, std::size_t in, std::size_t width,
                           std::vector<std::size_t> hidden = {}, std::size_t depth = 1,
                           Activation act = Activation::kLeakyRelu) {
  hlgp::CellSpec s;
  s.kind = kind;
  s.input_width = in;
  s.cell_width = width;
  s.hidden_layer_widths = std::move(hidden);
  s.stack_depth = depth;
  s.io_dropout = 0.0;
  s.hidden_dropout = 0.0;
  s.hidden_activation = act;
  return s;
}

// Random masks at the given density on every gate matrix; dormant weights
// zeroed.
inline void randomize_masks(Model& model, double density, Rng& rng) {
  std::bernoulli_distribution keep(density);
  for (auto* layer : model.masked_layers()) {
    for (auto& b : layer->weight.mask.bits()) b = keep(rng) ? 1 : 0;
    layer->weight.apply_mask();
  }
}

inline void randomize_biases(Model& model, Rng& rng, double scale = 0.5) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto* layer : model.affine_layers()) {
    for (double& b : layer->bias) b = n(rng);
  }
}

inline std::vector<Vector> random_sequence(std::size_t steps, std::size_t width, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vector> xs(steps, Vector(width));
  for (auto& x : xs) {
    for (double& v : x) v = n(rng);
  }
  return xs;
}

// Squared-error sample supervised at every step.
inline hlgp::Sample regression_sample(std::vector<Vector> xs, std::size_t out_width, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  hlgp::Sample s;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    hlgp::Target target;
    target.step = t;
    target.value.resize(out_width);
    for (double& v : target.value) v = n(rng);
    s.targets.push_back(std::move(target));
  }
  s.inputs = std::move(xs);
  return s;
}

// Independent loss: mean over targets of Σ (y − t)².
inline double oracle_loss(const Model& model, const hlgp::Sample& s) {
  const auto ys = predict(model, s.inputs);
  double total = 0.0;
  for (const auto& t : s.targets) {
    for (std::size_t k = 0; k < t.value.size(); ++k) {
      const double d = ys[t.step][k] - t.value[k];
      total += d * d;
    }
  }
  return total / static_cast<double>(s.targets.size());
}

// Which side of the kink every hidden ReLU / leaky ReLU unit sits on.
inline std::vector<bool> kink_signature(const Model& model, const hlgp::Sample& s) {
  std::vector<bool> sig;
  const auto& layers = model.layers();
  std::vector<State> states;
  for (const auto& l : layers) states.push_back({Vector(l.cell_width, 0.0), Vector(l.cell_width, 0.0)});
  for (const Vector& x : s.inputs) {
    Vector in = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Vector xh = concat(in, states[l].h);
      for (const auto& g : layers[l].gates) {
        Vector cur = xh;
        for (const auto& h : g.hidden) {
          cur = matvec(h, cur);
          for (double& v : cur) {
            sig.push_back(v > 0.0);
            v = apply(g.hidden_activation, v);
          }
        }
      }
      states[l] = lstm_family_step(layers[l], in, states[l]);
      in = states[l].h;
    }
  }
  return sig;
}

struct FdReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a ReLU kink
  std::size_t dormant_checked = 0;
};

// |a − n| / max(|a|, |n|, floor); below `floor` the comparison is absolute.
inline double rel_error(double a, double n, double floor = 1e-4) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Central differences of oracle_loss against `grads` for every weight and
// bias. Dormant weights are perturbed with their mask bit temporarily set.
inline FdReport finite_difference_check(Model& model, const hlgp::Sample& s,
                                        const hlgp::Gradients& grads, double eps = 1e-5) {
  FdReport rep;
  bool has_kinks = false;
  for (const auto& l : model.layers()) {
    for (const auto& g : l.gates) has_kinks = has_kinks || !g.hidden.empty();
  }
  const std::vector<bool> base_sig = has_kinks ? kink_signature(model, s) : std::vector<bool>{};
  auto probe = [&](double& w, double analytic, bool dormant) {
    const double saved = w;
    w = saved + eps;
    const double lp = oracle_loss(model, s);
    const bool kink_p = has_kinks && kink_signature(model, s) != base_sig;
    w = saved - eps;
    const double lm = oracle_loss(model, s);
    const bool kink_m = has_kinks && kink_signature(model, s) != base_sig;
    w = saved;
    if (kink_p || kink_m) {
      ++rep.skipped;
      return;
    }
    const double numeric = (lp - lm) / (2.0 * eps);
    rep.max_rel = std::max(rep.max_rel, rel_error(analytic, numeric));
    ++rep.checked;
    if (dormant) ++rep.dormant_checked;
  };
  for (auto* layer : model.affine_layers()) {
    const auto& g = grads[layer->slot];
    auto& mw = layer->weight;
    for (std::size_t r = 0; r < mw.rows(); ++r) {
      for (std::size_t c = 0; c < mw.cols(); ++c) {
        const bool dormant = !mw.mask(r, c);
        if (dormant) mw.mask.set(r, c, true);
        probe(mw.weights(r, c), g.weight(r, c), dormant);
        if (dormant) {
          mw.mask.set(r, c, false);
          mw.weights(r, c) = 0.0;
        }
      }
    }
    for (std::size_t k = 0; k < layer->bias.size(); ++k) probe(layer->bias[k], g.bias[k], false);
  }
  return rep;
}

// Sort-based oracle for the growth rule: indices (flat) of dormant entries
// strictly above the nearest-rank percentile of all |grad| values.
inline std::vector<std::size_t> oracle_grow(const std::vector<double>& grad,
                                            const std::vector<std::uint8_t>& mask, double alpha) {
  std::vector<double> sorted;
  for (double g : grad) sorted.push_back(std::abs(g));
  std::sort(sorted.begin(), sorted.end());
  const double scaled = alpha * static_cast<double>(sorted.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * scaled));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  const double threshold = sorted[rank - 1];
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < grad.size(); ++k) {
    if (mask[k] == 0 && std::abs(grad[k]) > threshold) out.push_back(k);
  }
  return out;
}

// Sort-based oracle for the pruning rule: flat indices of the ⌊β·A⌋ active
// entries with smallest |w|, ties by ascending index.
inline std::vector<std::size_t> oracle_prune(const std::vector<double>& w,
                                             const std::vector<std::uint8_t>& mask, double beta) {
  std::vector<std::pair<double, std::size_t>> active;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (mask[k] != 0) active.emplace_back(std::abs(w[k]), k);
  }
  std::sort(active.begin(), active.end());
  const double scaled = beta * static_cast<double>(active.size());
  const auto n = static_cast<std::size_t>(std::floor(scaled + 1e-9 * std::max(1.0, scaled)));
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(active[k].second);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace support
