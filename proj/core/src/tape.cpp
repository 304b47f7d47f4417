#include "hlgp/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hlgp/errors.hpp"

namespace hlgp {

Gradients::Gradients(std::span<const AffineLayer* const> layers) {
  layers_.resize(layers.size());
  for (const AffineLayer* layer : layers) {
    if (layer->slot >= layers_.size()) throw ContractError("layer slot out of range");
    layers_[layer->slot].weight = Matrix(layer->weight.rows(), layer->weight.cols());
    layers_[layer->slot].bias.assign(layer->bias.size(), 0.0);
  }
}

void Gradients::zero() {
  for (auto& g : layers_) {
    g.weight.fill(0.0);
    std::fill(g.bias.begin(), g.bias.end(), 0.0);
  }
}

void Gradients::add(const Gradients& other) {
  if (other.size() != size()) throw ShapeError("gradient set size mismatch");
  for (std::size_t s = 0; s < layers_.size(); ++s) {
    auto dst = layers_[s].weight.data();
    auto src = other.layers_[s].weight.data();
    if (dst.size() != src.size()) throw ShapeError("gradient shape mismatch");
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    auto& db = layers_[s].bias;
    const auto& sb = other.layers_[s].bias;
    for (std::size_t k = 0; k < db.size(); ++k) db[k] += sb[k];
  }
}

void Gradients::scale(double factor) {
  for (auto& g : layers_) {
    for (double& v : g.weight.data()) v *= factor;
    for (double& v : g.bias) v *= factor;
  }
}

bool Gradients::all_finite() const {
  for (const auto& g : layers_) {
    if (!g.weight.all_finite()) return false;
    for (double v : g.bias) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& g : layers_) {
    for (double v : g.weight.data()) s += v * v;
    for (double v : g.bias) s += v * v;
  }
  return s;
}

void Tape::check(NodeId id) const {
  if (id >= nodes_.size()) throw ContractError("tape node id out of range");
}

NodeId Tape::push(Node node, std::size_t size) {
  node.offset = static_cast<std::uint32_t>(values_.size());
  node.size = static_cast<std::uint32_t>(size);
  values_.resize(values_.size() + size);
  nodes_.push_back(node);
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::span<const double> Tape::value(NodeId id) const {
  check(id);
  return {val(id), nodes_[id].size};
}

std::span<const double> Tape::adjoint(NodeId id) const {
  check(id);
  if (adjoints_.size() != values_.size()) throw ContractError("adjoint requested before backward");
  return {adjoints_.data() + nodes_[id].offset, nodes_[id].size};
}

void Tape::clear() {
  nodes_.clear();
  values_.clear();
  aux_.clear();
  adjoints_.clear();
  sum_inputs_.clear();
}

NodeId Tape::input(std::span<const double> v) {
  const NodeId id = push(Node{Op::kInput}, v.size());
  std::copy(v.begin(), v.end(), val(id));
  return id;
}

NodeId Tape::affine(const AffineLayer& layer, NodeId x) {
  check(x);
  const std::size_t cols = layer.weight.cols();
  const std::size_t rows = layer.weight.rows();
  if (nodes_[x].size != cols) {
    throw ShapeError("affine '" + layer.name + "' expects input width " + std::to_string(cols) +
                     ", got " + std::to_string(nodes_[x].size));
  }
  if (layer.bias.size() != rows) throw ShapeError("affine '" + layer.name + "' bias width");
  Node n{Op::kAffine};
  n.a = x;
  n.layer = &layer;
  const NodeId id = push(n, rows);
  const double* xv = val(x);
  double* y = val(id);
  const double* wd = layer.weight.weights.data().data();
  const std::uint8_t* md = layer.weight.mask.bits().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* wr = wd + i * cols;
    const std::uint8_t* mr = md + i * cols;
    double acc = 0.0;
    for (std::size_t k = 0; k < cols; ++k) acc += (mr[k] ? wr[k] : 0.0) * xv[k];
    y[i] = acc + layer.bias[i];
  }
  return id;
}

NodeId Tape::activate(Activation kind, NodeId x) {
  check(x);
  Node n{Op::kActivate};
  n.act = kind;
  n.a = x;
  const NodeId id = push(n, nodes_[x].size);
  const double* xv = val(x);
  double* y = val(id);
  for (std::size_t i = 0; i < nodes_[id].size; ++i) y[i] = hlgp::activate(kind, xv[i]);
  return id;
}

NodeId Tape::multiply(NodeId a, NodeId b) {
  check(a);
  check(b);
  if (nodes_[a].size != nodes_[b].size) throw ShapeError("multiply width mismatch");
  Node n{Op::kMultiply};
  n.a = a;
  n.b = b;
  const NodeId id = push(n, nodes_[a].size);
  const double* av = val(a);
  const double* bv = val(b);
  double* y = val(id);
  for (std::size_t i = 0; i < nodes_[id].size; ++i) y[i] = av[i] * bv[i];
  return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  if (nodes_[a].size != nodes_[b].size) throw ShapeError("add width mismatch");
  Node n{Op::kAdd};
  n.a = a;
  n.b = b;
  const NodeId id = push(n, nodes_[a].size);
  const double* av = val(a);
  const double* bv = val(b);
  double* y = val(id);
  for (std::size_t i = 0; i < nodes_[id].size; ++i) y[i] = av[i] + bv[i];
  return id;
}

NodeId Tape::scale_shift(NodeId x, double scale, double shift) {
  check(x);
  Node n{Op::kScaleShift};
  n.a = x;
  n.p0 = scale;
  const NodeId id = push(n, nodes_[x].size);
  const double* xv = val(x);
  double* y = val(id);
  for (std::size_t i = 0; i < nodes_[id].size; ++i) y[i] = scale * xv[i] + shift;
  return id;
}

NodeId Tape::concat(NodeId a, NodeId b) {
  check(a);
  check(b);
  Node n{Op::kConcat};
  n.a = a;
  n.b = b;
  const std::size_t na = nodes_[a].size;
  const std::size_t nb = nodes_[b].size;
  const NodeId id = push(n, na + nb);
  std::copy(val(a), val(a) + na, val(id));
  std::copy(val(b), val(b) + nb, val(id) + na);
  return id;
}

NodeId Tape::dropout(NodeId x, double p, Rng& rng) {
  check(x);
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout probability must be in [0,1)");
  if (p == 0.0) return x;
  Node n{Op::kDropout};
  n.a = x;
  n.aux = static_cast<std::uint32_t>(aux_.size());
  n.aux_size = nodes_[x].size;
  const NodeId id = push(n, nodes_[x].size);
  const double keep_scale = 1.0 / (1.0 - p);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double* xv = val(x);
  for (std::size_t i = 0; i < nodes_[id].size; ++i) {
    const double s = unit(rng) < p ? 0.0 : keep_scale;
    aux_.push_back(s);
    val(id)[i] = s * xv[i];
  }
  return id;
}

NodeId Tape::squared_error(NodeId x, std::span<const double> target) {
  check(x);
  if (target.size() != nodes_[x].size) throw ShapeError("squared_error target width mismatch");
  Node n{Op::kSquaredError};
  n.a = x;
  n.aux = static_cast<std::uint32_t>(aux_.size());
  n.aux_size = static_cast<std::uint32_t>(target.size());
  aux_.insert(aux_.end(), target.begin(), target.end());
  const NodeId id = push(n, 1);
  const double* xv = val(x);
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = xv[i] - target[i];
    s += d * d;
  }
  val(id)[0] = s;
  return id;
}

NodeId Tape::softmax_cross_entropy(NodeId logits, std::size_t label) {
  check(logits);
  const std::size_t k = nodes_[logits].size;
  if (label >= k) throw ShapeError("softmax label out of range");
  Node n{Op::kSoftmaxXent};
  n.a = logits;
  n.p0 = static_cast<double>(label);
  n.aux = static_cast<std::uint32_t>(aux_.size());
  n.aux_size = static_cast<std::uint32_t>(k);
  const double* z = val(logits);
  const double zmax = *std::max_element(z, z + k);
  double denom = 0.0;
  for (std::size_t i = 0; i < k; ++i) denom += std::exp(z[i] - zmax);
  const double log_denom = std::log(denom);
  for (std::size_t i = 0; i < k; ++i) aux_.push_back(std::exp(z[i] - zmax - log_denom));
  const NodeId id = push(n, 1);
  val(id)[0] = log_denom + zmax - val(logits)[label];
  return id;
}

NodeId Tape::sum(std::span<const NodeId> scalars) {
  Node n{Op::kSum};
  n.aux = static_cast<std::uint32_t>(sum_inputs_.size());
  n.aux_size = static_cast<std::uint32_t>(scalars.size());
  double s = 0.0;
  for (NodeId id : scalars) {
    check(id);
    if (nodes_[id].size != 1) throw ContractError("sum expects scalar nodes");
    sum_inputs_.push_back(id);
    s += val(id)[0];
  }
  const NodeId id = push(n, 1);
  val(id)[0] = s;
  return id;
}

void Tape::backward(NodeId loss, Gradients& grads) {
  check(loss);
  if (nodes_[loss].size != 1) throw ContractError("backward requires a scalar loss node");
  adjoints_.assign(values_.size(), 0.0);
  adjoints_[nodes_[loss].offset] = 1.0;

  for (std::size_t idx = loss + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    const double* gy = adjoints_.data() + n.offset;
    const double* y = values_.data() + n.offset;
    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kAffine: {
        const AffineLayer& layer = *n.layer;
        if (layer.slot >= grads.size()) throw ContractError("gradient set lacks slot for " + layer.name);
        LayerGrad& g = grads[layer.slot];
        if (!g.weight.same_shape(layer.weight.weights)) {
          throw ShapeError("gradient shape mismatch for " + layer.name);
        }
        const std::size_t cols = layer.weight.cols();
        const double* xv = values_.data() + nodes_[n.a].offset;
        double* gx = adjoints_.data() + nodes_[n.a].offset;
        const double* wd = layer.weight.weights.data().data();
        const std::uint8_t* md = layer.weight.mask.bits().data();
        double* gw = g.weight.data().data();
        for (std::size_t i = 0; i < n.size; ++i) {
          const double d = gy[i];
          if (d == 0.0) continue;
          g.bias[i] += d;
          const double* wr = wd + i * cols;
          const std::uint8_t* mr = md + i * cols;
          double* gr = gw + i * cols;
          for (std::size_t k = 0; k < cols; ++k) {
            gr[k] += d * xv[k];
            gx[k] += d * (mr[k] ? wr[k] : 0.0);
          }
        }
        break;
      }
      case Op::kActivate: {
        double* gx = adjoints_.data() + nodes_[n.a].offset;
        for (std::size_t i = 0; i < n.size; ++i) {
          gx[i] += gy[i] * activation_derivative_from_output(n.act, y[i]);
        }
        break;
      }
      case Op::kMultiply: {
        const double* av = values_.data() + nodes_[n.a].offset;
        const double* bv = values_.data() + nodes_[n.b].offset;
        double* ga = adjoints_.data() + nodes_[n.a].offset;
        double* gb = adjoints_.data() + nodes_[n.b].offset;
        for (std::size_t i = 0; i < n.size; ++i) {
          ga[i] += gy[i] * bv[i];
          gb[i] += gy[i] * av[i];
        }
        break;
      }
      case Op::kAdd: {
        double* ga = adjoints_.data() + nodes_[n.a].offset;
        double* gb = adjoints_.data() + nodes_[n.b].offset;
        for (std::size_t i = 0; i < n.size; ++i) {
          ga[i] += gy[i];
          gb[i] += gy[i];
        }
        break;
      }
      case Op::kScaleShift: {
        double* gx = adjoints_.data() + nodes_[n.a].offset;
        for (std::size_t i = 0; i < n.size; ++i) gx[i] += n.p0 * gy[i];
        break;
      }
      case Op::kConcat: {
        const std::size_t na = nodes_[n.a].size;
        double* ga = adjoints_.data() + nodes_[n.a].offset;
        double* gb = adjoints_.data() + nodes_[n.b].offset;
        for (std::size_t i = 0; i < na; ++i) ga[i] += gy[i];
        for (std::size_t i = na; i < n.size; ++i) gb[i - na] += gy[i];
        break;
      }
      case Op::kDropout: {
        double* gx = adjoints_.data() + nodes_[n.a].offset;
        const double* s = aux_.data() + n.aux;
        for (std::size_t i = 0; i < n.size; ++i) gx[i] += gy[i] * s[i];
        break;
      }
      case Op::kSquaredError: {
        const double* xv = values_.data() + nodes_[n.a].offset;
        const double* t = aux_.data() + n.aux;
        double* gx = adjoints_.data() + nodes_[n.a].offset;
        for (std::size_t i = 0; i < n.aux_size; ++i) gx[i] += gy[0] * 2.0 * (xv[i] - t[i]);
        break;
      }
      case Op::kSoftmaxXent: {
        const double* p = aux_.data() + n.aux;
        double* gz = adjoints_.data() + nodes_[n.a].offset;
        const auto label = static_cast<std::size_t>(n.p0);
        for (std::size_t i = 0; i < n.aux_size; ++i) {
          gz[i] += gy[0] * (p[i] - (i == label ? 1.0 : 0.0));
        }
        break;
      }
      case Op::kSum: {
        for (std::size_t j = 0; j < n.aux_size; ++j) {
          adjoints_[nodes_[sum_inputs_[n.aux + j]].offset] += gy[0];
        }
        break;
      }
    }
  }
}

const AffineLayer* Tape::activation_source(NodeId id) const {
  check(id);
  const Node& n = nodes_[id];
  if (n.op != Op::kActivate || nodes_[n.a].op != Op::kAffine) return nullptr;
  return nodes_[n.a].layer;
}

}  // namespace hlgp
