#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hlgp/activation.hpp"
#include "hlgp/matrix.hpp"
#include "hlgp/rng.hpp"

namespace hlgp {

enum class Mode { kTrain, kEval };

struct LayerGrad {
  Matrix weight;
  Vector bias;

  bool operator==(const LayerGrad& other) const = default;
};

// Per-layer ∂L/∂W and ∂L/∂b, indexed by AffineLayer::slot. Weight gradients
// are dense: dormant positions carry the gradient the connection would have
// if it were active.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::span<const AffineLayer* const> layers);

  std::size_t size() const { return layers_.size(); }
  LayerGrad& operator[](std::size_t slot) { return layers_[slot]; }
  const LayerGrad& operator[](std::size_t slot) const { return layers_[slot]; }

  void zero();
  void add(const Gradients& other);
  void scale(double factor);
  bool all_finite() const;
  double squared_norm() const;

  bool operator==(const Gradients& other) const = default;

 private:
  std::vector<LayerGrad> layers_;
};

using NodeId = std::uint32_t;

// Records vector-valued primitives in execution order and replays them in
// reverse to propagate adjoints. Values live in one arena, so NodeIds stay
// valid as the tape grows; spans returned by value()/adjoint() do not.
class Tape {
 public:
  Tape() = default;

  NodeId input(std::span<const double> v);
  NodeId affine(const AffineLayer& layer, NodeId x);
  NodeId activate(Activation kind, NodeId x);
  NodeId multiply(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  // scale * x + shift, elementwise.
  NodeId scale_shift(NodeId x, double scale, double shift);
  NodeId concat(NodeId a, NodeId b);
  // Inverted dropout: kept units are scaled by 1/(1-p). Returns x for p == 0.
  NodeId dropout(NodeId x, double p, Rng& rng);

  // Scalar losses.
  NodeId squared_error(NodeId x, std::span<const double> target);
  NodeId softmax_cross_entropy(NodeId logits, std::size_t label);
  NodeId sum(std::span<const NodeId> scalars);

  std::span<const double> value(NodeId id) const;
  std::size_t width(NodeId id) const { return nodes_[id].size; }
  std::size_t node_count() const { return nodes_.size(); }
  // For an activation applied directly to an affine node, the layer that fed
  // it; null otherwise.
  const AffineLayer* activation_source(NodeId id) const;

  // Accumulates parameter gradients of the scalar `loss` into `grads`, which
  // must be shaped for every layer the tape touched.
  void backward(NodeId loss, Gradients& grads);
  // Adjoint ∂L/∂node from the most recent backward().
  std::span<const double> adjoint(NodeId id) const;

  void clear();

 private:
  enum class Op : std::uint8_t {
    kInput, kAffine, kActivate, kMultiply, kAdd, kScaleShift, kConcat,
    kDropout, kSquaredError, kSoftmaxXent, kSum,
  };

  struct Node {
    Op op;
    Activation act = Activation::kIdentity;
    NodeId a = 0;
    NodeId b = 0;
    std::uint32_t offset = 0;
    std::uint32_t size = 0;
    std::uint32_t aux = 0;  // offset into aux_ (dropout scale, softmax probs, targets)
    std::uint32_t aux_size = 0;
    double p0 = 0.0;
    const AffineLayer* layer = nullptr;
  };

  NodeId push(Node node, std::size_t size);
  double* val(NodeId id) { return values_.data() + nodes_[id].offset; }
  const double* val(NodeId id) const { return values_.data() + nodes_[id].offset; }
  void check(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> aux_;
  std::vector<double> adjoints_;
  std::vector<NodeId> sum_inputs_;
};

}  // namespace hlgp
