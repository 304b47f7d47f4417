#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hlgp/activation.hpp"
#include "hlgp/matrix.hpp"
#include "hlgp/rng.hpp"
#include "hlgp/tape.hpp"

namespace hlgp {

enum class CellKind { kHlstm, kLstm, kGru };

std::string_view to_string(CellKind kind);
CellKind cell_kind_from_string(std::string_view name);

struct CellSpec {
  CellKind kind = CellKind::kHlstm;
  std::size_t input_width = 0;
  std::size_t cell_width = 0;
  // Widths of the hidden layers inside every gate. Ignored for lstm/gru.
  std::vector<std::size_t> hidden_layer_widths;
  std::size_t stack_depth = 1;
  double io_dropout = 0.5;
  double hidden_dropout = 0.2;
  Activation hidden_activation = Activation::kLeakyRelu;

  void validate() const;
  std::size_t layer_input_width(std::size_t layer) const;
  // Hidden widths that actually apply (empty unless kind == hlstm).
  std::span<const std::size_t> gate_hidden_widths() const;

  bool operator==(const CellSpec& other) const = default;
};

// One control gate: zero or more hidden layers, then an output projection
// squashed by the gate activation.
struct DnnGate {
  std::vector<AffineLayer> hidden;
  Activation hidden_activation = Activation::kLeakyRelu;
  double hidden_dropout = 0.0;
  AffineLayer output;
  Activation gate_activation = Activation::kSigmoid;

  bool operator==(const DnnGate& other) const = default;
};

// One layer of a stack. LSTM-family gates are ordered f, i, o, g; GRU gates
// are ordered z (update), r (reset), n (candidate).
struct CellLayer {
  CellKind kind = CellKind::kHlstm;
  std::size_t input_width = 0;
  std::size_t cell_width = 0;
  std::vector<DnnGate> gates;

  bool operator==(const CellLayer& other) const = default;
};

struct CellState {
  Vector h;
  Vector c;  // empty for GRU

  bool operator==(const CellState& other) const = default;
};

// A stack of recurrent layers followed by a dense linear readout.
class Model {
 public:
  Model() = default;

  // Gaussian N(0, 1/fan_in) weights, zero biases, all-ones masks.
  static Model build(const CellSpec& spec, std::size_t output_width, Rng& rng);

  const CellSpec& spec() const { return spec_; }
  std::size_t output_width() const { return output_width_; }

  std::vector<CellLayer>& layers() { return layers_; }
  const std::vector<CellLayer>& layers() const { return layers_; }
  AffineLayer& readout() { return readout_; }
  const AffineLayer& readout() const { return readout_; }

  // Every affine layer, ordered by slot. Readout is last.
  std::vector<AffineLayer*> affine_layers();
  std::vector<const AffineLayer*> affine_layers() const;
  // Gate matrices only: the layers that grow and prune.
  std::vector<AffineLayer*> masked_layers();
  std::vector<const AffineLayer*> masked_layers() const;
  std::size_t slot_count() const;

  // Replaces the internal activation of every gate hidden layer.
  void set_hidden_activation(Activation kind);

  Gradients zero_gradients() const;

  bool operator==(const Model& other) const = default;

 private:
  void assign_slots();

  CellSpec spec_;
  std::size_t output_width_ = 0;
  std::vector<CellLayer> layers_;
  AffineLayer readout_;
};

// Tape-level recording. `rng` may be null in eval mode.
struct StateNodes {
  NodeId h = 0;
  NodeId c = 0;
};

NodeId record_gate(Tape& tape, const DnnGate& gate, NodeId input, Mode mode, Rng* rng);
StateNodes record_step(Tape& tape, const CellLayer& layer, NodeId x, const StateNodes& prev,
                       Mode mode, Rng* rng);
StateNodes record_zero_state(Tape& tape, const CellLayer& layer);

// Unrolls the whole stack over `inputs` (with input/output dropout in train
// mode) and returns the readout node for every step.
std::vector<NodeId> record_sequence(Tape& tape, const Model& model,
                                    std::span<const Vector> inputs, Mode mode, Rng* rng);

// Value-level single steps.
CellState hlstm_step(const CellLayer& layer, std::span<const double> x, const CellState& state,
                     Mode mode, Rng& rng);
CellState lstm_step(const CellLayer& layer, std::span<const double> x, const CellState& state);
Vector gru_step(const CellLayer& layer, std::span<const double> x, std::span<const double> h_prev);

struct UnrollResult {
  std::vector<Vector> outputs;            // top-layer h per step
  std::vector<CellState> final_states;    // one per stack layer
};

// Runs the recurrent stack (no readout, no io dropout). Initial states are
// zero unless supplied.
UnrollResult unroll(const Model& model, std::span<const Vector> sequence, Mode mode, Rng& rng,
                    const std::vector<CellState>* initial = nullptr);

// Readout outputs for every step, eval mode.
std::vector<Vector> predict(const Model& model, std::span<const Vector> inputs);

// Standalone layers for tests and tools.
CellLayer make_cell_layer(CellKind kind, std::size_t input_width, std::size_t cell_width,
                          std::span<const std::size_t> hidden_widths, Activation hidden_activation,
                          double hidden_dropout, const std::string& prefix, Rng* rng);

}  // namespace hlgp
