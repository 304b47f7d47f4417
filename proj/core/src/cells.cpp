#include "hlgp/cells.hpp"

#include <cmath>
#include <string>

#include "hlgp/errors.hpp"

namespace hlgp {
namespace {

constexpr const char* kLstmGateNames[] = {"f", "i", "o", "g"};
constexpr const char* kGruGateNames[] = {"z", "r", "n"};

AffineLayer make_affine(std::string name, std::size_t in, std::size_t out, Rng* rng) {
  AffineLayer layer;
  layer.name = std::move(name);
  Matrix w(out, in);
  if (rng != nullptr) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    for (double& v : w.data()) v = normal(*rng);
  }
  layer.weight = MaskedMatrix(std::move(w));
  layer.bias.assign(out, 0.0);
  return layer;
}

void check_width(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + " width " + std::to_string(got) + " != expected " +
                     std::to_string(want));
  }
}

}  // namespace

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::kHlstm: return "hlstm";
    case CellKind::kLstm: return "lstm";
    case CellKind::kGru: return "gru";
  }
  return "hlstm";
}

CellKind cell_kind_from_string(std::string_view name) {
  if (name == "hlstm") return CellKind::kHlstm;
  if (name == "lstm") return CellKind::kLstm;
  if (name == "gru") return CellKind::kGru;
  throw ContractError("unknown cell kind '" + std::string(name) + "'");
}

void CellSpec::validate() const {
  if (input_width == 0) throw ContractError("cell input_width must be positive");
  if (cell_width == 0) throw ContractError("cell_width must be positive");
  if (stack_depth < 1) throw ContractError("stack_depth must be >= 1");
  if (io_dropout < 0.0 || io_dropout >= 1.0) throw ContractError("io_dropout must be in [0,1)");
  if (hidden_dropout < 0.0 || hidden_dropout >= 1.0) {
    throw ContractError("hidden_dropout must be in [0,1)");
  }
  for (std::size_t w : hidden_layer_widths) {
    if (w == 0) throw ContractError("hidden layer widths must be positive");
  }
}

std::size_t CellSpec::layer_input_width(std::size_t layer) const {
  return layer == 0 ? input_width : cell_width;
}

std::span<const std::size_t> CellSpec::gate_hidden_widths() const {
  if (kind != CellKind::kHlstm) return {};
  return hidden_layer_widths;
}

CellLayer make_cell_layer(CellKind kind, std::size_t input_width, std::size_t cell_width,
                          std::span<const std::size_t> hidden_widths, Activation hidden_activation,
                          double hidden_dropout, const std::string& prefix, Rng* rng) {
  CellLayer layer;
  layer.kind = kind;
  layer.input_width = input_width;
  layer.cell_width = cell_width;
  const bool gru = kind == CellKind::kGru;
  const std::size_t gate_count = gru ? 3 : 4;
  if (kind != CellKind::kHlstm) hidden_widths = {};
  for (std::size_t g = 0; g < gate_count; ++g) {
    const std::string gname = prefix + "." + (gru ? kGruGateNames[g] : kLstmGateNames[g]);
    DnnGate gate;
    gate.hidden_activation = hidden_activation;
    gate.hidden_dropout = hidden_dropout;
    std::size_t width = input_width + cell_width;
    for (std::size_t h = 0; h < hidden_widths.size(); ++h) {
      gate.hidden.push_back(
          make_affine(gname + ".hidden" + std::to_string(h + 1), width, hidden_widths[h], rng));
      width = hidden_widths[h];
    }
    gate.output = make_affine(gname + ".out", width, cell_width, rng);
    const bool candidate = gru ? g == 2 : g == 3;
    gate.gate_activation = candidate ? Activation::kTanh : Activation::kSigmoid;
    layer.gates.push_back(std::move(gate));
  }
  return layer;
}

Model Model::build(const CellSpec& spec, std::size_t output_width, Rng& rng) {
  spec.validate();
  if (output_width == 0) throw ContractError("output_width must be positive");
  Model m;
  m.spec_ = spec;
  m.output_width_ = output_width;
  for (std::size_t l = 0; l < spec.stack_depth; ++l) {
    m.layers_.push_back(make_cell_layer(spec.kind, spec.layer_input_width(l), spec.cell_width,
                                        spec.gate_hidden_widths(), spec.hidden_activation,
                                        spec.hidden_dropout, "layer" + std::to_string(l + 1),
                                        &rng));
  }
  m.readout_ = make_affine("readout", spec.cell_width, output_width, &rng);
  m.assign_slots();
  return m;
}

void Model::assign_slots() {
  std::size_t slot = 0;
  for (AffineLayer* layer : affine_layers()) layer->slot = slot++;
}

std::vector<AffineLayer*> Model::affine_layers() {
  std::vector<AffineLayer*> out = masked_layers();
  out.push_back(&readout_);
  return out;
}

std::vector<const AffineLayer*> Model::affine_layers() const {
  std::vector<const AffineLayer*> out = masked_layers();
  out.push_back(&readout_);
  return out;
}

std::vector<AffineLayer*> Model::masked_layers() {
  std::vector<AffineLayer*> out;
  for (auto& layer : layers_) {
    for (auto& gate : layer.gates) {
      for (auto& h : gate.hidden) out.push_back(&h);
      out.push_back(&gate.output);
    }
  }
  return out;
}

std::vector<const AffineLayer*> Model::masked_layers() const {
  std::vector<const AffineLayer*> out;
  for (const auto& layer : layers_) {
    for (const auto& gate : layer.gates) {
      for (const auto& h : gate.hidden) out.push_back(&h);
      out.push_back(&gate.output);
    }
  }
  return out;
}

std::size_t Model::slot_count() const { return affine_layers().size(); }

void Model::set_hidden_activation(Activation kind) {
  spec_.hidden_activation = kind;
  for (auto& layer : layers_) {
    for (auto& gate : layer.gates) gate.hidden_activation = kind;
  }
}

Gradients Model::zero_gradients() const {
  const auto layers = affine_layers();
  return Gradients(layers);
}

NodeId record_gate(Tape& tape, const DnnGate& gate, NodeId input, Mode mode, Rng* rng) {
  NodeId cur = input;
  for (const auto& hidden : gate.hidden) {
    cur = tape.activate(gate.hidden_activation, tape.affine(hidden, cur));
    if (mode == Mode::kTrain && gate.hidden_dropout > 0.0) {
      if (rng == nullptr) throw ContractError("train-mode dropout needs an rng");
      cur = tape.dropout(cur, gate.hidden_dropout, *rng);
    }
  }
  return tape.activate(gate.gate_activation, tape.affine(gate.output, cur));
}

StateNodes record_zero_state(Tape& tape, const CellLayer& layer) {
  const Vector zeros(layer.cell_width, 0.0);
  StateNodes s;
  s.h = tape.input(zeros);
  s.c = layer.kind == CellKind::kGru ? s.h : tape.input(zeros);
  return s;
}

StateNodes record_step(Tape& tape, const CellLayer& layer, NodeId x, const StateNodes& prev,
                       Mode mode, Rng* rng) {
  check_width(tape.width(x), layer.input_width, "step input");
  check_width(tape.width(prev.h), layer.cell_width, "hidden state");
  const NodeId xh = tape.concat(x, prev.h);
  if (layer.kind == CellKind::kGru) {
    const NodeId z = record_gate(tape, layer.gates[0], xh, mode, rng);
    const NodeId r = record_gate(tape, layer.gates[1], xh, mode, rng);
    const NodeId xrh = tape.concat(x, tape.multiply(r, prev.h));
    const NodeId n = record_gate(tape, layer.gates[2], xrh, mode, rng);
    const NodeId keep_new = tape.scale_shift(z, -1.0, 1.0);
    const NodeId h = tape.add(tape.multiply(keep_new, n), tape.multiply(z, prev.h));
    return {h, h};
  }
  check_width(tape.width(prev.c), layer.cell_width, "cell state");
  const NodeId f = record_gate(tape, layer.gates[0], xh, mode, rng);
  const NodeId i = record_gate(tape, layer.gates[1], xh, mode, rng);
  const NodeId o = record_gate(tape, layer.gates[2], xh, mode, rng);
  const NodeId g = record_gate(tape, layer.gates[3], xh, mode, rng);
  const NodeId c = tape.add(tape.multiply(f, prev.c), tape.multiply(i, g));
  const NodeId h = tape.multiply(o, tape.activate(Activation::kTanh, c));
  return {h, c};
}

std::vector<NodeId> record_sequence(Tape& tape, const Model& model,
                                    std::span<const Vector> inputs, Mode mode, Rng* rng) {
  if (inputs.empty()) throw ContractError("sequence must be nonempty");
  const CellSpec& spec = model.spec();
  const bool io_drop = mode == Mode::kTrain && spec.io_dropout > 0.0;
  if (io_drop && rng == nullptr) throw ContractError("train-mode dropout needs an rng");
  std::vector<StateNodes> states;
  for (const auto& layer : model.layers()) states.push_back(record_zero_state(tape, layer));
  std::vector<NodeId> outputs;
  outputs.reserve(inputs.size());
  for (const Vector& xt : inputs) {
    NodeId x = tape.input(xt);
    if (io_drop) x = tape.dropout(x, spec.io_dropout, *rng);
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
      states[l] = record_step(tape, model.layers()[l], x, states[l], mode, rng);
      x = states[l].h;
    }
    if (io_drop) x = tape.dropout(x, spec.io_dropout, *rng);
    outputs.push_back(tape.affine(model.readout(), x));
  }
  return outputs;
}

CellState hlstm_step(const CellLayer& layer, std::span<const double> x, const CellState& state,
                     Mode mode, Rng& rng) {
  if (layer.kind == CellKind::kGru) throw ContractError("hlstm_step called on a GRU layer");
  check_width(x.size(), layer.input_width, "step input");
  check_width(state.h.size(), layer.cell_width, "hidden state");
  check_width(state.c.size(), layer.cell_width, "cell state");
  Tape tape;
  const NodeId xn = tape.input(x);
  StateNodes prev{tape.input(state.h), tape.input(state.c)};
  const StateNodes next = record_step(tape, layer, xn, prev, mode, &rng);
  const auto h = tape.value(next.h);
  const auto c = tape.value(next.c);
  return {Vector(h.begin(), h.end()), Vector(c.begin(), c.end())};
}

CellState lstm_step(const CellLayer& layer, std::span<const double> x, const CellState& state) {
  for (const auto& gate : layer.gates) {
    if (!gate.hidden.empty()) throw ContractError("lstm_step requires single-layer gates");
  }
  Rng unused;
  return hlstm_step(layer, x, state, Mode::kEval, unused);
}

Vector gru_step(const CellLayer& layer, std::span<const double> x, std::span<const double> h_prev) {
  if (layer.kind != CellKind::kGru) throw ContractError("gru_step called on a non-GRU layer");
  check_width(x.size(), layer.input_width, "step input");
  check_width(h_prev.size(), layer.cell_width, "hidden state");
  Tape tape;
  const NodeId xn = tape.input(x);
  const NodeId hn = tape.input(h_prev);
  const StateNodes next = record_step(tape, layer, xn, {hn, hn}, Mode::kEval, nullptr);
  const auto h = tape.value(next.h);
  return Vector(h.begin(), h.end());
}

UnrollResult unroll(const Model& model, std::span<const Vector> sequence, Mode mode, Rng& rng,
                    const std::vector<CellState>* initial) {
  if (sequence.empty()) throw ContractError("unroll requires a nonempty sequence");
  const auto& layers = model.layers();
  if (initial != nullptr && initial->size() != layers.size()) {
    throw ShapeError("initial state count does not match stack depth");
  }
  Tape tape;
  std::vector<StateNodes> states;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (initial == nullptr) {
      states.push_back(record_zero_state(tape, layers[l]));
      continue;
    }
    const CellState& s = (*initial)[l];
    check_width(s.h.size(), layers[l].cell_width, "initial hidden state");
    StateNodes n;
    n.h = tape.input(s.h);
    if (layers[l].kind == CellKind::kGru) {
      n.c = n.h;
    } else {
      check_width(s.c.size(), layers[l].cell_width, "initial cell state");
      n.c = tape.input(s.c);
    }
    states.push_back(n);
  }
  UnrollResult result;
  for (const Vector& xt : sequence) {
    NodeId x = tape.input(xt);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      states[l] = record_step(tape, layers[l], x, states[l], mode, &rng);
      x = states[l].h;
    }
    const auto h = tape.value(x);
    result.outputs.emplace_back(h.begin(), h.end());
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    CellState s;
    const auto h = tape.value(states[l].h);
    s.h.assign(h.begin(), h.end());
    if (layers[l].kind != CellKind::kGru) {
      const auto c = tape.value(states[l].c);
      s.c.assign(c.begin(), c.end());
    }
    result.final_states.push_back(std::move(s));
  }
  return result;
}

std::vector<Vector> predict(const Model& model, std::span<const Vector> inputs) {
  Tape tape;
  const auto nodes = record_sequence(tape, model, inputs, Mode::kEval, nullptr);
  std::vector<Vector> out;
  out.reserve(nodes.size());
  for (NodeId n : nodes) {
    const auto v = tape.value(n);
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

}  // namespace hlgp
