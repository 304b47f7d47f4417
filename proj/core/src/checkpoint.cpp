#include "hlgp/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "hlgp/errors.hpp"

namespace hlgp {
namespace {

constexpr std::string_view kMagic = "HLGP";
constexpr std::array<std::string_view, 8> kSections = {"CONF", "SPEC", "SCHD", "PHAS",
                                                       "LAYR", "OPTM", "RNGS", "HIST"};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  // LEB128, used for mask run lengths.
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      u8(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    u8(static_cast<std::uint8_t>(v));
  }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view bytes, std::string section) : in_(bytes), section_(std::move(section)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t{static_cast<std::uint8_t>(in_[pos_ + k])} << (8 * k);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const std::uint8_t b = u8();
      v |= std::uint64_t{b & 0x7Fu} << shift;
      if ((b & 0x80) == 0) return v;
    }
    fail("varint too long");
  }
  // A count that must be coverable by at least `min_bytes_each` bytes per
  // element of the remaining input; guards allocations on corrupt input.
  std::size_t count(std::size_t min_bytes_each = 1) {
    const std::uint64_t n = u64();
    if (min_bytes_each > 0 && n > (in_.size() - pos_) / min_bytes_each) fail("count exceeds payload");
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    const std::size_t n = count(1);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void expect_end() {
    if (pos_ != in_.size()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(section_, what); }

 private:
  void need(std::size_t n) {
    if (in_.size() - pos_ < n) fail("truncated");
  }

  std::string_view in_;
  std::string section_;
  std::size_t pos_ = 0;
};

void put_section(Writer& out, std::string_view tag, std::string payload) {
  for (char c : tag) out.u8(static_cast<std::uint8_t>(c));
  out.u64(payload.size());
  for (char c : payload) out.u8(static_cast<std::uint8_t>(c));
}

std::string encode_spec(const Model& model) {
  const CellSpec& s = model.spec();
  Writer w;
  w.u8(static_cast<std::uint8_t>(s.kind));
  w.u64(s.input_width);
  w.u64(s.cell_width);
  w.u64(s.hidden_layer_widths.size());
  for (std::size_t h : s.hidden_layer_widths) w.u64(h);
  w.u64(s.stack_depth);
  w.f64(s.io_dropout);
  w.f64(s.hidden_dropout);
  w.u8(static_cast<std::uint8_t>(s.hidden_activation));
  w.u64(model.output_width());
  return w.take();
}

Model decode_spec(Reader& r) {
  CellSpec s;
  const std::uint8_t kind = r.u8();
  if (kind > static_cast<std::uint8_t>(CellKind::kGru)) r.fail("bad cell kind");
  s.kind = static_cast<CellKind>(kind);
  s.input_width = r.u64();
  s.cell_width = r.u64();
  s.hidden_layer_widths.resize(r.count(8));
  for (auto& h : s.hidden_layer_widths) h = r.u64();
  s.stack_depth = r.u64();
  s.io_dropout = r.f64();
  s.hidden_dropout = r.f64();
  const std::uint8_t act = r.u8();
  if (act > static_cast<std::uint8_t>(Activation::kLeakyRelu)) r.fail("bad activation");
  s.hidden_activation = static_cast<Activation>(act);
  const std::uint64_t output_width = r.u64();
  r.expect_end();
  constexpr std::uint64_t kMaxWidth = 1u << 20;
  if (s.input_width > kMaxWidth || s.cell_width > kMaxWidth || output_width > kMaxWidth ||
      s.stack_depth > 64) {
    r.fail("implausible dimensions");
  }
  for (std::size_t h : s.hidden_layer_widths) {
    if (h > kMaxWidth) r.fail("implausible dimensions");
  }
  try {
    Rng scratch(0);
    return Model::build(s, output_width, scratch);
  } catch (const std::logic_error& e) {
    r.fail(e.what());
  }
}

std::string encode_schedule(const GpSchedule& g) {
  Writer w;
  w.f64(g.alpha);
  w.f64(g.beta);
  w.f64(g.seed_sparsity);
  w.u64(g.growth_epochs);
  w.u64(g.retrain_epochs_per_prune);
  w.f64(g.accuracy_threshold);
  return w.take();
}

GpSchedule decode_schedule(Reader& r) {
  GpSchedule g;
  g.alpha = r.f64();
  g.beta = r.f64();
  g.seed_sparsity = r.f64();
  g.growth_epochs = r.u64();
  g.retrain_epochs_per_prune = r.u64();
  g.accuracy_threshold = r.f64();
  r.expect_end();
  return g;
}

// Runs alternate dormant/active starting with dormant; a leading active
// entry gives a zero-length first run.
void encode_mask(Writer& w, const Mask& mask) {
  std::vector<std::uint64_t> runs;
  std::uint8_t current = 0;
  std::uint64_t length = 0;
  for (std::uint8_t b : mask.bits()) {
    if (b != current) {
      runs.push_back(length);
      current = b;
      length = 0;
    }
    ++length;
  }
  runs.push_back(length);
  w.u64(runs.size());
  for (std::uint64_t run : runs) w.varint(run);
}

void decode_mask(Reader& r, Mask& mask) {
  const std::size_t n_runs = r.count(1);
  auto bits = mask.bits();
  std::size_t pos = 0;
  std::uint8_t current = 0;
  for (std::size_t k = 0; k < n_runs; ++k) {
    const std::uint64_t run = r.varint();
    if (run > bits.size() - pos) r.fail("mask runs overflow the matrix");
    std::fill_n(bits.begin() + static_cast<std::ptrdiff_t>(pos), run, current);
    pos += run;
    current ^= 1;
  }
  if (pos != bits.size()) r.fail("mask runs do not cover the matrix");
}

void encode_active(Writer& w, const Matrix& values, const Mask& mask) {
  const auto data = values.data();
  const auto bits = mask.bits();
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (bits[k] != 0) w.f64(data[k]);
  }
}

void decode_active(Reader& r, Matrix& values, const Mask& mask) {
  auto data = values.data();
  const auto bits = mask.bits();
  for (std::size_t k = 0; k < data.size(); ++k) data[k] = bits[k] != 0 ? r.f64() : 0.0;
}

std::string encode_layers(const Model& model) {
  Writer w;
  const auto layers = model.affine_layers();
  w.u64(layers.size());
  for (const AffineLayer* a : layers) {
    w.str(a->name);
    w.u64(a->weight.rows());
    w.u64(a->weight.cols());
    encode_mask(w, a->weight.mask);
    encode_active(w, a->weight.weights, a->weight.mask);
    for (double b : a->bias) w.f64(b);
  }
  return w.take();
}

void decode_layers(Reader& r, Model& model) {
  const auto layers = model.affine_layers();
  if (r.u64() != layers.size()) r.fail("layer count does not match the cell spec");
  for (AffineLayer* a : layers) {
    if (r.str() != a->name) r.fail("layer name mismatch at '" + a->name + "'");
    if (r.u64() != a->weight.rows() || r.u64() != a->weight.cols()) {
      r.fail("shape mismatch at '" + a->name + "'");
    }
    decode_mask(r, a->weight.mask);
    decode_active(r, a->weight.weights, a->weight.mask);
    for (double& b : a->bias) b = r.f64();
  }
  r.expect_end();
}

void encode_moments(Writer& w, const std::vector<LayerGrad>& buffers, const Model& model) {
  const auto layers = model.affine_layers();
  w.u64(buffers.size());
  for (std::size_t s = 0; s < buffers.size(); ++s) {
    encode_active(w, buffers[s].weight, layers[s]->weight.mask);
    for (double b : buffers[s].bias) w.f64(b);
  }
}

void decode_moments(Reader& r, std::vector<LayerGrad>& buffers, const Model& model) {
  const auto layers = model.affine_layers();
  const std::size_t n = r.u64();
  if (n != 0 && n != layers.size()) r.fail("moment buffer count does not match the model");
  buffers.clear();
  for (std::size_t s = 0; s < n; ++s) {
    const AffineLayer& a = *layers[s];
    LayerGrad g{Matrix(a.weight.rows(), a.weight.cols()), Vector(a.bias.size(), 0.0)};
    decode_active(r, g.weight, a.weight.mask);
    for (double& b : g.bias) b = r.f64();
    buffers.push_back(std::move(g));
  }
}

std::string encode_optimizer(const OptimizerState& opt, const Model& model) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(opt.config.kind));
  w.f64(opt.config.lr);
  w.f64(opt.config.beta1);
  w.f64(opt.config.beta2);
  w.f64(opt.config.epsilon);
  w.f64(opt.config.momentum);
  w.f64(opt.config.weight_decay);
  w.u64(opt.steps);
  encode_moments(w, opt.first, model);
  encode_moments(w, opt.second, model);
  return w.take();
}

OptimizerState decode_optimizer(Reader& r, const Model& model) {
  OptimizerState opt;
  const std::uint8_t kind = r.u8();
  if (kind > static_cast<std::uint8_t>(OptimizerKind::kNesterov)) r.fail("bad optimizer kind");
  opt.config.kind = static_cast<OptimizerKind>(kind);
  opt.config.lr = r.f64();
  opt.config.beta1 = r.f64();
  opt.config.beta2 = r.f64();
  opt.config.epsilon = r.f64();
  opt.config.momentum = r.f64();
  opt.config.weight_decay = r.f64();
  opt.steps = r.u64();
  decode_moments(r, opt.first, model);
  decode_moments(r, opt.second, model);
  r.expect_end();
  return opt;
}

void encode_sparsity(Writer& w, const LayerSparsity& l) {
  w.str(l.name);
  w.u64(l.active);
  w.u64(l.total);
}

LayerSparsity decode_sparsity(Reader& r) {
  LayerSparsity l;
  l.name = r.str();
  l.active = r.u64();
  l.total = r.u64();
  return l;
}

std::string encode_history(const History& h) {
  Writer w;
  w.u64(h.events.size());
  for (const Event& e : h.events) {
    w.str(e.phase);
    w.u64(e.epoch);
    w.f64(e.loss);
    w.f64(e.metric);
    w.f64(e.sparsity);
  }
  w.u64(h.snapshots.size());
  for (const auto& [name, report] : h.snapshots) {
    w.str(name);
    w.u64(report.layers.size());
    for (const auto& l : report.layers) encode_sparsity(w, l);
    encode_sparsity(w, report.total);
  }
  return w.take();
}

History decode_history(Reader& r) {
  History h;
  h.events.resize(r.count(40));
  for (Event& e : h.events) {
    e.phase = r.str();
    e.epoch = r.u64();
    e.loss = r.f64();
    e.metric = r.f64();
    e.sparsity = r.f64();
  }
  const std::size_t n = r.count(24);
  for (std::size_t k = 0; k < n; ++k) {
    std::string name = r.str();
    SparsityReport report;
    report.layers.resize(r.count(24));
    for (auto& l : report.layers) l = decode_sparsity(r);
    report.total = decode_sparsity(r);
    h.snapshots.emplace_back(std::move(name), std::move(report));
  }
  r.expect_end();
  return h;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const TrainingState& s = ckpt.state;
  Writer out;
  for (char c : kMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u8(kCheckpointVersion);
  put_section(out, "CONF", ckpt.config);
  put_section(out, "SPEC", encode_spec(s.model));
  put_section(out, "SCHD", encode_schedule(ckpt.schedule));
  {
    Writer w;
    w.str(phase_tag(s.phase, s.prune_iteration));
    w.u64(s.epoch);
    w.u64(s.prune_iteration);  // the "final" tag does not carry it
    put_section(out, "PHAS", w.take());
  }
  put_section(out, "LAYR", encode_layers(s.model));
  put_section(out, "OPTM", encode_optimizer(s.optimizer, s.model));
  put_section(out, "RNGS", rng_state(s.rng));
  put_section(out, "HIST", encode_history(s.history));
  return out.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw ParseError("header", "bad magic");
  }
  if (bytes.size() < kMagic.size() + 1) throw ParseError("header", "missing version");
  const auto version = static_cast<std::uint8_t>(bytes[kMagic.size()]);
  if (version != kCheckpointVersion) {
    throw ParseError("header", "unsupported version " + std::to_string(version));
  }
  std::size_t pos = kMagic.size() + 1;
  std::array<std::string_view, kSections.size()> payloads;
  for (std::size_t k = 0; k < kSections.size(); ++k) {
    const std::string section(kSections[k]);
    if (bytes.size() - pos < 12) throw ParseError(section, "truncated section header");
    if (bytes.substr(pos, 4) != kSections[k]) throw ParseError(section, "missing or out of order");
    Reader len(bytes.substr(pos + 4, 8), section);
    const std::uint64_t n = len.u64();
    pos += 12;
    if (n > bytes.size() - pos) throw ParseError(section, "truncated");
    payloads[k] = bytes.substr(pos, n);
    pos += n;
  }
  if (pos != bytes.size()) throw ParseError("trailer", "unexpected bytes after the last section");

  Checkpoint ckpt;
  ckpt.config = std::string(payloads[0]);
  {
    Reader r(payloads[1], "SPEC");
    ckpt.state.model = decode_spec(r);
  }
  {
    Reader r(payloads[2], "SCHD");
    ckpt.schedule = decode_schedule(r);
  }
  {
    Reader r(payloads[3], "PHAS");
    const std::string tag = r.str();
    try {
      const auto [phase, iteration] = phase_from_tag(tag);
      ckpt.state.phase = phase;
      ckpt.state.prune_iteration = iteration;
    } catch (const ContractError& e) {
      r.fail(e.what());
    }
    ckpt.state.epoch = r.u64();
    const std::uint64_t iteration = r.u64();
    if (ckpt.state.phase == Phase::kPostPrune && iteration != ckpt.state.prune_iteration) {
      r.fail("prune iteration disagrees with the phase tag");
    }
    if (iteration > std::numeric_limits<std::uint32_t>::max()) r.fail("prune iteration out of range");
    ckpt.state.prune_iteration = static_cast<std::uint32_t>(iteration);
    r.expect_end();
  }
  {
    Reader r(payloads[4], "LAYR");
    decode_layers(r, ckpt.state.model);
  }
  {
    Reader r(payloads[5], "OPTM");
    ckpt.state.optimizer = decode_optimizer(r, ckpt.state.model);
  }
  try {
    ckpt.state.rng = rng_from_state(std::string(payloads[6]));
  } catch (const std::exception& e) {
    throw ParseError("RNGS", e.what());
  }
  {
    Reader r(payloads[7], "HIST");
    ckpt.state.history = decode_history(r);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("header", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace hlgp
