#include "hlgp/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <string>

#include <json.hpp>

#include "hlgp/errors.hpp"

namespace hlgp {
namespace {

Vector one_hot(std::size_t width, std::size_t index) {
  Vector v(width, 0.0);
  v[index] = 1.0;
  return v;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double log_softmax_at(std::span<const double> z, std::size_t label) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double denom = 0.0;
  for (double v : z) denom += std::exp(v - zmax);
  return z[label] - zmax - std::log(denom);
}

Sample copy_sample(std::span<const std::size_t> payload, std::size_t blank_len, std::size_t vocab) {
  const std::size_t width = vocab + 2;
  const std::size_t blank = vocab;
  const std::size_t cue = vocab + 1;
  Sample s;
  for (std::size_t tok : payload) s.inputs.push_back(one_hot(width, tok));
  for (std::size_t k = 0; k < blank_len; ++k) s.inputs.push_back(one_hot(width, blank));
  s.inputs.push_back(one_hot(width, cue));
  for (std::size_t k = 0; k < payload.size(); ++k) {
    Target t;
    t.step = s.inputs.size();
    t.label = payload[k];
    s.targets.push_back(std::move(t));
    s.inputs.push_back(one_hot(width, blank));
  }
  return s;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kAdding: return "adding";
    case TaskKind::kCopy: return "copy";
    case TaskKind::kCharLm: return "char_lm";
  }
  return "adding";
}

TaskKind task_kind_from_string(std::string_view name) {
  if (name == "adding") return TaskKind::kAdding;
  if (name == "copy") return TaskKind::kCopy;
  if (name == "char_lm") return TaskKind::kCharLm;
  throw ContractError("unknown task '" + std::string(name) + "'");
}

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kMse: return "mse";
    case MetricKind::kTokenAccuracy: return "token_accuracy";
    case MetricKind::kBitsPerChar: return "bits_per_char";
  }
  return "mse";
}

MetricKind metric_kind_from_string(std::string_view name) {
  if (name == "mse") return MetricKind::kMse;
  if (name == "token_accuracy") return MetricKind::kTokenAccuracy;
  if (name == "bits_per_char") return MetricKind::kBitsPerChar;
  throw ContractError("unknown metric '" + std::string(name) + "'");
}

bool lower_is_better(MetricKind metric) { return metric != MetricKind::kTokenAccuracy; }

bool meets_threshold(MetricKind metric, double value, double threshold) {
  if (std::isnan(value)) return false;
  return lower_is_better(metric) ? value <= threshold : value >= threshold;
}

Dataset gen_adding(std::size_t n_samples, std::size_t length, Rng& rng) {
  if (length < 2) throw ContractError("adding task needs length >= 2");
  Dataset d;
  d.kind = TaskKind::kAdding;
  d.metric = MetricKind::kMse;
  d.input_width = 2;
  d.output_width = 1;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pos(0, length - 1);
  for (std::size_t n = 0; n < n_samples; ++n) {
    Sample s;
    for (std::size_t t = 0; t < length; ++t) s.inputs.push_back({unit(rng), 0.0});
    const std::size_t a = pos(rng);
    std::size_t b = pos(rng);
    while (b == a) b = pos(rng);
    s.inputs[a][1] = 1.0;
    s.inputs[b][1] = 1.0;
    Target t;
    t.step = length - 1;
    t.value = {s.inputs[a][0] + s.inputs[b][0]};
    s.targets.push_back(std::move(t));
    d.samples.push_back(std::move(s));
  }
  return d;
}

Dataset gen_copy(std::size_t n_samples, std::size_t payload_len, std::size_t blank_len,
                 std::size_t vocab, Rng& rng) {
  if (vocab < 2) throw ContractError("copy task needs vocab >= 2");
  if (payload_len < 1) throw ContractError("copy task needs a nonempty payload");
  Dataset d;
  d.kind = TaskKind::kCopy;
  d.metric = MetricKind::kTokenAccuracy;
  d.input_width = vocab + 2;
  d.output_width = vocab;
  std::uniform_int_distribution<std::size_t> tok(0, vocab - 1);
  std::vector<std::size_t> payload(payload_len);
  for (std::size_t n = 0; n < n_samples; ++n) {
    for (auto& p : payload) p = tok(rng);
    d.samples.push_back(copy_sample(payload, blank_len, vocab));
  }
  return d;
}

std::vector<char> corpus_alphabet() {
  const std::string_view text = embedded_corpus();
  std::set<char> chars(text.begin(), text.end());
  return {chars.begin(), chars.end()};
}

Dataset gen_char_lm(std::size_t n_samples, std::size_t length, bool eval_split, Rng& rng) {
  if (length < 1) throw ContractError("char_lm window length must be >= 1");
  const std::string_view text = embedded_corpus();
  const std::vector<char> alphabet = corpus_alphabet();
  const std::size_t split = text.size() * 9 / 10;
  const std::size_t begin = eval_split ? split : 0;
  const std::size_t end = eval_split ? text.size() : split;
  if (end - begin < length + 1) throw ContractError("char_lm window longer than the corpus split");
  std::vector<std::size_t> code(256, 0);
  for (std::size_t k = 0; k < alphabet.size(); ++k) {
    code[static_cast<unsigned char>(alphabet[k])] = k;
  }
  Dataset d;
  d.kind = TaskKind::kCharLm;
  d.metric = MetricKind::kBitsPerChar;
  d.input_width = alphabet.size();
  d.output_width = alphabet.size();
  std::uniform_int_distribution<std::size_t> start(begin, end - length - 1);
  for (std::size_t n = 0; n < n_samples; ++n) {
    const std::size_t s0 = start(rng);
    Sample s;
    for (std::size_t t = 0; t < length; ++t) {
      s.inputs.push_back(one_hot(alphabet.size(), code[static_cast<unsigned char>(text[s0 + t])]));
      Target tg;
      tg.step = t;
      tg.label = code[static_cast<unsigned char>(text[s0 + t + 1])];
      s.targets.push_back(std::move(tg));
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

TaskData make_task(const TaskConfig& config) {
  Rng rng(config.seed);
  TaskData data;
  switch (config.kind) {
    case TaskKind::kAdding:
      data.train = gen_adding(config.train_size, config.length, rng);
      data.eval = gen_adding(config.eval_size, config.length, rng);
      break;
    case TaskKind::kCopy: {
      data.train = gen_copy(config.train_size, config.payload_len, config.blank_len, config.vocab, rng);
      std::set<std::vector<std::size_t>> seen;
      for (const auto& s : data.train.samples) {
        std::vector<std::size_t> key;
        for (const auto& t : s.targets) key.push_back(t.label);
        seen.insert(std::move(key));
      }
      data.eval = gen_copy(0, config.payload_len, config.blank_len, config.vocab, rng);
      const double space = std::pow(static_cast<double>(config.vocab),
                                    static_cast<double>(config.payload_len));
      if (static_cast<double>(seen.size()) + static_cast<double>(config.eval_size) > space) {
        throw ContractError("copy payload space too small for disjoint train/eval splits");
      }
      while (data.eval.samples.size() < config.eval_size) {
        Dataset one = gen_copy(1, config.payload_len, config.blank_len, config.vocab, rng);
        std::vector<std::size_t> key;
        for (const auto& t : one.samples[0].targets) key.push_back(t.label);
        if (!seen.insert(std::move(key)).second) continue;
        data.eval.samples.push_back(std::move(one.samples[0]));
      }
      break;
    }
    case TaskKind::kCharLm:
      data.train = gen_char_lm(config.train_size, config.length, false, rng);
      data.eval = gen_char_lm(config.eval_size, config.length, true, rng);
      break;
  }
  return data;
}

double evaluate(const Predictor& predictor, const Dataset& dataset) {
  double total = 0.0;
  std::size_t count = 0;
  for (const Sample& s : dataset.samples) {
    const std::vector<Vector> out = predictor(s.inputs);
    if (out.size() != s.inputs.size()) throw ShapeError("predictor output count != step count");
    for (const Target& t : s.targets) {
      const Vector& y = out.at(t.step);
      if (y.size() != dataset.output_width) throw ShapeError("predictor output width mismatch");
      switch (dataset.metric) {
        case MetricKind::kMse: {
          double se = 0.0;
          for (std::size_t k = 0; k < y.size(); ++k) se += (y[k] - t.value[k]) * (y[k] - t.value[k]);
          total += se / static_cast<double>(y.size());
          break;
        }
        case MetricKind::kTokenAccuracy:
          total += argmax(y) == t.label ? 1.0 : 0.0;
          break;
        case MetricKind::kBitsPerChar:
          total += -log_softmax_at(y, t.label) / std::numbers::ln2;
          break;
      }
      ++count;
    }
  }
  if (count == 0) throw ContractError("dataset has no supervised steps");
  return total / static_cast<double>(count);
}

double evaluate(const Model& model, const Dataset& dataset) {
  if (model.spec().input_width != dataset.input_width) {
    throw ShapeError("model input width " + std::to_string(model.spec().input_width) +
                     " != task input width " + std::to_string(dataset.input_width));
  }
  if (model.output_width() != dataset.output_width) {
    throw ShapeError("model output width " + std::to_string(model.output_width()) +
                     " != task output width " + std::to_string(dataset.output_width));
  }
  return evaluate([&model](std::span<const Vector> in) { return predict(model, in); }, dataset);
}

void export_dataset(std::ostream& os, const Dataset& dataset) {
  nlohmann::json header = {{"kind", to_string(dataset.kind)},
                           {"metric", to_string(dataset.metric)},
                           {"input_width", dataset.input_width},
                           {"output_width", dataset.output_width},
                           {"samples", dataset.samples.size()}};
  os << header.dump() << '\n';
  for (const Sample& s : dataset.samples) {
    nlohmann::json targets = nlohmann::json::array();
    for (const Target& t : s.targets) {
      targets.push_back({{"step", t.step}, {"value", t.value}, {"label", t.label}});
    }
    os << nlohmann::json{{"inputs", s.inputs}, {"targets", targets}}.dump() << '\n';
  }
}

Dataset import_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("header", "empty dataset stream");
  Dataset d;
  std::size_t expected = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    d.kind = task_kind_from_string(header.at("kind").get<std::string>());
    d.metric = metric_kind_from_string(header.at("metric").get<std::string>());
    d.input_width = header.at("input_width").get<std::size_t>();
    d.output_width = header.at("output_width").get<std::size_t>();
    expected = header.at("samples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("header", e.what());
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Sample s;
      s.inputs = j.at("inputs").get<std::vector<Vector>>();
      for (const auto& t : j.at("targets")) {
        s.targets.push_back(Target{t.at("step").get<std::size_t>(), t.at("value").get<Vector>(),
                                   t.at("label").get<std::size_t>()});
      }
      d.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("sample " + std::to_string(d.samples.size()), e.what());
    }
  }
  if (d.samples.size() != expected) {
    throw ParseError("samples", "expected " + std::to_string(expected) + " records, found " +
                                    std::to_string(d.samples.size()));
  }
  return d;
}

}  // namespace hlgp
