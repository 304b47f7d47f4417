#include "hlgp/activation.hpp"

#include <cmath>
#include <string>

#include "hlgp/errors.hpp"

namespace hlgp {

double activate(Activation kind, double z) {
  switch (kind) {
    case Activation::kIdentity:
      return z;
    case Activation::kSigmoid:
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      {
        const double e = std::exp(z);
        return e / (1.0 + e);
      }
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kLeakyRelu:
      return z >= 0.0 ? z : kLeakySlope * z;
  }
  return z;
}

double activation_derivative_from_output(Activation kind, double y) {
  switch (kind) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kSigmoid:
      return y * (1.0 - y);
    case Activation::kTanh:
      return 1.0 - y * y;
    case Activation::kRelu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::kLeakyRelu:
      return y >= 0.0 ? 1.0 : kLeakySlope;
  }
  return 1.0;
}

Vector activation(Activation kind, std::span<const double> x) {
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate(kind, x[i]);
  return y;
}

std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::kIdentity: return "identity";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky_relu";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  throw ContractError("unknown activation '" + std::string(name) + "'");
}

}  // namespace hlgp
