#pragma once

#include <span>
#include <string_view>

#include "hlgp/matrix.hpp"

namespace hlgp {

enum class Activation { kIdentity, kSigmoid, kTanh, kRelu, kLeakyRelu };

inline constexpr double kLeakySlope = 0.01;

double activate(Activation kind, double z);

// Derivative expressed through the activation's output y. Valid for every
// kind because each is monotone with sign(y) == sign(z) where it matters.
double activation_derivative_from_output(Activation kind, double y);

Vector activation(Activation kind, std::span<const double> x);

std::string_view to_string(Activation kind);
Activation activation_from_string(std::string_view name);

}  // namespace hlgp
