#include <doctest.h>

#include <cmath>
#include <random>

#include "hlgp/activation.hpp"
#include "hlgp/errors.hpp"
#include "hlgp/matrix.hpp"
#include "hlgp/tape.hpp"
#include "support.hpp"

using namespace hlgp;

namespace {

AffineLayer layer_from(Matrix w, Mask m, Vector b, std::size_t slot = 0) {
  AffineLayer a;
  a.name = "probe";
  a.weight = MaskedMatrix(std::move(w), std::move(m));
  a.bias = std::move(b);
  a.slot = slot;
  return a;
}

AffineLayer random_layer(std::size_t rows, std::size_t cols, Rng& rng, std::size_t slot = 0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::bernoulli_distribution keep(0.6);
  Matrix w(rows, cols);
  Mask m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      w(r, c) = n(rng);
      m.set(r, c, keep(rng));
    }
  }
  Vector b(rows);
  for (double& v : b) v = n(rng);
  return layer_from(std::move(w), std::move(m), std::move(b), slot);
}

// tanh from its exponential definition in long double.
double tanh_oracle(double x) {
  const long double e2 = std::exp(2.0L * static_cast<long double>(x));
  return static_cast<double>((e2 - 1.0L) / (e2 + 1.0L));
}

}  // namespace

TEST_SUITE("numcore") {
  TEST_CASE("affine_forward identity") {
    const Vector y = affine_forward(MaskedMatrix(Matrix::identity(2)), Vector{0, 0}, Vector{3, -1});
    CHECK(y == Vector{3, -1});
  }

  TEST_CASE("affine_forward ignores masked entries") {
    MaskedMatrix w(Matrix::from_rows({{2, 4}, {1, 0}}), Mask::from_rows({{1, 0}, {1, 1}}));
    CHECK(affine_forward(w, Vector{0, 0}, Vector{1, 1}) == Vector{2, 1});
  }

  TEST_CASE("affine_forward matches triple-loop oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const AffineLayer a = random_layer(8, 8, rng);
      const Vector x = support::random_sequence(1, 8, rng)[0];
      const Vector got = affine_forward(a.weight, a.bias, x);
      const Vector want = support::matvec(a, x);
      for (std::size_t k = 0; k < 8; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-14));
    }
  }

  TEST_CASE("affine_forward shape errors") {
    MaskedMatrix w(Matrix(2, 3));
    CHECK_THROWS_AS(affine_forward(w, Vector(2), Vector(2)), ShapeError);
    CHECK_THROWS_AS(affine_forward(w, Vector(3), Vector(3)), ShapeError);
  }

  TEST_CASE("mask idempotence: dormant values never reach the output") {
    Rng rng(5);
    AffineLayer a = random_layer(6, 5, rng);
    a.weight.apply_mask();
    const Vector x = support::random_sequence(1, 5, rng)[0];
    const Vector clean = affine_forward(a.weight, a.bias, x);
    std::uniform_real_distribution<double> junk(-1e6, 1e6);
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        if (!a.weight.mask(r, c)) a.weight.weights(r, c) = junk(rng);
      }
    }
    CHECK(affine_forward(a.weight, a.bias, x) == clean);
  }

  TEST_CASE("activation values") {
    CHECK(activate(Activation::kSigmoid, 0.0) == 0.5);
    CHECK(activate(Activation::kLeakyRelu, -2.0) == doctest::Approx(-0.02).epsilon(1e-15));
    CHECK(activate(Activation::kLeakyRelu, 3.0) == 3.0);
    CHECK(activate(Activation::kRelu, -3.0) == 0.0);
    CHECK(activate(Activation::kRelu, 2.5) == 2.5);
    CHECK(std::abs(activate(Activation::kTanh, 0.5) - tanh_oracle(0.5)) < 1e-12);
    for (double z : {-30.0, -5.0, -0.3, 0.7, 8.0, 30.0}) {
      const double s = activate(Activation::kSigmoid, z);
      CHECK(s > 0.0);
      CHECK(s < 1.0);
      CHECK(std::abs(activate(Activation::kTanh, z)) <= 1.0);
    }
    CHECK(activate(Activation::kSigmoid, 40.0) <= 1.0);
    CHECK(activate(Activation::kSigmoid, -800.0) >= 0.0);
    CHECK(std::isfinite(activate(Activation::kSigmoid, 800.0)));
  }

  TEST_CASE("activation names round-trip") {
    for (Activation a : {Activation::kIdentity, Activation::kSigmoid, Activation::kTanh,
                         Activation::kRelu, Activation::kLeakyRelu}) {
      CHECK(activation_from_string(to_string(a)) == a);
    }
    CHECK_THROWS_AS(activation_from_string("swish"), ContractError);
  }

  TEST_CASE("sigmoid derivative at zero") {
    AffineLayer id = layer_from(Matrix::identity(1), Mask(1, 1), Vector{0.0});
    const std::vector<const AffineLayer*> layers{&id};
    Gradients grads(layers);
    Tape tape;
    const NodeId x = tape.input(Vector{0.0});
    const NodeId s = tape.activate(Activation::kSigmoid, x);
    const NodeId loss = tape.sum(std::vector<NodeId>{s});
    tape.backward(loss, grads);
    CHECK(tape.adjoint(x)[0] == doctest::Approx(0.25).epsilon(1e-15));
  }

  TEST_CASE("backward rejects a non-scalar loss") {
    AffineLayer id = layer_from(Matrix::identity(2), Mask(2, 2), Vector{0.0, 0.0});
    const std::vector<const AffineLayer*> layers{&id};
    Gradients grads(layers);
    Tape tape;
    const NodeId x = tape.input(Vector{1.0, 2.0});
    CHECK_THROWS_AS(tape.backward(x, grads), ContractError);
  }

  TEST_CASE("primitive gradients match central differences") {
    Rng rng(7);
    AffineLayer a = random_layer(4, 3, rng, 0);
    AffineLayer b = random_layer(4, 4, rng, 1);
    const std::vector<const AffineLayer*> layers{&a, &b};
    const Vector x0 = support::random_sequence(1, 3, rng)[0];
    const Vector target = support::random_sequence(1, 4, rng)[0];

    // L = Σ (relu-free chain of every primitive)².
    auto build = [&](Tape& tape, const Vector& x) {
      const NodeId in = tape.input(x);
      const NodeId h = tape.activate(Activation::kTanh, tape.affine(a, in));
      const NodeId g = tape.activate(Activation::kSigmoid, tape.affine(b, h));
      const NodeId m = tape.multiply(h, g);
      const NodeId s = tape.scale_shift(tape.add(m, h), 0.7, -0.1);
      const NodeId c = tape.concat(s, h);
      const NodeId l1 = tape.squared_error(s, target);
      const NodeId l2 = tape.softmax_cross_entropy(c, 2);
      return tape.sum(std::vector<NodeId>{l1, l2});
    };
    auto loss_at = [&](const Vector& x) {
      Tape tape;
      const NodeId l = build(tape, x);
      return tape.value(l)[0];
    };

    Tape tape;
    Gradients grads(layers);
    const NodeId l = build(tape, x0);
    tape.backward(l, grads);
    const Vector dx(tape.adjoint(0).begin(), tape.adjoint(0).end());

    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < x0.size(); ++k) {
      Vector xp = x0, xm = x0;
      xp[k] += eps;
      xm[k] -= eps;
      worst = std::max(worst, support::rel_error(dx[k], (loss_at(xp) - loss_at(xm)) / (2 * eps)));
    }
    for (AffineLayer* layer : {&a, &b}) {
      for (std::size_t r = 0; r < layer->weight.rows(); ++r) {
        for (std::size_t c = 0; c < layer->weight.cols(); ++c) {
          const bool dormant = !layer->weight.mask(r, c);
          layer->weight.mask.set(r, c, true);
          double& w = layer->weight.weights(r, c);
          const double saved = dormant ? 0.0 : w;
          w = saved + eps;
          const double lp = loss_at(x0);
          w = saved - eps;
          const double lm = loss_at(x0);
          w = saved;
          if (dormant) {
            layer->weight.mask.set(r, c, false);
            w = 0.0;
          }
          worst = std::max(worst, support::rel_error(grads[layer->slot].weight(r, c),
                                                     (lp - lm) / (2 * eps)));
        }
      }
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("dormant gradient equals upstream delta times input") {
    AffineLayer a = layer_from(Matrix::from_rows({{0.5, 0.0}, {-0.25, 0.75}}),
                               Mask::from_rows({{1, 0}, {1, 1}}), Vector{0.0, 0.0});
    const std::vector<const AffineLayer*> layers{&a};
    Gradients grads(layers);
    Tape tape;
    const Vector x{2.0, -3.0};
    const Vector target{1.0, 0.0};
    const NodeId y = tape.affine(a, tape.input(x));
    tape.backward(tape.squared_error(y, target), grads);
    // y0 = 0.5·2 = 1, so ∂L/∂y0 = 2(y0 − 1) = 0; y1 = −0.5 − 2.25 = −2.75.
    CHECK(grads[0].weight(0, 1) == 0.0);
    const double dy1 = 2.0 * (-2.75);
    CHECK(grads[0].weight(1, 0) == doctest::Approx(dy1 * 2.0));
    CHECK(grads[0].weight(1, 1) == doctest::Approx(dy1 * -3.0));

    // Shift the target so the dormant entry has a nonzero gradient.
    Gradients g2(layers);
    Tape t2;
    const NodeId y2 = t2.affine(a, t2.input(x));
    t2.backward(t2.squared_error(y2, Vector{0.0, 0.0}), g2);
    CHECK(g2[0].weight(0, 1) == doctest::Approx(2.0 * 1.0 * -3.0));
  }

  TEST_CASE("dropout: identity at p=0, inverted scaling otherwise") {
    Rng rng(3);
    Tape tape;
    const NodeId x = tape.input(Vector(1000, 1.0));
    CHECK(tape.dropout(x, 0.0, rng) == x);
    const NodeId d = tape.dropout(x, 0.5, rng);
    std::size_t kept = 0;
    for (double v : tape.value(d)) {
      CHECK((v == 0.0 || v == 2.0));
      kept += v == 2.0 ? 1 : 0;
    }
    CHECK(kept > 400);
    CHECK(kept < 600);
  }

  TEST_CASE("determinism: identical inputs give bit-identical values and gradients") {
    auto run = [] {
      Rng rng(99);
      Model m = Model::build(support::spec(CellKind::kHlstm, 3, 4, {5}), 2, rng);
      const hlgp::Sample s = support::regression_sample(support::random_sequence(4, 3, rng), 2, rng);
      Tape tape;
      Gradients g = m.zero_gradients();
      const NodeId l = record_sample_loss(tape, m, s, MetricKind::kMse, Mode::kEval, nullptr);
      tape.backward(l, g);
      return std::make_pair(tape.value(l)[0], g);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }

  TEST_CASE("gradients container arithmetic") {
    Rng rng(2);
    AffineLayer a = random_layer(2, 2, rng, 0);
    const std::vector<const AffineLayer*> layers{&a};
    Gradients g(layers);
    g[0].weight(0, 0) = 3.0;
    g[0].bias[1] = 4.0;
    CHECK(g.squared_norm() == 25.0);
    Gradients h = g;
    h.add(g);
    h.scale(0.5);
    CHECK(h == g);
    h.zero();
    CHECK(h.squared_norm() == 0.0);
    h[0].bias[0] = std::nan("");
    CHECK_FALSE(h.all_finite());
  }

  TEST_CASE("rng state round-trips") {
    Rng rng(123);
    rng.discard(17);
    Rng copy = rng_from_state(rng_state(rng));
    CHECK((copy == rng));
    CHECK(copy() == rng());
  }
}
