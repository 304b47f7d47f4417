#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "hlgp/errors.hpp"
#include "hlgp/sparsity.hpp"
#include "support.hpp"

using namespace hlgp;

namespace {

std::vector<std::uint8_t> bits_of(const Mask& m) { return {m.bits().begin(), m.bits().end()}; }

std::vector<double> values_of(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

// Survivors of neuron pruning: a hidden unit survives iff it lies on some
// input→output path of active edges.
std::vector<std::vector<bool>> reachable_units(const std::vector<Mask>& chain) {
  const std::size_t n_hidden = chain.size() - 1;
  std::vector<std::vector<bool>> fwd(n_hidden), bwd(n_hidden);
  for (std::size_t j = 0; j < n_hidden; ++j) {
    const Mask& in = chain[j];
    fwd[j].assign(in.rows(), false);
    for (std::size_t u = 0; u < in.rows(); ++u) {
      for (std::size_t c = 0; c < in.cols(); ++c) {
        const bool src_alive = j == 0 || fwd[j - 1][c];
        if (in(u, c) && src_alive) fwd[j][u] = true;
      }
    }
  }
  for (std::size_t j = n_hidden; j-- > 0;) {
    const Mask& out = chain[j + 1];
    bwd[j].assign(out.cols(), false);
    for (std::size_t u = 0; u < out.cols(); ++u) {
      for (std::size_t r = 0; r < out.rows(); ++r) {
        const bool dst_alive = j + 1 == n_hidden || bwd[j + 1][r];
        if (out(r, u) && dst_alive) bwd[j][u] = true;
      }
    }
  }
  std::vector<std::vector<bool>> alive(n_hidden);
  for (std::size_t j = 0; j < n_hidden; ++j) {
    alive[j].resize(fwd[j].size());
    for (std::size_t u = 0; u < fwd[j].size(); ++u) alive[j][u] = fwd[j][u] && bwd[j][u];
  }
  return alive;
}

}  // namespace

TEST_SUITE("sparsity") {
  TEST_CASE("percentile_threshold examples") {
    const std::vector<double> v{0.1, 0.3, 0.5, 0.7, 0.8, 0.9};
    CHECK(percentile_threshold(v, 0.8) == 0.8);
    CHECK(percentile_threshold(std::vector<double>{0.9, 0.1, 0.8, 0.3, 0.7, 0.5}, 0.8) == 0.8);
    CHECK(percentile_threshold(v, 1.0) == 0.9);
    for (double p : {0.01, 0.5, 1.0}) CHECK(percentile_threshold(std::vector<double>{4.2}, p) == 4.2);
    CHECK_THROWS_AS(percentile_threshold(std::vector<double>{}, 0.5), ContractError);
    CHECK_THROWS_AS(percentile_threshold(v, 0.0), ContractError);
  }

  TEST_CASE("nearest rank is exact at integer products") {
    CHECK(nearest_rank(10, 0.3) == 3);  // 0.3·10 is 3.0000000000000004 in binary
    CHECK(nearest_rank(6, 0.8) == 5);
    CHECK(nearest_rank(5, 0.01) == 1);
    CHECK(nearest_rank(7, 1.0) == 7);
  }

  TEST_CASE("percentile matches a sort oracle") {
    Rng rng(1);
    std::uniform_int_distribution<int> len(1, 50);
    std::uniform_real_distribution<double> p(0.001, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<double> v(static_cast<std::size_t>(len(rng)));
      for (double& x : v) x = std::abs(n(rng));
      const double pp = p(rng);
      std::vector<double> sorted = v;
      std::sort(sorted.begin(), sorted.end());
      const auto rank = static_cast<std::size_t>(std::ceil(pp * static_cast<double>(v.size()) - 1e-9));
      CHECK(percentile_threshold(v, pp) == sorted[std::clamp<std::size_t>(rank, 1, v.size()) - 1]);
    }
  }

  TEST_CASE("seed_mask at zero sparsity is dense") {
    Rng rng(2);
    const SeedMask s = seed_mask(5, 7, 0.0, rng);
    CHECK(s.mask.active_count() == 35);
    CHECK(s.achieved_sparsity == 0.0);
    CHECK(s.repaired == 0);
  }

  TEST_CASE("seed_mask 4x4 at 50%") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng(seed);
      const SeedMask s = seed_mask(4, 4, 0.5, rng);
      CHECK(s.requested_active == 8);
      CHECK(s.mask.active_count() == 8 + s.repaired);
      for (std::size_t r = 0; r < 4; ++r) {
        bool any = false;
        for (std::size_t c = 0; c < 4; ++c) any = any || s.mask(r, c);
        CHECK(any);
      }
      for (std::size_t c = 0; c < 4; ++c) {
        bool any = false;
        for (std::size_t r = 0; r < 4; ++r) any = any || s.mask(r, c);
        CHECK(any);
      }
    }
  }

  TEST_CASE("seed_mask repair-dominated case") {
    Rng rng(3);
    const SeedMask s = seed_mask(1, 8, 0.99, rng);
    CHECK(s.requested_active == 0);
    CHECK(s.mask.active_count() == 8);
    CHECK(s.achieved_sparsity == 0.0);
    CHECK_THROWS_AS(seed_mask(2, 2, 1.0, rng), ContractError);
  }

  TEST_CASE("seed_mask exact count on large matrices and uniform coverage") {
    Rng rng(4);
    std::vector<int> hits(64 * 32, 0);
    for (int trial = 0; trial < 50; ++trial) {
      const SeedMask s = seed_mask(64, 32, 0.5, rng);
      CHECK(s.requested_active == 1024);
      CHECK(s.repaired == 0);
      for (std::size_t k = 0; k < hits.size(); ++k) hits[k] += s.mask.bits()[k];
    }
    const auto [lo, hi] = std::minmax_element(hits.begin(), hits.end());
    CHECK(*lo >= 5);
    CHECK(*hi <= 45);
  }

  TEST_CASE("grow example") {
    MaskedMatrix m(Matrix::from_rows({{0, 0, 0.4}, {0, 0.2, -0.1}}), Mask::from_rows({{0, 0, 1}, {0, 1, 1}}));
    const Matrix g = Matrix::from_rows({{0.9, 0.1, 0.7}, {0.3, 0.5, 0.8}});
    const GrowResult r = grow(m, g, 0.8);
    CHECK(r.threshold == 0.8);
    REQUIRE(r.activated.size() == 1);
    CHECK(r.activated[0] == std::make_pair(std::size_t{0}, std::size_t{0}));
    CHECK(m.mask == Mask::from_rows({{1, 0, 1}, {0, 1, 1}}));
    CHECK(m.weights(0, 0) == 0.0);
    CHECK(m.weights(0, 2) == 0.4);
  }

  TEST_CASE("grow with alpha 1 or uniform gradients activates nothing") {
    Rng rng(5);
    MaskedMatrix m(Matrix(4, 4), Mask(4, 4, false));
    Matrix g(4, 4);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : g.data()) v = n(rng);
    CHECK(grow(m, g, 1.0).activated.empty());
    CHECK(grow(m, Matrix(4, 4, 0.25), 0.5).activated.empty());
    CHECK(m.active_count() == 0);
    CHECK_THROWS_AS(grow(m, Matrix(3, 4), 0.5), ShapeError);
  }

  TEST_CASE("grow and prune match sort oracles") {
    Rng rng(6);
    std::uniform_int_distribution<std::size_t> dim(1, 12);
    std::uniform_real_distribution<double> ratio(0.01, 0.99);
    std::uniform_int_distribution<int> coarse(0, 3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t rows = dim(rng), cols = dim(rng);
      Matrix w(rows, cols), g(rows, cols);
      Mask mask(rows, cols);
      const bool ties = trial % 3 == 0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        w.data()[k] = ties ? 0.25 * coarse(rng) : n(rng);
        g.data()[k] = ties ? 0.5 * coarse(rng) : n(rng);
        mask.bits()[k] = coarse(rng) < 2 ? 1 : 0;
      }
      MaskedMatrix m(w, mask);
      m.apply_mask();
      const double alpha = ratio(rng), beta = ratio(rng);

      MaskedMatrix grown = m;
      const GrowResult gr = grow(grown, g, alpha);
      std::vector<std::size_t> got;
      for (auto [r, c] : gr.activated) got.push_back(r * cols + c);
      CHECK(got == support::oracle_grow(values_of(g), bits_of(m.mask), alpha));

      MaskedMatrix pruned = m;
      const PruneResult pr = prune_step(pruned, beta);
      const auto want = support::oracle_prune(values_of(m.weights), bits_of(m.mask), beta);
      std::vector<std::size_t> removed;
      for (std::size_t k = 0; k < m.mask.size(); ++k) {
        if (m.mask.bits()[k] != 0 && pruned.mask.bits()[k] == 0) removed.push_back(k);
        if (pruned.mask.bits()[k] == 0) CHECK(pruned.weights.data()[k] == 0.0);
        CHECK(pruned.mask.bits()[k] <= m.mask.bits()[k]);
        CHECK(grown.mask.bits()[k] >= m.mask.bits()[k]);
      }
      CHECK(removed == want);
      CHECK(pr.removed == want.size());
      CHECK(pruned.active_count() == m.active_count() - want.size());
    }
  }

  TEST_CASE("prune_step examples") {
    MaskedMatrix m(Matrix::from_rows({{0.5, -0.1}, {0.3, 0.2}}));
    const PruneResult r = prune_step(m, 0.5);
    CHECK(r.removed == 2);
    CHECK(m.mask == Mask::from_rows({{1, 0}, {1, 0}}));
    CHECK(m.weights == Matrix::from_rows({{0.5, 0}, {0.3, 0}}));

    MaskedMatrix small(Matrix::from_rows({{1, 2, 3}}));
    CHECK(prune_step(small, 0.3).removed == 0);
    CHECK(small.active_count() == 3);

    MaskedMatrix none(Matrix(2, 2), Mask(2, 2, false));
    CHECK(prune_step(none, 0.5).no_active);
    CHECK_THROWS_AS(prune_step(small, 1.0), ContractError);
  }

  TEST_CASE("prune ties break by ascending index") {
    MaskedMatrix m(Matrix::from_rows({{1, 1, 1}, {1, 2, 1}}));
    prune_step(m, 0.5);
    CHECK(m.mask == Mask::from_rows({{0, 0, 0}, {1, 1, 1}}));
  }

  TEST_CASE("prune_neurons definition cases") {
    // in: 2 hidden × 3 inputs; out: 2 outputs × 2 hidden.
    MaskedMatrix in(Matrix(2, 3, 1.0), Mask::from_rows({{0, 0, 0}, {1, 1, 0}}));
    MaskedMatrix out(Matrix(2, 2, 1.0), Mask::from_rows({{1, 1}, {1, 0}}));
    in.apply_mask();
    std::vector<MaskedMatrix*> chain{&in, &out};
    CHECK(prune_neurons(chain) == 1);
    CHECK(out.mask == Mask::from_rows({{0, 1}, {0, 0}}));
    CHECK(out.weights(0, 0) == 0.0);

    MaskedMatrix a(Matrix(3, 3, 1.0)), b(Matrix(2, 3, 1.0));
    std::vector<MaskedMatrix*> dense{&a, &b};
    CHECK(prune_neurons(dense) == 0);
    CHECK(a.active_count() == 9);
  }

  TEST_CASE("prune_neurons cascades to a fixpoint") {
    // x(2) → h1(2) → h2(2) → y(1).
    MaskedMatrix w1(Matrix(2, 2, 1.0), Mask::from_rows({{1, 1}, {0, 0}}));   // h1[1] has no input
    MaskedMatrix w2(Matrix(2, 2, 1.0), Mask::from_rows({{1, 1}, {0, 1}}));   // h2[1] fed only by h1[1]
    MaskedMatrix w3(Matrix(1, 2, 1.0), Mask::from_rows({{1, 1}}));
    std::vector<MaskedMatrix*> chain{&w1, &w2, &w3};
    CHECK(prune_neurons(chain) == 2);
    CHECK(w2.mask == Mask::from_rows({{1, 0}, {0, 0}}));
    CHECK(w3.mask == Mask::from_rows({{1, 0}}));
  }

  TEST_CASE("prune_neurons equals the path-reachability oracle") {
    Rng rng(7);
    std::uniform_int_distribution<std::size_t> dim(1, 6);
    std::bernoulli_distribution keep(0.35);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t depth = 1 + trial % 3;
      std::vector<std::size_t> widths{dim(rng)};
      for (std::size_t j = 0; j <= depth; ++j) widths.push_back(dim(rng));
      std::vector<MaskedMatrix> mats;
      std::vector<Mask> masks;
      for (std::size_t j = 0; j + 1 < widths.size(); ++j) {
        Mask m(widths[j + 1], widths[j]);
        for (auto& b : m.bits()) b = keep(rng) ? 1 : 0;
        masks.push_back(m);
        mats.emplace_back(Matrix(widths[j + 1], widths[j], 1.0), m);
        mats.back().apply_mask();
      }
      const auto alive = reachable_units(masks);
      std::vector<MaskedMatrix*> chain;
      for (auto& m : mats) chain.push_back(&m);
      prune_neurons(chain);
      for (std::size_t j = 0; j < mats.size(); ++j) {
        for (std::size_t r = 0; r < mats[j].rows(); ++r) {
          for (std::size_t c = 0; c < mats[j].cols(); ++c) {
            const bool src_ok = j == 0 || alive[j - 1][c];
            const bool dst_ok = j + 1 == mats.size() || alive[j][r];
            CHECK(mats[j].mask(r, c) == (masks[j](r, c) && src_ok && dst_ok));
          }
        }
      }
    }
  }

  TEST_CASE("sparsity_report counts") {
    Rng rng(8);
    Model m = Model::build(support::spec(CellKind::kHlstm, 2, 3, {4}, 2), 1, rng);
    SparsityReport r = sparsity_report(m);
    REQUIRE(r.layers.size() == 2);
    CHECK(r.total.sparsity() == 0.0);
    // Layer 1: per gate 4×5 + 3×4 = 32; layer 2: 4×6 + 3×4 = 36.
    CHECK(r.layers[0].total == 4 * 32);
    CHECK(r.layers[1].total == 4 * 36);
    m.layers()[0].gates[2].hidden[0].weight.mask.set(1, 1, false);
    m.layers()[1].gates[3].output.weight.mask = Mask(3, 4, false);
    r = sparsity_report(m);
    CHECK(r.layers[0].active == 4 * 32 - 1);
    CHECK(r.layers[1].active == 4 * 36 - 12);
    CHECK(r.total.active == 4 * 32 + 4 * 36 - 13);
    CHECK(r.total.sparsity() == doctest::Approx(13.0 / (4 * 32 + 4 * 36)));
    CHECK(matrix_sparsity_report(m).layers.size() == 16);
    CHECK(total_sparsity(m) == r.total.sparsity());
  }

  TEST_CASE("seeded model reports 50% up to rounding") {
    Rng rng(9);
    Model m = Model::build(support::spec(CellKind::kHlstm, 2, 32, {32}), 1, rng);
    for (auto* a : m.masked_layers()) {
      a->weight.mask = seed_mask(a->weight.rows(), a->weight.cols(), 0.5, rng).mask;
    }
    const double s = total_sparsity(m);
    const double one_entry = 1.0 / static_cast<double>(sparsity_report(m).total.total);
    CHECK(std::abs(s - 0.5) <= 8 * one_entry);
  }

  TEST_CASE("sparsity tables render") {
    Rng rng(10);
    Model m = Model::build(support::spec(CellKind::kHlstm, 2, 4, {4}), 1, rng);
    PhaseSparsityTable t{{"Seed", "Post-Growth", "Post-Pruning"},
                         {sparsity_report(m), sparsity_report(m), sparsity_report(m)}};
    std::ostringstream text, rows;
    render_sparsity_table(text, t);
    render_sparsity_rows(rows, t);
    CHECK(text.str().find("Post-Growth") != std::string::npos);
    CHECK(text.str().find("0.00%") != std::string::npos);
    CHECK(text.str().find("H-LSTM layer1") != std::string::npos);
    CHECK(rows.str().find("H-LSTM layer1,0.000000,0.000000,0.000000") != std::string::npos);
  }
}
