#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hlgp/cells.hpp"
#include "hlgp/matrix.hpp"
#include "hlgp/rng.hpp"

namespace hlgp {

struct GpSchedule {
  double alpha = 0.9;          // growth percentile, (0,1]
  double beta = 0.2;           // fraction of active weights pruned per iteration, (0,1)
  double seed_sparsity = 0.5;  // [0,1)
  std::size_t growth_epochs = 3;
  std::size_t retrain_epochs_per_prune = 10;
  double accuracy_threshold = 0.05;  // interpreted in the task metric's direction

  void validate() const;
  bool operator==(const GpSchedule& other) const = default;
};

// 1-based nearest rank ⌈p·n⌉ clamped to [1, n]. Products within rounding
// noise of an integer are treated as that integer.
std::size_t nearest_rank(std::size_t n, double p);

// Nearest-rank percentile of `values`, p in (0,1].
double percentile_threshold(std::span<const double> values, double p);

struct SeedMask {
  Mask mask;
  std::size_t requested_active = 0;
  std::size_t repaired = 0;  // entries added to connect empty rows/columns
  double achieved_sparsity = 0.0;
};

// Uniformly random mask with ⌊(1-s)·N⌋ active entries, then the fewest extra
// activations that leave no row or column empty.
SeedMask seed_mask(std::size_t rows, std::size_t cols, double sparsity, Rng& rng);

struct GrowResult {
  double threshold = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> activated;
};

// Activates every dormant entry whose |avg_grad| is strictly above the
// (100·alpha)th percentile of all |avg_grad| entries. Grown weights start at 0.
GrowResult grow(MaskedMatrix& m, const Matrix& avg_grad, double alpha);

struct PruneResult {
  std::size_t active_before = 0;
  std::size_t removed = 0;
  bool no_active = false;  // nothing to prune; mask untouched
};

// Deactivates exactly ⌊beta·A⌋ of the A active entries with smallest |w|,
// ties broken by ascending (row, col). Pruned weights are zeroed.
PruneResult prune_step(MaskedMatrix& m, double beta);

// Hidden units of a gate chain [in→h1, h1→h2, ..., hk→out]. A unit whose
// incoming row or outgoing column is entirely dormant is removed (both
// cleared), repeated to a fixpoint. Returns the number of units removed.
std::size_t prune_neurons(std::span<MaskedMatrix* const> chain);
std::size_t prune_neurons(DnnGate& gate);
std::size_t prune_neurons(Model& model);

struct LayerSparsity {
  std::string name;
  std::size_t active = 0;
  std::size_t total = 0;

  double sparsity() const;
  bool operator==(const LayerSparsity& other) const = default;
};

struct SparsityReport {
  std::vector<LayerSparsity> layers;  // one row per stack layer
  LayerSparsity total;

  bool operator==(const SparsityReport& other) const = default;
};

// Weight-matrix sparsity (biases excluded) of the gate matrices, aggregated
// per stack layer.
SparsityReport sparsity_report(const Model& model);
// Same, one row per masked matrix.
SparsityReport matrix_sparsity_report(const Model& model);
double total_sparsity(const Model& model);

// Seed / post-growth / post-prune columns.
struct PhaseSparsityTable {
  std::vector<std::string> columns;
  std::vector<SparsityReport> reports;  // aligned with columns
};

void render_sparsity_table(std::ostream& os, const PhaseSparsityTable& table);
// One "layer,<col>,<col>,..." CSV row per layer plus header and total row.
void render_sparsity_rows(std::ostream& os, const PhaseSparsityTable& table);

}  // namespace hlgp
