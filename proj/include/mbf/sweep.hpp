#ifndef MBF_SWEEP_HPP
#define MBF_SWEEP_HPP

#include <optional>
#include <string>
#include <vector>

#include "mbf/chain.hpp"
#include "mbf/simulate.hpp"

namespace mbf {

/// A (p, q) grid of batch simulations at fixed n, start, threshold and
/// budget. DTMC cells with p + q > 1 are invalid (r would be negative) and
/// carry no statistics.
struct SweepGrid {
  std::vector<double> p_values;  // ascending
  std::vector<double> q_values;  // ascending
  Variant variant = Variant::Dtmc;
  int n = 0;
  int start = 0;
  ThresholdPolicy policy;
  SimBudget budget;  // per-cell `runs` and `limit`; seeds derived per cell
  std::optional<double> seed_rate;  // internal/coordinated; unset = q per cell

  void validate() const;
};

struct SweepCell {
  double p = 0.0;
  double q = 0.0;
  bool valid = false;
  int n_runs = 0;
  int n_purely_good = 0;
  int n_purely_bad = 0;
  int n_flipped = 0;
  std::optional<double> mean_first_flip;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // sorted by p, then q

  /// Schema: p,q,valid,n_runs,n_purely_good,n_purely_bad,n_flipped,mean_first_flip
  /// Invalid cells carry the `invalid` marker and empty statistics fields.
  std::string to_csv() const;
  static SweepResult from_csv(const std::string& text);
};

/// Builds the per-cell ChainSpec (DTMC cells get r = 1 - p - q) or marks the
/// cell invalid. Cell index orders seeds: cell k uses base_seed + k * runs.
std::optional<ChainSpec> sweep_cell_spec(const SweepGrid& grid, double p, double q);

/// Runs all valid cells (optionally on a worker pool). Runs stop at the
/// first flip: the flip statistics are unaffected and non-flipping runs
/// still consume the full budget. Output order is deterministic for every
/// jobs value.
SweepResult run_sweep(const SweepGrid& grid, int jobs = 1);

}  // namespace mbf

#endif  // MBF_SWEEP_HPP
