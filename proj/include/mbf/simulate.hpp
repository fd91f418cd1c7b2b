#ifndef MBF_SIMULATE_HPP
#define MBF_SIMULATE_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mbf/chain.hpp"

namespace mbf {

enum class BudgetMode { Steps, Time };

/// Simulation budget: integer step count for the DTMC, continuous time units
/// for the CTMC variants.
struct SimBudget {
  BudgetMode mode = BudgetMode::Steps;
  double limit = 0.0;
  int runs = 1;
  std::uint64_t base_seed = 0;

  void validate() const;
};

/// One stochastic trajectory. Events record state *changes* only; the state
/// is constant between events. end_time is the total simulated time.
struct RunTrace {
  int start_state = 0;
  std::vector<std::pair<double, int>> events;  // (timestamp, new_state)
  double end_time = 0.0;
};

/// Throws std::logic_error naming the violated trace invariant.
void validate_trace(const RunTrace& trace, int n);

/// Per-state fraction of total simulated time (holding-time weighted for the
/// CTMC, step-count weighted for the DTMC). Length n+1, sums to 1.
using OccupancyHistogram = std::vector<double>;

struct RunStats {
  bool purely_good = false;
  bool purely_bad = false;
  bool flipped = false;
  std::optional<double> first_flip_time;
  OccupancyHistogram occupancy;
};

struct RunOptions {
  bool keep_trace = true;
  /// Stop the run at the first threshold flip (first-passage measurements).
  bool stop_at_flip = false;
};

std::pair<RunTrace, RunStats> run_dtmc(const ChainSpec& spec, int start,
                                       const SimBudget& budget,
                                       const ThresholdPolicy& policy,
                                       std::uint64_t seed,
                                       const RunOptions& opts = {});

std::pair<RunTrace, RunStats> run_ctmc(const ChainSpec& spec, int start,
                                       const SimBudget& budget,
                                       const ThresholdPolicy& policy,
                                       std::uint64_t seed,
                                       const RunOptions& opts = {});

/// Dispatches on spec.variant.
std::pair<RunTrace, RunStats> run_one(const ChainSpec& spec, int start,
                                      const SimBudget& budget,
                                      const ThresholdPolicy& policy,
                                      std::uint64_t seed,
                                      const RunOptions& opts = {});

/// Batch summary. Counts are exact; percentages and the flip-time moments are
/// derived. Occupancy is pooled over runs by simulated time.
struct AggregateStats {
  int runs = 0;
  int n_purely_good = 0;
  int n_purely_bad = 0;
  int n_flipped = 0;
  double flip_time_sum = 0.0;
  double flip_time_sumsq = 0.0;
  OccupancyHistogram occupancy;  // normalized
  double total_time = 0.0;

  double percent_purely_good() const { return 100.0 * n_purely_good / runs; }
  double percent_purely_bad() const { return 100.0 * n_purely_bad / runs; }
  double percent_flipped() const { return 100.0 * n_flipped / runs; }
  /// Mean over flipped runs only; absent when no run flipped.
  std::optional<double> mean_first_flip() const;
  /// Standard error of the flip-time mean; absent for fewer than 2 flips.
  std::optional<double> sem_first_flip() const;

  std::string to_json() const;
  static AggregateStats from_json(const std::string& text);
  std::string to_csv() const;
  static AggregateStats from_csv(const std::string& text);
};

/// Runs budget.runs independent runs with seeds base_seed + 0 .. runs-1,
/// optionally on `jobs` worker threads. Per-run results are merged in run
/// order, so the aggregate is identical for every jobs value.
AggregateStats run_batch(const ChainSpec& spec, int start,
                         const SimBudget& budget,
                         const ThresholdPolicy& policy,
                         const RunOptions& opts = {}, int jobs = 1);

double total_variation_distance(const std::vector<double>& a,
                                const std::vector<double>& b);

}  // namespace mbf

#endif  // MBF_SIMULATE_HPP
