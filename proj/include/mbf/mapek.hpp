#ifndef MBF_MAPEK_HPP
#define MBF_MAPEK_HPP

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "mbf/chain.hpp"
#include "mbf/rng.hpp"

namespace mbf {

/// System configuration conf_k: the process set with its security features.
struct Configuration {
  int id = 0;
  struct Member {
    int process_id = 0;
    std::string security_features;
  };
  std::vector<Member> members;

  void validate(int n) const;
  /// conf with processes 0..n-1, all carrying the same feature tag.
  static Configuration uniform(int n, const std::string& tag = "baseline", int id = 0);
};

/// Same member set, next configuration id. Security features are kept
/// constant across reconfigurations (no deployment diversity).
Configuration define_new_configuration(const Configuration& current);

struct Snapshot {
  Configuration config;
  int observed_faulty = 0;
  double timestamp = 0.0;
};

struct ParamEstimate {
  double p_hat = 0.0;
  double q_hat = 0.0;
  double r_hat = 0.0;
};

enum class EstimatorKind { GroundTruth, Empirical };

/// Safety-window estimate. An unset value means "never": the threshold is
/// unreachable, so no reconfiguration needs to be scheduled.
using SafeWindow = std::optional<double>;

struct AnalyzeMethod {
  enum class Kind { MeanHitting, QuantileHitting };
  Kind kind = Kind::QuantileHitting;
  double epsilon = 0.01;  // QuantileHitting only
  /// Iteration cap for the transient analysis; reaching it yields the capped
  /// time, an underestimate, which only triggers rejuvenation early.
  long long max_steps = 10'000'000;

  static AnalyzeMethod mean() { return {Kind::MeanHitting, 0.0, 0}; }
  static AnalyzeMethod quantile(double epsilon) { return {Kind::QuantileHitting, epsilon}; }
};

struct PlannerState {
  std::optional<double> timer;  // time until the reconfiguration trigger
  double delta_reconfig = 0.0;  // lead time needed to start a reconfiguration
  std::optional<double> last_delta_safe;
  bool last_was_never = false;
};

/// The managed system: one chain instance evolving in simulated time, plus
/// the event history the Empirical estimator consumes.
class ManagedSystem {
 public:
  ManagedSystem(const ChainSpec& spec, Configuration config, int start,
                std::uint64_t seed, int history_window = 1000);

  const ChainSpec& spec() const { return spec_; }
  const Configuration& config() const { return config_; }
  int state() const { return state_; }
  double now() const { return clock_; }

  /// One DTMC step (one time unit). Returns the new state.
  int step_dtmc();

  /// Next scheduled CTMC transition, or unset while the state is absorbing.
  std::optional<double> next_ctmc_event_time() const;
  /// Applies the pending CTMC transition; returns (time, new_state).
  std::pair<double, int> apply_ctmc_event();
  /// Moves the clock to t. Pending transitions stay scheduled; the caller
  /// processes them via apply_ctmc_event() while they fall before t.
  void advance_clock(double t);

  /// Global rejuvenation: all processes reboot into new_config, the faulty
  /// count drops to 0, and any pending transition is resampled.
  void reset_to_clean(const Configuration& new_config);

  /// Appends one observed step outcome (-1, 0, +1) to the DTMC history
  /// window. The internal stepper calls this; synthetic histories may too.
  void record_outcome(int delta);

  ParamEstimate ground_truth_estimate() const;
  /// Event-frequency estimate over the history window; unset when the
  /// window holds no data yet ("insufficient data").
  std::optional<ParamEstimate> empirical_estimate() const;

 private:
  void schedule_ctmc_event();

  ChainSpec spec_;
  std::vector<StateTransitions> table_;
  Configuration config_;
  int state_ = 0;
  double clock_ = 0.0;
  SplitMix64 rng_;

  std::optional<double> pending_event_time_;
  double segment_start_ = 0.0;

  // Sliding history window. DTMC entries carry unit exposure per step;
  // CTMC entries carry the integrated rate-shape exposures of the holding
  // segment that ended in the event.
  struct HistoryItem {
    int delta = 0;
    double exposure_down = 0.0;
    double exposure_up = 0.0;
  };
  int history_window_;
  std::deque<HistoryItem> history_;
  void push_history(HistoryItem item);
};

struct MonitorResult {
  Snapshot snapshot;
  /// Unset = insufficient data (Empirical estimator with an empty window).
  std::optional<ParamEstimate> estimate;
};

MonitorResult monitor_snapshot(const ManagedSystem& world, EstimatorKind estimator);

/// Safety-window estimation from the observed state to the first state
/// exceeding policy.f. MeanHitting evaluates the exact expected first-passage
/// time. QuantileHitting evaluates the largest t with P(passage <= t) <=
/// epsilon by transient analysis of the chain with state f+1 absorbing
/// (one-step iteration for the DTMC, the uniformized chain for the CTMCs).
/// An already-unsafe snapshot yields 0; an unreachable threshold yields the
/// "never" value.
SafeWindow analyze(const ChainSpec& model, int observed_faulty,
                   const ThresholdPolicy& policy, const AnalyzeMethod& method);

/// analyze() with the model parameters replaced by an estimate.
SafeWindow analyze(const ChainSpec& model_template, const Snapshot& snapshot,
                   const ParamEstimate& estimate, const ThresholdPolicy& policy,
                   const AnalyzeMethod& method);

/// timer = delta_safe - delta if delta < delta_safe, else 0; "never" clears
/// the timer entirely.
PlannerState plan(PlannerState planner, SafeWindow delta_safe);

/// Executes a reconfiguration on the managed system (state 0, next conf id).
void deploy(ManagedSystem& world, const Configuration& new_config);

enum class ReplanMode {
  EverySnapshot,    // re-plan on every monitor snapshot
  OncePerInterval,  // plan once after each deployment, then let the timer run
};

struct LoopScenario {
  ChainSpec spec;
  ThresholdPolicy policy;
  int start = 0;
  EstimatorKind estimator = EstimatorKind::GroundTruth;
  AnalyzeMethod method = AnalyzeMethod::quantile(0.01);
  double delta_reconfig = 0.0;
  double monitor_period = 1.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  ReplanMode replan = ReplanMode::EverySnapshot;
  int empirical_window = 1000;
  std::string security_tag = "baseline";

  void validate() const;
  std::string to_json() const;
  static LoopScenario from_json(const std::string& text);
};

/// One planning interval: from the start of the loop or a completed
/// deployment to the next deployment trigger (or the horizon).
struct IntervalRecord {
  double start = 0.0;
  std::optional<double> first_crossing;  // time since interval start
  std::optional<double> trigger_time;    // time since interval start
  bool immediate = false;                // trigger came from a zero timer
};

struct LoopReport {
  double horizon = 0.0;
  int n_reconfigurations = 0;
  double total_unsafe_time = 0.0;
  double unsafe_fraction = 0.0;
  int n_completed_intervals = 0;
  int n_crossed_before_trigger = 0;
  int n_immediate_triggers = 0;
  bool thrashing = false;
  std::vector<IntervalRecord> intervals;

  std::string to_json() const;
};

/// Runs the full monitor/analyze/plan/deploy loop over the horizon.
/// Deterministic given the scenario seed.
LoopReport closed_loop(const LoopScenario& scenario);

}  // namespace mbf

#endif  // MBF_MAPEK_HPP
