#ifndef MBF_CHAIN_HPP
#define MBF_CHAIN_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbf {

/// Tolerance used for the DTMC row-sum check (p + q + r = 1).
inline constexpr double kProbSumTol = 1e-12;

enum class Variant {
  Dtmc,
  CtmcExternal,
  CtmcInternal,
  CtmcCoordinated,
};

bool is_ctmc(Variant v);

/// Canonical wire names: "dtmc", "ctmc-external", "ctmc-internal",
/// "ctmc-coordinated".
std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Parameters of one birth-death chain over states 0..n, where state i is
/// the number of compromised processes.
///
/// Immutable after construction; validate() is called by the factories and
/// by every consumer entry point.
struct ChainSpec {
  int n = 2;
  Variant variant = Variant::Dtmc;
  double p = 0.0;        // per-step recovery probability (DTMC) or base recovery rate (CTMC)
  double q = 0.0;        // per-step infection probability (DTMC) or base infection rate (CTMC)
  double r = 0.0;        // DTMC stay probability; must be 0 for CTMC variants
  double seed_rate = 0.0;  // infection rate out of state 0 (internal/coordinated only)

  static ChainSpec dtmc(int n, double p, double q, double r);
  static ChainSpec ctmc_external(int n, double p, double q);
  /// seed_rate defaults to q when not given.
  static ChainSpec ctmc_internal(int n, double p, double q,
                                 std::optional<double> seed_rate = std::nullopt);
  static ChainSpec ctmc_coordinated(int n, double p, double q,
                                    std::optional<double> seed_rate = std::nullopt);

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;

  std::string to_json() const;
  static ChainSpec from_json(const std::string& text);
};

/// Outgoing transitions of a single state: probabilities for the DTMC,
/// rates for the CTMCs. stay is 0 for every CTMC variant.
struct StateTransitions {
  int state = 0;
  double down = 0.0;  // p_i
  double up = 0.0;    // q_i
  double stay = 0.0;  // r_i
};

/// Per-state transition structure for all four variants, including the edge
/// treatment at states 0 and n.
StateTransitions transitions(const ChainSpec& spec, int state);

/// Transition table for every state 0..n. Simulation kernels precompute this
/// once instead of re-deriving (and re-validating) per step.
std::vector<StateTransitions> transition_table(const ChainSpec& spec);

/// Resilience threshold: state i is good iff i <= f.
struct ThresholdPolicy {
  int f = 0;

  static ThresholdPolicy from_f(int f, int n);
  /// f = floor(c * (n - 1)) for a fraction c in (0,1).
  static ThresholdPolicy from_fraction(double c, int n);
};

}  // namespace mbf

#endif  // MBF_CHAIN_HPP
