#ifndef MBF_ANALYTICS_HPP
#define MBF_ANALYTICS_HPP

#include <stdexcept>
#include <vector>

#include "mbf/chain.hpp"

namespace mbf {

/// Raised when a hitting-time target cannot be reached from every state
/// (the linear system would be singular).
struct UnreachableTargetError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Raised when a chain has no unique stationary distribution.
struct NonErgodicError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Expected first-passage times f_values[i] = E_i[time to reach target],
/// with f_values[target] = 0.
struct HittingTimeSolution {
  int target = 0;
  std::vector<double> f_values;
};

/// Solves the birth-death first-passage system by tridiagonal elimination.
///
/// For every i != target:  (p_i + q_i) f(i) - p_i f(i-1) - q_i f(i+1) = 1,
/// which covers both the DTMC (where p_i + q_i = 1 - r_i) and the CTMC
/// (where 1/(p_i+q_i) is the mean holding time). The boundary rows use
/// p_0 = 0 and q_n = 0, so f(0) = f(1) + 1/q_0: with a unit rate out of
/// state 0 this is the f(0) = f(1) + 1 convention.
///
/// The elimination pivots are known in closed form (q_i below the target,
/// p_i above it), so the sweep runs with nonnegative terms only and needs
/// no pivoting; see hitting_times_from_rates.
HittingTimeSolution expected_hitting_time_exact(const ChainSpec& spec, int target);

/// Same solve for explicit per-state rate vectors (states 0..size-1, target
/// absorbing). The caller guarantees reachability; boundary rates down[0]
/// and up[size-1] must be 0.
std::vector<double> hitting_times_from_rates(const std::vector<double>& down,
                                             const std::vector<double>& up,
                                             int target);

/// Passage times of a lazy DTMC (stay probability r) are the r = 0 times
/// scaled by 1/(1-r).
double dtmc_lazy_scaling(double f_r0, double r);

/// Probability that a p-down / q-up walk started at 1 reaches m before 0:
/// ((p/q) - 1) / ((p/q)^m - 1). For p == q the 1/m limit is returned only
/// when symmetric_limit is set; otherwise the degenerate input throws.
double gamblers_ruin_prob(double p, double q, int m, bool symmetric_limit = false);

/// Lower bound (1/2)(p/q)^(n/3) on the expected time to reach n/3 faulty
/// nodes when recovery dominates (q = 1 - p, p > 1/2): each escape attempt
/// past the threshold succeeds with at most geometric probability.
double escape_time_lower_bound(double p, double q, int n);

/// Lower bound n / ((1 - 2p)(1 - p/q)) for the infection-dominated side
/// (q = 1 - p, p < 1/2). Asymptotic in n; loose at small n.
double drift_time_lower_bound(double p, int n);

enum class RegimeClass { ExponentialTime, LogTime, Indeterminate };

std::string regime_name(RegimeClass r);

/// Internal-model growth classification for the expected time to reach n/3:
/// exponential in n when p > (2/3) q, logarithmic when p < (2/3) q.
/// Equality (up to a 1e-9 relative tolerance on 3p vs 2q) is Indeterminate.
RegimeClass internal_regime(double p, double q);

struct StationaryDistribution {
  std::vector<double> pi;  // length n+1, nonnegative, sums to 1
};

/// Stationary distribution from the detailed-balance recurrence
/// w[i+1] = w[i] * q_i / p_{i+1}, carried in log space and normalized.
StationaryDistribution stationary_distribution(const ChainSpec& spec);

/// Product form for the internal-model stationary weights anchored at
/// state 1: w(k) = (q/(np))^(k-1) * prod_{i=n-k}^{n-2} i, normalized over
/// k = 1..n (index 0 unused, set to 0). Kept as a cross-check only: it
/// drifts from the detailed-balance recurrence by the factor k(n-k)/(n-1)
/// at state k, an index shift in the product limits.
std::vector<double> internal_stationary_product_form(int n, double p, double q);

/// Expected time from state 1 to state floor(n/3) in the coordinated model
/// with a unit exit rate out of state 0, as the telescoped difference series
///   sum_{i=1}^{M-1} zeta^i  +  sum_{k=1}^{M-1} (1/(kq)) sum_{j=0}^{M-1-k} zeta^j,
/// zeta = p/q, M = floor(n/3). Term-by-term evaluation, exact at zeta = 1.
double coordinated_f1_closed_form(double p, double q, int n);

/// Literal double-sum reading sum_{k=1}^{M} sum_{j=0}^{M-k-1} zeta^j/(kq) - 1.
/// Differs from coordinated_f1_closed_form by 1 + sum_{i=1}^{M-1} zeta^i:
/// the -1 converts an f(0) series to f(1) while the geometric part carries
/// the f(0)-f(1) boundary difference through the recursion, so the literal
/// series drops it. Retained for comparison.
double coordinated_f1_series_literal(double p, double q, int n);

/// Index of the largest element (first one on ties).
int argmax_index(const std::vector<double>& v);

}  // namespace mbf

#endif  // MBF_ANALYTICS_HPP
