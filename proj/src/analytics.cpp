#include "mbf/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mbf {

namespace {

struct Rates {
  std::vector<double> down, up;
};

Rates gather_rates(const ChainSpec& spec) {
  Rates r;
  r.down.resize(spec.n + 1);
  r.up.resize(spec.n + 1);
  for (int i = 0; i <= spec.n; ++i) {
    const StateTransitions t = transitions(spec, i);
    r.down[i] = t.down;
    r.up[i] = t.up;
  }
  return r;
}

}  // namespace

HittingTimeSolution expected_hitting_time_exact(const ChainSpec& spec, int target) {
  spec.validate();
  if (target < 0 || target > spec.n)
    throw std::invalid_argument("hitting time: target outside [0, n]");

  const int n = spec.n;
  const Rates rates = gather_rates(spec);
  for (int i = 0; i < target; ++i)
    if (rates.up[i] <= 0.0)
      throw UnreachableTargetError(
          "hitting time: target unreachable, q_" + std::to_string(i) + " = 0");
  for (int i = target + 1; i <= n; ++i)
    if (rates.down[i] <= 0.0)
      throw UnreachableTargetError(
          "hitting time: target unreachable, p_" + std::to_string(i) + " = 0");

  HittingTimeSolution sol;
  sol.target = target;
  sol.f_values = hitting_times_from_rates(rates.down, rates.up, target);
  return sol;
}

std::vector<double> hitting_times_from_rates(const std::vector<double>& down,
                                             const std::vector<double>& up,
                                             int target) {
  const int last = int(down.size()) - 1;
  if (down.size() != up.size() || last < 1)
    throw std::invalid_argument("hitting solve: bad rate vectors");
  if (target < 0 || target > last)
    throw std::invalid_argument("hitting solve: target outside state range");

  // Thomas elimination with the pivots substituted analytically: below the
  // target the pivot at row i is exactly q_i, above it exactly p_i, so the
  // sweep reduces to the one-level climb/descent times
  //   h_i = E_i[tau_{i+1}] = (1 + p_i h_{i-1}) / q_i,   h_0 = 1/q_0,
  //   g_i = E_i[tau_{i-1}] = (1 + q_i g_{i+1}) / p_i,   g_last = 1/p_last,
  // summed level by level. Every term is nonnegative, so no cancellation:
  // the generic elimination loses the pivots to roundoff once p_i/q_i
  // compounds across many states.
  std::vector<double> f(last + 1, 0.0);
  if (target > 0) {
    std::vector<double> h(target);
    h[0] = 1.0 / up[0];
    for (int i = 1; i < target; ++i) h[i] = (1.0 + down[i] * h[i - 1]) / up[i];
    double acc = 0.0;
    for (int i = target - 1; i >= 0; --i) {
      acc += h[i];
      f[i] = acc;
    }
  }
  if (target < last) {
    std::vector<double> g(last + 1);
    g[last] = 1.0 / down[last];
    for (int i = last - 1; i > target; --i) g[i] = (1.0 + up[i] * g[i + 1]) / down[i];
    double acc = 0.0;
    for (int i = target + 1; i <= last; ++i) {
      acc += g[i];
      f[i] = acc;
    }
  }
  return f;
}

double dtmc_lazy_scaling(double f_r0, double r) {
  if (!(r >= 0.0 && r < 1.0))
    throw std::invalid_argument("lazy scaling requires 0 <= r < 1");
  return f_r0 / (1.0 - r);
}

double gamblers_ruin_prob(double p, double q, int m, bool symmetric_limit) {
  if (!(p > 0.0 && q > 0.0)) throw std::invalid_argument("ruin: p, q must be > 0");
  if (m < 1) throw std::invalid_argument("ruin: m must be >= 1");
  if (p == q) {
    if (symmetric_limit) return 1.0 / m;
    throw std::domain_error("ruin: formula degenerates at p = q (pass symmetric_limit)");
  }
  // ((p/q) - 1) / ((p/q)^m - 1), kept stable near p = q via expm1/log1p.
  const double num = (p - q) / q;
  const double den = std::expm1(double(m) * std::log1p((p - q) / q));
  return num / den;
}

double escape_time_lower_bound(double p, double q, int n) {
  if (std::abs(p + q - 1.0) > kProbSumTol)
    throw std::invalid_argument("escape bound requires q = 1 - p");
  if (!(p > 0.5)) throw std::invalid_argument("escape bound requires p > 1/2");
  return 0.5 * std::pow(p / q, double(n) / 3.0);
}

double drift_time_lower_bound(double p, int n) {
  if (!(p >= 0.0 && p < 0.5))
    throw std::invalid_argument("drift bound requires 0 <= p < 1/2");
  const double q = 1.0 - p;
  return double(n) / ((1.0 - 2.0 * p) * (1.0 - p / q));
}

std::string regime_name(RegimeClass r) {
  switch (r) {
    case RegimeClass::ExponentialTime: return "exponential-time";
    case RegimeClass::LogTime: return "log-time";
    case RegimeClass::Indeterminate: return "indeterminate";
  }
  throw std::invalid_argument("unknown regime");
}

RegimeClass internal_regime(double p, double q) {
  if (!(q > 0.0)) throw std::invalid_argument("regime: q must be > 0");
  if (p < 0.0) throw std::invalid_argument("regime: p must be >= 0");
  const double lhs = 3.0 * p;
  const double rhs = 2.0 * q;
  if (std::abs(lhs - rhs) <= 1e-9 * std::max(lhs, rhs))
    return RegimeClass::Indeterminate;
  return lhs > rhs ? RegimeClass::ExponentialTime : RegimeClass::LogTime;
}

StationaryDistribution stationary_distribution(const ChainSpec& spec) {
  spec.validate();
  const int n = spec.n;
  const Rates rates = gather_rates(spec);
  for (int i = 1; i <= n; ++i)
    if (rates.down[i] <= 0.0)
      throw NonErgodicError("stationary: p_" + std::to_string(i) + " = 0");
  for (int i = 0; i < n; ++i)
    if (rates.up[i] <= 0.0)
      throw NonErgodicError("stationary: q_" + std::to_string(i) + " = 0");

  std::vector<double> logw(n + 1, 0.0);
  for (int i = 0; i < n; ++i)
    logw[i + 1] = logw[i] + std::log(rates.up[i]) - std::log(rates.down[i + 1]);

  const double m = *std::max_element(logw.begin(), logw.end());
  StationaryDistribution dist;
  dist.pi.resize(n + 1);
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    dist.pi[i] = std::exp(logw[i] - m);
    sum += dist.pi[i];
  }
  for (double& v : dist.pi) v /= sum;
  return dist;
}

std::vector<double> internal_stationary_product_form(int n, double p, double q) {
  if (n < 2) throw std::invalid_argument("product form: n must be >= 2");
  if (!(p > 0.0 && q > 0.0))
    throw std::invalid_argument("product form: p, q must be > 0");
  std::vector<double> logw(n + 1, -std::numeric_limits<double>::infinity());
  const double step = std::log(q / (double(n) * p));
  for (int k = 1; k <= n; ++k) {
    double lw = double(k - 1) * step;
    bool zero = false;
    for (int i = n - k; i <= n - 2; ++i) {
      if (i <= 0) { zero = true; break; }
      lw += std::log(double(i));
    }
    if (!zero) logw[k] = lw;
  }
  const double m = *std::max_element(logw.begin() + 1, logw.end());
  std::vector<double> w(n + 1, 0.0);
  double sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    if (std::isfinite(logw[k])) w[k] = std::exp(logw[k] - m);
    sum += w[k];
  }
  for (double& v : w) v /= sum;
  return w;
}

double coordinated_f1_closed_form(double p, double q, int n) {
  if (!(q > 0.0)) throw std::invalid_argument("coordinated f(1): q must be > 0");
  if (p < 0.0) throw std::invalid_argument("coordinated f(1): p must be >= 0");
  if (n < 3) throw std::invalid_argument("coordinated f(1): n must be >= 3");
  const int m = n / 3;
  const double zeta = p / q;
  double geo = 0.0;
  double zp = 1.0;
  for (int i = 1; i <= m - 1; ++i) {
    zp *= zeta;
    geo += zp;
  }
  double sum = 0.0;
  for (int k = 1; k <= m - 1; ++k) {
    double inner = 0.0;
    double zj = 1.0;
    for (int j = 0; j <= m - 1 - k; ++j) {
      inner += zj;
      zj *= zeta;
    }
    sum += inner / (double(k) * q);
  }
  return geo + sum;
}

double coordinated_f1_series_literal(double p, double q, int n) {
  if (!(q > 0.0)) throw std::invalid_argument("coordinated f(1): q must be > 0");
  if (p < 0.0) throw std::invalid_argument("coordinated f(1): p must be >= 0");
  if (n < 3) throw std::invalid_argument("coordinated f(1): n must be >= 3");
  const int m = n / 3;
  const double zeta = p / q;
  double sum = 0.0;
  for (int k = 1; k <= m; ++k) {
    double zj = 1.0;
    for (int j = 0; j <= m - k - 1; ++j) {
      sum += zj / (double(k) * q);
      zj *= zeta;
    }
  }
  return sum - 1.0;
}

int argmax_index(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("argmax of empty vector");
  return int(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace mbf
