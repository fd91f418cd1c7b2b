// Test-side oracles, kept independent of the library's solver paths.
#ifndef MBF_TEST_HELPERS_HPP
#define MBF_TEST_HELPERS_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mbf/chain.hpp"

namespace mbf::testing {

// Dense Gaussian elimination with partial pivoting; A is row-major square.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    if (a[col][col] == 0.0) throw std::runtime_error("dense_solve: singular");
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double w = a[r][col] / a[col][col];
      if (w == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= w * a[col][c];
      b[r] -= w * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

// Expected first-passage times to `target` via a dense solve of the full
// linear system (independent of the tridiagonal elimination in analytics).
inline std::vector<double> dense_hitting_oracle(const ChainSpec& spec, int target) {
  const auto table = transition_table(spec);
  const int n = spec.n;
  std::vector<std::vector<double>> a(n + 1, std::vector<double>(n + 1, 0.0));
  std::vector<double> b(n + 1, 0.0);
  for (int i = 0; i <= n; ++i) {
    if (i == target) {
      a[i][i] = 1.0;
      b[i] = 0.0;
      continue;
    }
    a[i][i] = table[i].down + table[i].up;
    if (i > 0) a[i][i - 1] = -table[i].down;
    if (i < n) a[i][i + 1] = -table[i].up;
    b[i] = 1.0;
  }
  return dense_solve(std::move(a), std::move(b));
}

// Probability of reaching `absorb_at` before `ruin_at` starting from `start`,
// by dense absorption solve (oracle for the closed-form ruin probability).
inline double absorption_prob_oracle(const ChainSpec& spec, int start,
                                     int absorb_at, int ruin_at) {
  const auto table = transition_table(spec);
  const int n = spec.n;
  // h(i) = P_i(hit absorb_at before ruin_at); h solves the harmonic system.
  std::vector<std::vector<double>> a(n + 1, std::vector<double>(n + 1, 0.0));
  std::vector<double> b(n + 1, 0.0);
  for (int i = 0; i <= n; ++i) {
    if (i == absorb_at) {
      a[i][i] = 1.0;
      b[i] = 1.0;
    } else if (i == ruin_at) {
      a[i][i] = 1.0;
      b[i] = 0.0;
    } else {
      const double total = table[i].down + table[i].up;
      a[i][i] = total;
      if (i > 0) a[i][i - 1] = -table[i].down;
      if (i < n) a[i][i + 1] = -table[i].up;
    }
  }
  return dense_solve(std::move(a), std::move(b))[start];
}

// P(first crossing above f happens within `steps` DTMC steps), by explicit
// enumeration of every path. Exponential in `steps`: small inputs only.
inline double crossing_prob_by_enumeration(const ChainSpec& spec, int start, int f,
                                           int steps) {
  const auto table = transition_table(spec);
  double prob = 0.0;
  std::function<void(int, int, double)> walk = [&](int state, int left, double mass) {
    if (mass == 0.0) return;
    if (state > f) {
      prob += mass;
      return;
    }
    if (left == 0) return;
    const auto& tr = table[state];
    walk(state - 1, left - 1, mass * tr.down);
    walk(state + 1, left - 1, mass * tr.up);
    walk(state, left - 1, mass * tr.stay);
  };
  walk(start, steps, 1.0);
  return prob;
}

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("linear_fit: bad input");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

}  // namespace mbf::testing

#endif  // MBF_TEST_HELPERS_HPP
