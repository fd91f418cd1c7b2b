#include "mbf/chain.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace mbf {

bool is_ctmc(Variant v) { return v != Variant::Dtmc; }

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Dtmc: return "dtmc";
    case Variant::CtmcExternal: return "ctmc-external";
    case Variant::CtmcInternal: return "ctmc-internal";
    case Variant::CtmcCoordinated: return "ctmc-coordinated";
  }
  throw std::invalid_argument("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "dtmc") return Variant::Dtmc;
  if (name == "ctmc-external") return Variant::CtmcExternal;
  if (name == "ctmc-internal") return Variant::CtmcInternal;
  if (name == "ctmc-coordinated") return Variant::CtmcCoordinated;
  throw std::invalid_argument("unknown chain variant: \"" + name + "\"");
}

ChainSpec ChainSpec::dtmc(int n, double p, double q, double r) {
  ChainSpec s{n, Variant::Dtmc, p, q, r, 0.0};
  s.validate();
  return s;
}

ChainSpec ChainSpec::ctmc_external(int n, double p, double q) {
  ChainSpec s{n, Variant::CtmcExternal, p, q, 0.0, 0.0};
  s.validate();
  return s;
}

ChainSpec ChainSpec::ctmc_internal(int n, double p, double q,
                                   std::optional<double> seed_rate) {
  ChainSpec s{n, Variant::CtmcInternal, p, q, 0.0, seed_rate.value_or(q)};
  s.validate();
  return s;
}

ChainSpec ChainSpec::ctmc_coordinated(int n, double p, double q,
                                      std::optional<double> seed_rate) {
  ChainSpec s{n, Variant::CtmcCoordinated, p, q, 0.0, seed_rate.value_or(q)};
  s.validate();
  return s;
}

void ChainSpec::validate() const {
  if (n < 2) throw std::invalid_argument("ChainSpec: n must be >= 2");
  if (p < 0 || q < 0) throw std::invalid_argument("ChainSpec: p and q must be nonnegative");
  if (seed_rate < 0) throw std::invalid_argument("ChainSpec: seed_rate must be nonnegative");
  if (variant == Variant::Dtmc) {
    if (p > 1 || q > 1 || r < 0 || r > 1)
      throw std::invalid_argument("ChainSpec: DTMC requires p, q, r in [0,1]");
    if (std::abs(p + q + r - 1.0) > kProbSumTol)
      throw std::invalid_argument("ChainSpec: DTMC requires p + q + r = 1 (tol 1e-12)");
  } else {
    if (r != 0.0) throw std::invalid_argument("ChainSpec: CTMC variants require r = 0");
    if (p + q <= 0.0) throw std::invalid_argument("ChainSpec: CTMC variants require p + q > 0");
  }
}

std::string ChainSpec::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["variant"] = variant_name(variant);
  j["p"] = p;
  j["q"] = q;
  j["r"] = r;
  j["seed_rate"] = seed_rate;
  return j.dump();
}

ChainSpec ChainSpec::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ChainSpec s;
  s.n = j.at("n").get<int>();
  s.variant = variant_from_name(j.at("variant").get<std::string>());
  s.p = j.at("p").get<double>();
  s.q = j.at("q").get<double>();
  s.r = j.value("r", 0.0);
  if (j.contains("seed_rate")) {
    s.seed_rate = j["seed_rate"].get<double>();
  } else {
    s.seed_rate = (s.variant == Variant::CtmcInternal ||
                   s.variant == Variant::CtmcCoordinated)
                      ? s.q
                      : 0.0;
  }
  s.validate();
  return s;
}

StateTransitions transitions(const ChainSpec& spec, int state) {
  spec.validate();
  if (state < 0 || state > spec.n)
    throw std::out_of_range("transitions: state outside [0, n]");

  const int n = spec.n;
  const double p = spec.p;
  const double q = spec.q;
  StateTransitions t;
  t.state = state;

  switch (spec.variant) {
    case Variant::Dtmc:
      if (state == 0) {
        // r_0 = r' = r + p, so the up move keeps probability q.
        t = {state, 0.0, 1.0 - (spec.r + p), spec.r + p};
      } else if (state == n) {
        t = {state, 1.0 - (spec.r + q), 0.0, spec.r + q};
      } else {
        t = {state, p, q, spec.r};
      }
      break;
    case Variant::CtmcExternal:
      t = {state, state == 0 ? 0.0 : p, state == n ? 0.0 : q, 0.0};
      break;
    case Variant::CtmcInternal:
      if (state == 0) {
        t = {state, 0.0, spec.seed_rate, 0.0};
      } else {
        // Only the n-i still-correct nodes can be infected.
        t = {state, p * state, q * state * (double(n - state) / n), 0.0};
      }
      break;
    case Variant::CtmcCoordinated:
      if (state == 0) {
        t = {state, 0.0, spec.seed_rate, 0.0};
      } else {
        t = {state, p * state, state == n ? 0.0 : q * state, 0.0};
      }
      break;
  }
  return t;
}

std::vector<StateTransitions> transition_table(const ChainSpec& spec) {
  spec.validate();
  std::vector<StateTransitions> table;
  table.reserve(spec.n + 1);
  for (int i = 0; i <= spec.n; ++i) table.push_back(transitions(spec, i));
  return table;
}

ThresholdPolicy ThresholdPolicy::from_f(int f, int n) {
  if (f < 0 || f > n) throw std::invalid_argument("ThresholdPolicy: f outside [0, n]");
  return ThresholdPolicy{f};
}

ThresholdPolicy ThresholdPolicy::from_fraction(double c, int n) {
  if (!(c > 0.0 && c < 1.0))
    throw std::invalid_argument("ThresholdPolicy: fraction must lie in (0,1)");
  return ThresholdPolicy{static_cast<int>(std::floor(c * (n - 1)))};
}

}  // namespace mbf
