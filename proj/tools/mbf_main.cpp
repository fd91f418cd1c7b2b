// mbf: simulator and analytic toolkit for probabilistic mobile Byzantine
// failure chains, plus the self-protection loop harness.
//
// Subcommands: simulate, sweep, occupancy, analytic, mapek.
// Exit codes: 0 success, 2 validation error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mbf/analytics.hpp"
#include "mbf/chain.hpp"
#include "mbf/io.hpp"
#include "mbf/mapek.hpp"
#include "mbf/simulate.hpp"
#include "mbf/sweep.hpp"

namespace {

struct SpecArgs {
  std::string variant = "dtmc";
  int n = 0;
  double p = 0.0;
  double q = 0.0;
  double r = 0.0;
  std::optional<double> seed_rate;

  void add_to(CLI::App* cmd, bool need_n = true) {
    cmd->add_option("--variant", variant,
                    "dtmc | ctmc-external | ctmc-internal | ctmc-coordinated")
        ->required();
    auto* n_opt = cmd->add_option("--n", n, "number of processes");
    if (need_n) n_opt->required();
    cmd->add_option("--p", p, "recovery probability/rate")->required();
    cmd->add_option("--q", q, "infection probability/rate")->required();
    cmd->add_option("--r", r, "DTMC stay probability (default 0)");
    cmd->add_option("--seed-rate", seed_rate,
                    "infection rate out of state 0 (internal/coordinated; default q)");
  }

  mbf::ChainSpec build() const {
    using mbf::ChainSpec;
    const mbf::Variant v = mbf::variant_from_name(variant);
    if (v != mbf::Variant::Dtmc && r != 0.0)
      throw std::invalid_argument("--r applies to the DTMC only");
    switch (v) {
      case mbf::Variant::Dtmc: return ChainSpec::dtmc(n, p, q, r);
      case mbf::Variant::CtmcExternal: return ChainSpec::ctmc_external(n, p, q);
      case mbf::Variant::CtmcInternal:
        return ChainSpec::ctmc_internal(n, p, q, seed_rate);
      case mbf::Variant::CtmcCoordinated:
        return ChainSpec::ctmc_coordinated(n, p, q, seed_rate);
    }
    throw std::invalid_argument("unknown variant");
  }
};

struct SeedArgs {
  std::optional<std::uint64_t> seed;
  bool entropy = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "base RNG seed (required unless --entropy)");
    cmd->add_flag("--entropy", entropy, "seed from the OS entropy source");
  }

  std::uint64_t resolve() const {
    if (seed && entropy)
      throw std::invalid_argument("--seed conflicts with --entropy");
    if (seed) return *seed;
    if (!entropy)
      throw std::invalid_argument("--seed is required (or pass --entropy)");
    std::random_device rd;
    const std::uint64_t s = (std::uint64_t(rd()) << 32) ^ rd();
    std::cerr << "entropy seed: " << s << "\n";
    return s;
  }
};

mbf::ThresholdPolicy resolve_policy(std::optional<int> f, std::optional<double> frac,
                                    int n, bool allow_default = false) {
  if (f && frac) throw std::invalid_argument("--f conflicts with --threshold-frac");
  if (f) return mbf::ThresholdPolicy::from_f(*f, n);
  if (frac) return mbf::ThresholdPolicy::from_fraction(*frac, n);
  if (allow_default) return mbf::ThresholdPolicy::from_f(n, n);
  throw std::invalid_argument("one of --f / --threshold-frac is required");
}

mbf::SimBudget resolve_budget(const mbf::ChainSpec& spec, std::optional<double> steps,
                              std::optional<double> time, int runs,
                              std::uint64_t seed) {
  if (steps && time) throw std::invalid_argument("--steps conflicts with --time");
  mbf::SimBudget b;
  b.runs = runs;
  b.base_seed = seed;
  if (spec.variant == mbf::Variant::Dtmc) {
    if (!steps) throw std::invalid_argument("DTMC simulation needs --steps");
    b.mode = mbf::BudgetMode::Steps;
    b.limit = *steps;
  } else {
    if (!time) throw std::invalid_argument("CTMC simulation needs --time");
    b.mode = mbf::BudgetMode::Time;
    b.limit = *time;
  }
  b.validate();
  return b;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
}

std::string trace_to_csv(const mbf::RunTrace& trace) {
  std::string out = "time,state\n";
  out += "0," + std::to_string(trace.start_state) + '\n';
  for (const auto& [t, s] : trace.events)
    out += mbf::format_double(t) + ',' + std::to_string(s) + '\n';
  return out;
}

std::vector<double> grid_values(double lo, double hi, double step) {
  if (!(step > 0) || hi < lo) throw std::invalid_argument("bad grid range");
  std::vector<double> vals;
  for (int k = 0;; ++k) {
    const double v = lo + k * step;
    if (v > hi + 1e-12) break;
    vals.push_back(v);
  }
  return vals;
}

// ---------------------------------------------------------------------------

int cmd_simulate(CLI::App& app) {
  auto* cmd = app.add_subcommand("simulate", "run one batch and report aggregate stats");
  auto spec_args = std::make_shared<SpecArgs>();
  auto seed_args = std::make_shared<SeedArgs>();
  spec_args->add_to(cmd);
  seed_args->add_to(cmd);
  auto start = std::make_shared<int>(0);
  auto f = std::make_shared<std::optional<int>>();
  auto frac = std::make_shared<std::optional<double>>();
  auto steps = std::make_shared<std::optional<double>>();
  auto time = std::make_shared<std::optional<double>>();
  auto runs = std::make_shared<int>(1);
  auto jobs = std::make_shared<int>(1);
  auto out = std::make_shared<std::string>();
  auto csv = std::make_shared<std::string>();
  auto trace_path = std::make_shared<std::string>();
  cmd->add_option("--start", *start, "initial number of faulty processes");
  cmd->add_option("--f", *f, "resilience threshold");
  cmd->add_option("--threshold-frac", *frac, "derive f = floor(c*(n-1))");
  cmd->add_option("--steps", *steps, "DTMC step budget");
  cmd->add_option("--time", *time, "CTMC time budget");
  cmd->add_option("--runs", *runs, "independent runs (seeds seed+0..runs-1)");
  cmd->add_option("--jobs", *jobs, "worker threads");
  cmd->add_option("--out", *out, "aggregate JSON file (default stdout)");
  cmd->add_option("--csv", *csv, "also write the aggregate CSV here");
  cmd->add_option("--trace", *trace_path, "event-list CSV (requires --runs 1)");

  cmd->callback([=] {
    const mbf::ChainSpec spec = spec_args->build();
    const auto policy = resolve_policy(*f, *frac, spec.n);
    const auto budget =
        resolve_budget(spec, *steps, *time, *runs, seed_args->resolve());
    if (!trace_path->empty()) {
      if (*runs != 1)
        throw std::invalid_argument("--trace requires --runs 1");
      const auto [trace, stats] =
          mbf::run_one(spec, *start, budget, policy, budget.base_seed);
      write_output(*trace_path, trace_to_csv(trace));
    }
    const mbf::AggregateStats agg =
        mbf::run_batch(spec, *start, budget, policy, {}, *jobs);
    write_output(*out, agg.to_json());
    if (!csv->empty()) write_output(*csv, agg.to_csv());
  });
  return 0;
}

int cmd_sweep(CLI::App& app) {
  auto* cmd = app.add_subcommand("sweep", "batch grid over (p, q); heatmap CSV");
  auto seed_args = std::make_shared<SeedArgs>();
  seed_args->add_to(cmd);
  auto variant = std::make_shared<std::string>("dtmc");
  auto n = std::make_shared<int>(0);
  auto start = std::make_shared<int>(0);
  auto f = std::make_shared<std::optional<int>>();
  auto frac = std::make_shared<std::optional<double>>();
  auto steps = std::make_shared<std::optional<double>>();
  auto time = std::make_shared<std::optional<double>>();
  auto runs = std::make_shared<std::optional<int>>();
  auto jobs = std::make_shared<int>(1);
  auto out = std::make_shared<std::string>();
  auto p_min = std::make_shared<double>(0.1);
  auto p_max = std::make_shared<double>(0.9);
  auto p_step = std::make_shared<double>(0.1);
  auto q_min = std::make_shared<double>(0.1);
  auto q_max = std::make_shared<double>(0.9);
  auto q_step = std::make_shared<double>(0.1);
  auto seed_rate = std::make_shared<std::optional<double>>();
  auto preset = std::make_shared<std::string>();
  cmd->add_option("--variant", *variant, "chain variant")->required();
  cmd->add_option("--n", *n, "number of processes");
  cmd->add_option("--start", *start, "initial state");
  cmd->add_option("--f", *f, "resilience threshold");
  cmd->add_option("--threshold-frac", *frac, "derive f = floor(c*(n-1))");
  cmd->add_option("--steps", *steps, "DTMC step budget per run");
  cmd->add_option("--time", *time, "CTMC time budget per run");
  cmd->add_option("--runs", *runs, "runs per cell");
  cmd->add_option("--jobs", *jobs, "worker threads over cells");
  cmd->add_option("--out", *out, "CSV file (default stdout)");
  cmd->add_option("--p-min", *p_min, "grid start for p (default 0.1)");
  cmd->add_option("--p-max", *p_max, "grid end for p (default 0.9)");
  cmd->add_option("--p-step", *p_step, "grid step for p (default 0.1)");
  cmd->add_option("--q-min", *q_min, "grid start for q (default 0.1)");
  cmd->add_option("--q-max", *q_max, "grid end for q (default 0.9)");
  cmd->add_option("--q-step", *q_step, "grid step for q (default 0.1)");
  cmd->add_option("--seed-rate", *seed_rate, "seed rate (internal/coordinated)");
  cmd->add_option("--preset", *preset, "\"desk\": n=50, 100K budget, 100 runs");

  cmd->callback([=] {
    mbf::SweepGrid grid;
    grid.variant = mbf::variant_from_name(*variant);
    grid.n = *n;
    int cell_runs = runs->value_or(100);
    std::optional<double> limit_steps = *steps, limit_time = *time;
    if (!preset->empty()) {
      if (*preset != "desk") throw std::invalid_argument("unknown preset: " + *preset);
      if (grid.n == 0) grid.n = 50;
      if (!runs->has_value()) cell_runs = 100;
      if (!limit_steps && !limit_time) {
        if (grid.variant == mbf::Variant::Dtmc) limit_steps = 100000;
        else limit_time = 100000;
      }
    }
    if (grid.n == 0) throw std::invalid_argument("--n is required (or --preset desk)");
    grid.start = *start;
    grid.policy = resolve_policy(*f, *frac, grid.n);
    grid.p_values = grid_values(*p_min, *p_max, *p_step);
    grid.q_values = grid_values(*q_min, *q_max, *q_step);
    grid.seed_rate = *seed_rate;
    grid.budget.runs = cell_runs;
    grid.budget.base_seed = seed_args->resolve();
    if (grid.variant == mbf::Variant::Dtmc) {
      if (!limit_steps) throw std::invalid_argument("DTMC sweep needs --steps");
      grid.budget.mode = mbf::BudgetMode::Steps;
      grid.budget.limit = *limit_steps;
    } else {
      if (!limit_time) throw std::invalid_argument("CTMC sweep needs --time");
      grid.budget.mode = mbf::BudgetMode::Time;
      grid.budget.limit = *limit_time;
    }
    const mbf::SweepResult result = mbf::run_sweep(grid, *jobs);
    write_output(*out, result.to_csv());
  });
  return 0;
}

int cmd_occupancy(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "occupancy", "empirical state occupancy next to the analytic distribution");
  auto spec_args = std::make_shared<SpecArgs>();
  auto seed_args = std::make_shared<SeedArgs>();
  spec_args->add_to(cmd);
  seed_args->add_to(cmd);
  auto start = std::make_shared<int>(0);
  auto steps = std::make_shared<std::optional<double>>();
  auto time = std::make_shared<std::optional<double>>();
  auto runs = std::make_shared<int>(1);
  auto jobs = std::make_shared<int>(1);
  auto out = std::make_shared<std::string>();
  cmd->add_option("--start", *start, "initial state");
  cmd->add_option("--steps", *steps, "DTMC step budget per run");
  cmd->add_option("--time", *time, "CTMC time budget per run");
  cmd->add_option("--runs", *runs, "runs to pool");
  cmd->add_option("--jobs", *jobs, "worker threads");
  cmd->add_option("--out", *out, "CSV file (default stdout)");

  cmd->callback([=] {
    const mbf::ChainSpec spec = spec_args->build();
    const auto policy = mbf::ThresholdPolicy::from_f(spec.n, spec.n);
    const auto budget =
        resolve_budget(spec, *steps, *time, *runs, seed_args->resolve());
    const mbf::AggregateStats agg =
        mbf::run_batch(spec, *start, budget, policy, {}, *jobs);
    std::optional<std::vector<double>> pi;
    try {
      pi = mbf::stationary_distribution(spec).pi;
    } catch (const mbf::NonErgodicError&) {
      // analytic column stays empty
    }
    write_output(*out, mbf::occupancy_comparison_to_csv(agg.occupancy, pi));
  });
  return 0;
}

int cmd_analytic(CLI::App& app) {
  auto* cmd = app.add_subcommand("analytic", "evaluate closed-form results as JSON");
  cmd->require_subcommand(1);

  {  // hitting
    auto* sub = cmd->add_subcommand("hitting", "exact expected first-passage times");
    auto spec_args = std::make_shared<SpecArgs>();
    spec_args->add_to(sub);
    auto target = std::make_shared<int>(0);
    auto start = std::make_shared<std::optional<int>>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--target", *target, "target state")->required();
    sub->add_option("--start", *start, "also report the value from this state");
    sub->add_option("--out", *out, "output file (default stdout)");
    sub->callback([=] {
      const auto sol =
          mbf::expected_hitting_time_exact(spec_args->build(), *target);
      nlohmann::json j;
      j["target"] = sol.target;
      j["f_values"] = sol.f_values;
      if (*start) j["value"] = sol.f_values.at(**start);
      write_output(*out, j.dump());
    });
  }
  {  // stationary
    auto* sub = cmd->add_subcommand("stationary", "stationary distribution");
    auto spec_args = std::make_shared<SpecArgs>();
    spec_args->add_to(sub);
    auto out = std::make_shared<std::string>();
    sub->add_option("--out", *out, "output file (default stdout)");
    sub->callback([=] {
      const auto dist = mbf::stationary_distribution(spec_args->build());
      nlohmann::json j;
      j["pi"] = dist.pi;
      j["argmax"] = mbf::argmax_index(dist.pi);
      write_output(*out, j.dump());
    });
  }
  {  // regime
    auto* sub = cmd->add_subcommand("regime", "internal-model growth regime");
    auto p = std::make_shared<double>(0.0);
    auto q = std::make_shared<double>(0.0);
    auto out = std::make_shared<std::string>();
    sub->add_option("--p", *p)->required();
    sub->add_option("--q", *q)->required();
    sub->add_option("--out", *out, "output file (default stdout)");
    sub->callback([=] {
      nlohmann::json j;
      j["regime"] = mbf::regime_name(mbf::internal_regime(*p, *q));
      write_output(*out, j.dump());
    });
  }
  {  // ruin
    auto* sub = cmd->add_subcommand("ruin", "gambler's-ruin escape probability");
    auto p = std::make_shared<double>(0.0);
    auto q = std::make_shared<double>(0.0);
    auto m = std::make_shared<int>(0);
    auto symmetric = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    sub->add_option("--p", *p)->required();
    sub->add_option("--q", *q)->required();
    sub->add_option("--m", *m)->required();
    sub->add_flag("--symmetric-limit", *symmetric, "return 1/m at p = q");
    sub->add_option("--out", *out, "output file (default stdout)");
    sub->callback([=] {
      nlohmann::json j;
      j["value"] = mbf::gamblers_ruin_prob(*p, *q, *m, *symmetric);
      write_output(*out, j.dump());
    });
  }
  {  // lazy scaling
    auto* sub = cmd->add_subcommand("lazy", "1/(1-r) laziness scaling");
    auto f0 = std::make_shared<double>(0.0);
    auto r = std::make_shared<double>(0.0);
    auto out = std::make_shared<std::string>();
    sub->add_option("--f0", *f0, "passage time at r = 0")->required();
    sub->add_option("--r", *r)->required();
    sub->add_option("--out", *out, "output file (default stdout)");
    sub->callback([=] {
      nlohmann::json j;
      j["value"] = mbf::dtmc_lazy_scaling(*f0, *r);
      write_output(*out, j.dump());
    });
  }
  {  // escape bound
    auto* sub = cmd->add_subcommand(
        "escape-bound", "lower bound (p/q)^(n/3)/2 for dominant recovery");
    auto p = std::make_shared<double>(0.0);
    auto q = std::make_shared<double>(0.0);
    auto n = std::make_shared<int>(0);
    auto out = std::make_shared<std::string>();
    sub->add_option("--p", *p)->required();
    sub->add_option("--q", *q)->required();
    sub->add_option("--n", *n)->required();
    sub->add_option("--out", *out, "output file (default stdout)");
    sub->callback([=] {
      nlohmann::json j;
      j["value"] = mbf::escape_time_lower_bound(*p, *q, *n);
      write_output(*out, j.dump());
    });
  }
  {  // drift bound
    auto* sub = cmd->add_subcommand(
        "drift-bound", "lower bound n/((1-2p)(1-p/q)) for dominant infection");
    auto p = std::make_shared<double>(0.0);
    auto n = std::make_shared<int>(0);
    auto out = std::make_shared<std::string>();
    sub->add_option("--p", *p)->required();
    sub->add_option("--n", *n)->required();
    sub->add_option("--out", *out, "output file (default stdout)");
    sub->callback([=] {
      nlohmann::json j;
      j["value"] = mbf::drift_time_lower_bound(*p, *n);
      write_output(*out, j.dump());
    });
  }
  {  // coordinated f(1)
    auto* sub = cmd->add_subcommand(
        "coordinated-f1", "coordinated-model expected time from state 1 to n/3");
    auto p = std::make_shared<double>(0.0);
    auto q = std::make_shared<double>(0.0);
    auto n = std::make_shared<int>(0);
    auto out = std::make_shared<std::string>();
    sub->add_option("--p", *p)->required();
    sub->add_option("--q", *q)->required();
    sub->add_option("--n", *n)->required();
    sub->add_option("--out", *out, "output file (default stdout)");
    sub->callback([=] {
      nlohmann::json j;
      j["value"] = mbf::coordinated_f1_closed_form(*p, *q, *n);
      j["series_literal"] = mbf::coordinated_f1_series_literal(*p, *q, *n);
      write_output(*out, j.dump());
    });
  }
  return 0;
}

int cmd_mapek(CLI::App& app) {
  auto* cmd = app.add_subcommand("mapek", "run the self-protection loop on a scenario");
  auto scenario_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--scenario", *scenario_path, "scenario JSON file")->required();
  cmd->add_option("--out", *out, "LoopReport JSON file (default stdout)");
  cmd->callback([=] {
    std::ifstream in(*scenario_path);
    if (!in) throw std::runtime_error("cannot open scenario: " + *scenario_path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    const auto scenario = mbf::LoopScenario::from_json(text);
    const auto report = mbf::closed_loop(scenario);
    write_output(*out, report.to_json());
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mobile Byzantine failure chain simulator and analyzer"};
  app.require_subcommand(1);
  cmd_simulate(app);
  cmd_sweep(app);
  cmd_occupancy(app);
  cmd_analytic(app);
  cmd_mapek(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
