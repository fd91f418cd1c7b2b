#include "mbf/simulate.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mbf/io.hpp"
#include "mbf/rng.hpp"

namespace mbf {

void SimBudget::validate() const {
  if (!(limit > 0)) throw std::invalid_argument("SimBudget: limit must be > 0");
  if (runs < 1) throw std::invalid_argument("SimBudget: runs must be >= 1");
  if (mode == BudgetMode::Steps && limit != std::floor(limit))
    throw std::invalid_argument("SimBudget: step budgets must be integral");
}

void validate_trace(const RunTrace& trace, int n) {
  int state = trace.start_state;
  if (state < 0 || state > n) throw std::logic_error("trace: start state outside [0, n]");
  double t = 0.0;
  for (const auto& [ts, s] : trace.events) {
    if (!(ts > t)) throw std::logic_error("trace: timestamps not strictly increasing");
    if (std::abs(s - state) != 1) throw std::logic_error("trace: state jump is not +-1");
    if (s < 0 || s > n) throw std::logic_error("trace: state outside [0, n]");
    t = ts;
    state = s;
  }
  if (trace.end_time < t) throw std::logic_error("trace: end_time before last event");
}

namespace {

// Flip bookkeeping shared by both kernels. A run starting at state <= f is
// good and flips the first time the state exceeds f; a run starting above f
// is bad and flips the first time the state drops back to <= f.
struct FlipTracker {
  int f;
  bool start_good;
  bool flipped = false;
  double flip_time = 0.0;

  FlipTracker(int start, const ThresholdPolicy& policy)
      : f(policy.f), start_good(start <= policy.f) {}

  // Returns true on the first crossing.
  bool observe(int state, double time) {
    if (flipped) return false;
    const bool crossed = start_good ? (state > f) : (state <= f);
    if (crossed) {
      flipped = true;
      flip_time = time;
    }
    return crossed;
  }

  void finalize(RunStats& stats) const {
    stats.flipped = flipped;
    stats.purely_good = start_good && !flipped;
    stats.purely_bad = !start_good && !flipped;
    if (flipped) stats.first_flip_time = flip_time;
  }
};

void check_start(const ChainSpec& spec, int start) {
  if (start < 0 || start > spec.n)
    throw std::invalid_argument("run: start state outside [0, n]");
}

}  // namespace

std::pair<RunTrace, RunStats> run_dtmc(const ChainSpec& spec, int start,
                                       const SimBudget& budget,
                                       const ThresholdPolicy& policy,
                                       std::uint64_t seed,
                                       const RunOptions& opts) {
  spec.validate();
  budget.validate();
  check_start(spec, start);
  if (spec.variant != Variant::Dtmc)
    throw std::invalid_argument("run_dtmc: spec variant is not dtmc");
  if (budget.mode != BudgetMode::Steps)
    throw std::invalid_argument("run_dtmc: budget must be step-based");

  const auto steps = static_cast<long long>(budget.limit);
  const std::vector<StateTransitions> table = transition_table(spec);
  SplitMix64 rng(seed);
  RunTrace trace;
  trace.start_state = start;
  RunStats stats;
  std::vector<double> occ(spec.n + 1, 0.0);
  FlipTracker flip(start, policy);

  int state = start;
  long long t = 0;
  for (; t < steps; ++t) {
    occ[state] += 1.0;  // state holds during [t, t+1)
    const StateTransitions& tr = table[state];
    const double u = rng.next_uniform();
    int next = state;
    if (u < tr.down) {
      next = state - 1;
    } else if (u < tr.down + tr.up) {
      next = state + 1;
    }
    const double now = double(t + 1);
    if (next != state) {
      state = next;
      if (opts.keep_trace) trace.events.emplace_back(now, state);
      if (flip.observe(state, now) && opts.stop_at_flip) {
        ++t;
        break;
      }
    }
  }
  trace.end_time = double(t);
  for (double& v : occ) v /= double(t);
  stats.occupancy = std::move(occ);
  flip.finalize(stats);
  return {std::move(trace), std::move(stats)};
}

std::pair<RunTrace, RunStats> run_ctmc(const ChainSpec& spec, int start,
                                       const SimBudget& budget,
                                       const ThresholdPolicy& policy,
                                       std::uint64_t seed,
                                       const RunOptions& opts) {
  spec.validate();
  budget.validate();
  check_start(spec, start);
  if (!is_ctmc(spec.variant))
    throw std::invalid_argument("run_ctmc: spec variant is not a CTMC");
  if (budget.mode != BudgetMode::Time)
    throw std::invalid_argument("run_ctmc: budget must be time-based");

  const double horizon = budget.limit;
  const std::vector<StateTransitions> table = transition_table(spec);
  SplitMix64 rng(seed);
  RunTrace trace;
  trace.start_state = start;
  RunStats stats;
  std::vector<double> occ(spec.n + 1, 0.0);
  FlipTracker flip(start, policy);

  int state = start;
  double t = 0.0;
  while (true) {
    const StateTransitions& tr = table[state];
    const double total = tr.down + tr.up;
    if (total <= 0.0) {
      // Absorbing: the rest of the budget is spent here.
      occ[state] += horizon - t;
      t = horizon;
      break;
    }
    const double dt = rng.next_exponential(total);
    if (t + dt > horizon) {
      occ[state] += horizon - t;
      t = horizon;
      break;
    }
    occ[state] += dt;
    t += dt;
    state += (rng.next_uniform() < tr.down / total) ? -1 : +1;
    if (opts.keep_trace) trace.events.emplace_back(t, state);
    if (flip.observe(state, t) && opts.stop_at_flip) break;
  }
  trace.end_time = t;
  for (double& v : occ) v /= t;
  stats.occupancy = std::move(occ);
  flip.finalize(stats);
  return {std::move(trace), std::move(stats)};
}

std::pair<RunTrace, RunStats> run_one(const ChainSpec& spec, int start,
                                      const SimBudget& budget,
                                      const ThresholdPolicy& policy,
                                      std::uint64_t seed,
                                      const RunOptions& opts) {
  return spec.variant == Variant::Dtmc
             ? run_dtmc(spec, start, budget, policy, seed, opts)
             : run_ctmc(spec, start, budget, policy, seed, opts);
}

std::optional<double> AggregateStats::mean_first_flip() const {
  if (n_flipped == 0) return std::nullopt;
  return flip_time_sum / n_flipped;
}

std::optional<double> AggregateStats::sem_first_flip() const {
  if (n_flipped < 2) return std::nullopt;
  const double mean = flip_time_sum / n_flipped;
  const double var =
      (flip_time_sumsq - n_flipped * mean * mean) / (n_flipped - 1);
  return std::sqrt(std::max(var, 0.0) / n_flipped);
}

std::string AggregateStats::to_json() const {
  nlohmann::json j;
  j["runs"] = runs;
  j["n_purely_good"] = n_purely_good;
  j["n_purely_bad"] = n_purely_bad;
  j["n_flipped"] = n_flipped;
  j["flip_time_sum"] = flip_time_sum;
  j["flip_time_sumsq"] = flip_time_sumsq;
  j["percent_purely_good"] = percent_purely_good();
  j["percent_purely_bad"] = percent_purely_bad();
  j["percent_flipped"] = percent_flipped();
  if (auto m = mean_first_flip()) j["mean_first_flip"] = *m;
  else j["mean_first_flip"] = nullptr;
  if (auto s = sem_first_flip()) j["sem_first_flip"] = *s;
  else j["sem_first_flip"] = nullptr;
  j["occupancy"] = occupancy;
  j["total_time"] = total_time;
  return j.dump();
}

AggregateStats AggregateStats::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  AggregateStats a;
  a.runs = j.at("runs").get<int>();
  a.n_purely_good = j.at("n_purely_good").get<int>();
  a.n_purely_bad = j.at("n_purely_bad").get<int>();
  a.n_flipped = j.at("n_flipped").get<int>();
  a.flip_time_sum = j.at("flip_time_sum").get<double>();
  a.flip_time_sumsq = j.at("flip_time_sumsq").get<double>();
  a.occupancy = j.at("occupancy").get<std::vector<double>>();
  a.total_time = j.at("total_time").get<double>();
  return a;
}

// Raw sums come first so parsing them reproduces the derived columns exactly.
static constexpr const char* kAggregateCsvHeader =
    "runs,n_purely_good,n_purely_bad,n_flipped,flip_time_sum,flip_time_sumsq,"
    "mean_first_flip,sem_first_flip";

std::string AggregateStats::to_csv() const {
  std::string out = std::string(kAggregateCsvHeader) + '\n';
  out += std::to_string(runs) + ',' + std::to_string(n_purely_good) + ',' +
         std::to_string(n_purely_bad) + ',' + std::to_string(n_flipped) + ',' +
         format_double(flip_time_sum) + ',' + format_double(flip_time_sumsq) + ',';
  if (auto m = mean_first_flip()) out += format_double(*m);
  out += ',';
  if (auto s = sem_first_flip()) out += format_double(*s);
  out += '\n';
  return out;
}

AggregateStats AggregateStats::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string header, row;
  if (!std::getline(in, header) || header != kAggregateCsvHeader)
    throw std::invalid_argument("aggregate CSV: missing header");
  if (!std::getline(in, row)) throw std::invalid_argument("aggregate CSV: missing row");
  auto fields = split_csv_line(row);
  if (fields.size() != 8) throw std::invalid_argument("aggregate CSV: bad row");
  AggregateStats a;
  a.runs = std::stoi(fields[0]);
  a.n_purely_good = std::stoi(fields[1]);
  a.n_purely_bad = std::stoi(fields[2]);
  a.n_flipped = std::stoi(fields[3]);
  a.flip_time_sum = std::stod(fields[4]);
  a.flip_time_sumsq = std::stod(fields[5]);
  return a;
}

AggregateStats run_batch(const ChainSpec& spec, int start,
                         const SimBudget& budget,
                         const ThresholdPolicy& policy,
                         const RunOptions& opts, int jobs) {
  spec.validate();
  budget.validate();
  if (jobs < 1) jobs = 1;

  RunOptions run_opts = opts;
  run_opts.keep_trace = false;  // batch mode keeps stats only

  struct PerRun {
    RunStats stats;
    double elapsed = 0.0;
  };
  std::vector<PerRun> results(budget.runs);

  auto work = [&](int run_index) {
    auto [trace, stats] =
        run_one(spec, start, budget, policy, budget.base_seed + run_index, run_opts);
    results[run_index] = PerRun{std::move(stats), trace.end_time};
  };

  if (jobs == 1 || budget.runs == 1) {
    for (int i = 0; i < budget.runs; ++i) work(i);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int i = next.fetch_add(1); i < budget.runs; i = next.fetch_add(1)) work(i);
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min(jobs, budget.runs);
    pool.reserve(nthreads);
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Fold in run order: the aggregate is independent of the thread schedule.
  AggregateStats agg;
  agg.runs = budget.runs;
  agg.occupancy.assign(spec.n + 1, 0.0);
  for (const auto& res : results) {
    const RunStats& s = res.stats;
    agg.n_purely_good += s.purely_good ? 1 : 0;
    agg.n_purely_bad += s.purely_bad ? 1 : 0;
    agg.n_flipped += s.flipped ? 1 : 0;
    if (s.first_flip_time) {
      agg.flip_time_sum += *s.first_flip_time;
      agg.flip_time_sumsq += *s.first_flip_time * *s.first_flip_time;
    }
    for (std::size_t i = 0; i < s.occupancy.size(); ++i)
      agg.occupancy[i] += s.occupancy[i] * res.elapsed;
    agg.total_time += res.elapsed;
  }
  if (agg.total_time > 0)
    for (double& v : agg.occupancy) v /= agg.total_time;
  return agg;
}

double total_variation_distance(const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("total_variation_distance: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

}  // namespace mbf
