#include "mbf/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "mbf/io.hpp"

namespace mbf {

void SweepGrid::validate() const {
  if (p_values.empty() || q_values.empty())
    throw std::invalid_argument("sweep: empty value lists");
  if (!std::is_sorted(p_values.begin(), p_values.end()) ||
      !std::is_sorted(q_values.begin(), q_values.end()))
    throw std::invalid_argument("sweep: value lists must be ascending");
  if (n < 2) throw std::invalid_argument("sweep: n must be >= 2");
  if (start < 0 || start > n) throw std::invalid_argument("sweep: start outside [0, n]");
  budget.validate();
}

std::optional<ChainSpec> sweep_cell_spec(const SweepGrid& grid, double p, double q) {
  if (grid.variant == Variant::Dtmc) {
    if (p > 1.0 || q > 1.0) return std::nullopt;
    double r = 1.0 - p - q;
    if (std::abs(r) <= kProbSumTol) r = 0.0;  // exact-sum cells like p = q = 0.5
    if (r < 0.0) return std::nullopt;         // p + q > 1 is meaningless
    return ChainSpec::dtmc(grid.n, p, q, r);
  }
  switch (grid.variant) {
    case Variant::CtmcExternal: return ChainSpec::ctmc_external(grid.n, p, q);
    case Variant::CtmcInternal:
      return ChainSpec::ctmc_internal(grid.n, p, q, grid.seed_rate);
    case Variant::CtmcCoordinated:
      return ChainSpec::ctmc_coordinated(grid.n, p, q, grid.seed_rate);
    default: return std::nullopt;
  }
}

SweepResult run_sweep(const SweepGrid& grid, int jobs) {
  grid.validate();
  if (jobs < 1) jobs = 1;

  struct CellTask {
    double p, q;
    std::optional<ChainSpec> spec;
    std::uint64_t base_seed;
  };
  std::vector<CellTask> tasks;
  tasks.reserve(grid.p_values.size() * grid.q_values.size());
  std::uint64_t cell_index = 0;
  for (double p : grid.p_values) {
    for (double q : grid.q_values) {
      tasks.push_back({p, q, sweep_cell_spec(grid, p, q),
                       grid.budget.base_seed + cell_index * grid.budget.runs});
      ++cell_index;
    }
  }

  SweepResult result;
  result.cells.resize(tasks.size());
  auto work = [&](std::size_t i) {
    const CellTask& task = tasks[i];
    SweepCell cell;
    cell.p = task.p;
    cell.q = task.q;
    cell.valid = task.spec.has_value();
    if (cell.valid) {
      SimBudget budget = grid.budget;
      budget.base_seed = task.base_seed;
      RunOptions opts;
      opts.keep_trace = false;
      opts.stop_at_flip = true;
      const AggregateStats stats =
          run_batch(*task.spec, grid.start, budget, grid.policy, opts, 1);
      cell.n_runs = stats.runs;
      cell.n_purely_good = stats.n_purely_good;
      cell.n_purely_bad = stats.n_purely_bad;
      cell.n_flipped = stats.n_flipped;
      cell.mean_first_flip = stats.mean_first_flip();
    }
    result.cells[i] = cell;
  };

  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
        work(i);
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<std::size_t>(jobs, tasks.size());
    pool.reserve(nthreads);
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return result;
}

static constexpr const char* kSweepCsvHeader =
    "p,q,valid,n_runs,n_purely_good,n_purely_bad,n_flipped,mean_first_flip";

std::string SweepResult::to_csv() const {
  std::string out = std::string(kSweepCsvHeader) + '\n';
  for (const auto& c : cells) {
    out += format_double(c.p) + ',' + format_double(c.q) + ',';
    if (!c.valid) {
      out += "invalid,,,,,\n";
      continue;
    }
    out += "1," + std::to_string(c.n_runs) + ',' + std::to_string(c.n_purely_good) +
           ',' + std::to_string(c.n_purely_bad) + ',' + std::to_string(c.n_flipped) +
           ',';
    if (c.mean_first_flip) out += format_double(*c.mean_first_flip);
    out += '\n';
  }
  return out;
}

SweepResult SweepResult::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader)
    throw std::invalid_argument("sweep CSV: missing header");
  SweepResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 8) throw std::invalid_argument("sweep CSV: bad row");
    SweepCell c;
    c.p = std::stod(fields[0]);
    c.q = std::stod(fields[1]);
    if (fields[2] == "invalid") {
      c.valid = false;
    } else if (fields[2] == "1") {
      c.valid = true;
      c.n_runs = std::stoi(fields[3]);
      c.n_purely_good = std::stoi(fields[4]);
      c.n_purely_bad = std::stoi(fields[5]);
      c.n_flipped = std::stoi(fields[6]);
      if (!fields[7].empty()) c.mean_first_flip = std::stod(fields[7]);
    } else {
      throw std::invalid_argument("sweep CSV: bad valid marker");
    }
    result.cells.push_back(c);
  }
  return result;
}

}  // namespace mbf
