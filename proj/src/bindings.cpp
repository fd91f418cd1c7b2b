#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "mbf/analytics.hpp"
#include "mbf/chain.hpp"
#include "mbf/mapek.hpp"
#include "mbf/simulate.hpp"

namespace py = pybind11;

namespace {

mbf::ChainSpec make_spec(const std::string& variant, int n, double p, double q,
                         double r, std::optional<double> seed_rate) {
  using mbf::ChainSpec;
  switch (mbf::variant_from_name(variant)) {
    case mbf::Variant::Dtmc: return ChainSpec::dtmc(n, p, q, r);
    case mbf::Variant::CtmcExternal: return ChainSpec::ctmc_external(n, p, q);
    case mbf::Variant::CtmcInternal: return ChainSpec::ctmc_internal(n, p, q, seed_rate);
    case mbf::Variant::CtmcCoordinated:
      return ChainSpec::ctmc_coordinated(n, p, q, seed_rate);
  }
  throw std::invalid_argument("unknown variant");
}

mbf::SimBudget make_budget(const mbf::ChainSpec& spec, double limit, int runs,
                           std::uint64_t seed) {
  mbf::SimBudget b;
  b.mode = spec.variant == mbf::Variant::Dtmc ? mbf::BudgetMode::Steps
                                              : mbf::BudgetMode::Time;
  b.limit = limit;
  b.runs = runs;
  b.base_seed = seed;
  return b;
}

}  // namespace

PYBIND11_MODULE(mbfsim, m) {
  m.doc() =
      "Birth-death chain models of mobile Byzantine compromise: Monte Carlo "
      "simulation, exact hitting-time and stationary analysis, and a "
      "self-protection control loop.";

  py::class_<mbf::ChainSpec>(m, "ChainSpec")
      .def_readonly("n", &mbf::ChainSpec::n)
      .def_property_readonly(
          "variant", [](const mbf::ChainSpec& s) { return variant_name(s.variant); })
      .def_readonly("p", &mbf::ChainSpec::p)
      .def_readonly("q", &mbf::ChainSpec::q)
      .def_readonly("r", &mbf::ChainSpec::r)
      .def_readonly("seed_rate", &mbf::ChainSpec::seed_rate)
      .def("to_json", &mbf::ChainSpec::to_json)
      .def_static("from_json", &mbf::ChainSpec::from_json)
      .def("__repr__", [](const mbf::ChainSpec& s) {
        return "ChainSpec(" + s.to_json() + ")";
      });

  m.def("make_spec", &make_spec, py::arg("variant"), py::arg("n"), py::arg("p"),
        py::arg("q"), py::arg("r") = 0.0, py::arg("seed_rate") = std::nullopt,
        "Build a validated ChainSpec; variant is one of dtmc, ctmc-external, "
        "ctmc-internal, ctmc-coordinated.");

  m.def(
      "transitions",
      [](const mbf::ChainSpec& spec, int state) {
        const auto t = mbf::transitions(spec, state);
        return py::make_tuple(t.down, t.up, t.stay);
      },
      py::arg("spec"), py::arg("state"),
      "Per-state (down, up, stay) probabilities/rates.");

  m.def(
      "threshold_from_fraction",
      [](double c, int n) { return mbf::ThresholdPolicy::from_fraction(c, n).f; },
      py::arg("fraction"), py::arg("n"), "f = floor(c * (n - 1)).");

  py::class_<mbf::AggregateStats>(m, "AggregateStats")
      .def_readonly("runs", &mbf::AggregateStats::runs)
      .def_readonly("n_purely_good", &mbf::AggregateStats::n_purely_good)
      .def_readonly("n_purely_bad", &mbf::AggregateStats::n_purely_bad)
      .def_readonly("n_flipped", &mbf::AggregateStats::n_flipped)
      .def_readonly("occupancy", &mbf::AggregateStats::occupancy)
      .def_property_readonly("percent_purely_good",
                             &mbf::AggregateStats::percent_purely_good)
      .def_property_readonly("percent_purely_bad",
                             &mbf::AggregateStats::percent_purely_bad)
      .def_property_readonly("percent_flipped", &mbf::AggregateStats::percent_flipped)
      .def_property_readonly("mean_first_flip", &mbf::AggregateStats::mean_first_flip)
      .def_property_readonly("sem_first_flip", &mbf::AggregateStats::sem_first_flip)
      .def("to_json", &mbf::AggregateStats::to_json)
      .def("to_csv", &mbf::AggregateStats::to_csv);

  m.def(
      "run_batch",
      [](const mbf::ChainSpec& spec, int start, double limit, int runs,
         std::uint64_t seed, int f, int jobs, bool stop_at_flip) {
        mbf::RunOptions opts;
        opts.keep_trace = false;
        opts.stop_at_flip = stop_at_flip;
        return mbf::run_batch(spec, start, make_budget(spec, limit, runs, seed),
                              mbf::ThresholdPolicy::from_f(f, spec.n), opts, jobs);
      },
      py::arg("spec"), py::arg("start"), py::arg("limit"), py::arg("runs"),
      py::arg("seed"), py::arg("f"), py::arg("jobs") = 1,
      py::arg("stop_at_flip") = false,
      "Batch of independent runs; limit is steps (DTMC) or time (CTMC).");

  m.def(
      "simulate_trace",
      [](const mbf::ChainSpec& spec, int start, double limit, std::uint64_t seed,
         std::optional<int> f) {
        const auto policy =
            mbf::ThresholdPolicy::from_f(f.value_or(spec.n), spec.n);
        const auto [trace, stats] =
            mbf::run_one(spec, start, make_budget(spec, limit, 1, seed), policy, seed);
        py::dict d;
        d["start_state"] = trace.start_state;
        d["events"] = trace.events;
        d["end_time"] = trace.end_time;
        d["flipped"] = stats.flipped;
        d["first_flip_time"] = stats.first_flip_time;
        d["occupancy"] = stats.occupancy;
        return d;
      },
      py::arg("spec"), py::arg("start"), py::arg("limit"), py::arg("seed"),
      py::arg("f") = std::nullopt, "Single run with the full event list.");

  m.def(
      "hitting_times",
      [](const mbf::ChainSpec& spec, int target) {
        return mbf::expected_hitting_time_exact(spec, target).f_values;
      },
      py::arg("spec"), py::arg("target"),
      "Exact expected first-passage times to `target` from every state.");

  m.def(
      "stationary",
      [](const mbf::ChainSpec& spec) { return mbf::stationary_distribution(spec).pi; },
      py::arg("spec"), "Stationary distribution over states 0..n.");

  m.def(
      "internal_regime",
      [](double p, double q) { return regime_name(mbf::internal_regime(p, q)); },
      py::arg("p"), py::arg("q"),
      "\"exponential-time\", \"log-time\" or \"indeterminate\".");

  m.def("gamblers_ruin", &mbf::gamblers_ruin_prob, py::arg("p"), py::arg("q"),
        py::arg("m"), py::arg("symmetric_limit") = false);
  m.def("lazy_scaling", &mbf::dtmc_lazy_scaling, py::arg("f_r0"), py::arg("r"));
  m.def("escape_time_lower_bound", &mbf::escape_time_lower_bound, py::arg("p"),
        py::arg("q"), py::arg("n"));
  m.def("drift_time_lower_bound", &mbf::drift_time_lower_bound, py::arg("p"),
        py::arg("n"));
  m.def("coordinated_f1", &mbf::coordinated_f1_closed_form, py::arg("p"),
        py::arg("q"), py::arg("n"));
  m.def("coordinated_f1_literal", &mbf::coordinated_f1_series_literal, py::arg("p"),
        py::arg("q"), py::arg("n"));

  m.def(
      "run_scenario",
      [](const std::string& scenario_json) {
        return mbf::closed_loop(mbf::LoopScenario::from_json(scenario_json)).to_json();
      },
      py::arg("scenario_json"),
      "Run the monitor/analyze/plan/deploy loop; scenario and report are JSON "
      "strings.");

#ifdef MBFSIM_VERSION
  m.attr("__version__") = MBFSIM_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
