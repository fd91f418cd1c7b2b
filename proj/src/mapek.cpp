#include "mbf/mapek.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mbf/analytics.hpp"

namespace mbf {

void Configuration::validate(int n) const {
  if (int(members.size()) != n)
    throw std::invalid_argument("Configuration: membership size must equal n");
  std::unordered_set<int> ids;
  for (const auto& m : members)
    if (!ids.insert(m.process_id).second)
      throw std::invalid_argument("Configuration: duplicate process id");
}

Configuration Configuration::uniform(int n, const std::string& tag, int id) {
  Configuration c;
  c.id = id;
  c.members.reserve(n);
  for (int i = 0; i < n; ++i) c.members.push_back({i, tag});
  return c;
}

Configuration define_new_configuration(const Configuration& current) {
  Configuration next = current;
  next.id = current.id + 1;
  return next;
}

// ---------------------------------------------------------------------------
// ManagedSystem

namespace {

// Rate shapes g, h with p_i = p * g(i) and q_i = q * h(i); used to turn CTMC
// event counts into rate estimates. Seed-driven exits from state 0 carry no
// q exposure and are not counted as infection events.
double down_shape(const ChainSpec& spec, int state) {
  switch (spec.variant) {
    case Variant::Dtmc:
    case Variant::CtmcExternal: return state > 0 ? 1.0 : 0.0;
    case Variant::CtmcInternal:
    case Variant::CtmcCoordinated: return double(state);
  }
  return 0.0;
}

double up_shape(const ChainSpec& spec, int state) {
  const int n = spec.n;
  switch (spec.variant) {
    case Variant::Dtmc:
    case Variant::CtmcExternal: return state < n ? 1.0 : 0.0;
    case Variant::CtmcInternal:
      return state > 0 ? double(state) * double(n - state) / n : 0.0;
    case Variant::CtmcCoordinated:
      return (state > 0 && state < n) ? double(state) : 0.0;
  }
  return 0.0;
}

}  // namespace

ManagedSystem::ManagedSystem(const ChainSpec& spec, Configuration config,
                             int start, std::uint64_t seed, int history_window)
    : spec_(spec), table_(transition_table(spec)), config_(std::move(config)),
      state_(start), rng_(seed), history_window_(history_window) {
  config_.validate(spec_.n);
  if (start < 0 || start > spec_.n)
    throw std::invalid_argument("ManagedSystem: start state outside [0, n]");
  if (history_window_ < 1)
    throw std::invalid_argument("ManagedSystem: history window must be >= 1");
  if (is_ctmc(spec_.variant)) schedule_ctmc_event();
}

void ManagedSystem::push_history(HistoryItem item) {
  history_.push_back(item);
  if (int(history_.size()) > history_window_) history_.pop_front();
}

int ManagedSystem::step_dtmc() {
  if (spec_.variant != Variant::Dtmc)
    throw std::logic_error("step_dtmc on a CTMC world");
  const StateTransitions& tr = table_[state_];
  const double u = rng_.next_uniform();
  int delta = 0;
  if (u < tr.down) delta = -1;
  else if (u < tr.down + tr.up) delta = +1;
  state_ += delta;
  clock_ += 1.0;
  record_outcome(delta);
  return state_;
}

void ManagedSystem::record_outcome(int delta) {
  push_history({delta, 1.0, 1.0});
}

void ManagedSystem::schedule_ctmc_event() {
  const StateTransitions& tr = table_[state_];
  const double total = tr.down + tr.up;
  if (total <= 0.0) {
    pending_event_time_.reset();
  } else {
    pending_event_time_ = segment_start_ + rng_.next_exponential(total);
  }
}

std::optional<double> ManagedSystem::next_ctmc_event_time() const {
  return pending_event_time_;
}

std::pair<double, int> ManagedSystem::apply_ctmc_event() {
  if (!pending_event_time_) throw std::logic_error("no pending CTMC event");
  const double te = *pending_event_time_;
  const StateTransitions& tr = table_[state_];
  const double total = tr.down + tr.up;
  const int delta = (rng_.next_uniform() < tr.down / total) ? -1 : +1;

  const double len = te - segment_start_;
  HistoryItem item;
  item.exposure_down = down_shape(spec_, state_) * len;
  item.exposure_up = up_shape(spec_, state_) * len;
  // A delta of +1 out of a state with zero up-shape is a seeding event.
  item.delta = (delta > 0 && item.exposure_up <= 0.0) ? 0 : delta;
  push_history(item);

  state_ += delta;
  clock_ = te;
  segment_start_ = te;
  schedule_ctmc_event();
  return {te, state_};
}

void ManagedSystem::advance_clock(double t) {
  if (t < clock_) throw std::logic_error("advance_clock going backwards");
  if (pending_event_time_ && *pending_event_time_ < t)
    throw std::logic_error("advance_clock past a pending event");
  clock_ = t;
}

void ManagedSystem::reset_to_clean(const Configuration& new_config) {
  new_config.validate(spec_.n);
  config_ = new_config;
  state_ = 0;
  segment_start_ = clock_;
  if (is_ctmc(spec_.variant)) schedule_ctmc_event();
}

ParamEstimate ManagedSystem::ground_truth_estimate() const {
  return {spec_.p, spec_.q, spec_.r};
}

std::optional<ParamEstimate> ManagedSystem::empirical_estimate() const {
  if (history_.empty()) return std::nullopt;
  if (spec_.variant == Variant::Dtmc) {
    double downs = 0, ups = 0, stays = 0;
    for (const auto& h : history_) {
      if (h.delta < 0) downs += 1;
      else if (h.delta > 0) ups += 1;
      else stays += 1;
    }
    const double total = double(history_.size());
    return ParamEstimate{downs / total, ups / total, stays / total};
  }
  double downs = 0, ups = 0, exp_down = 0, exp_up = 0;
  for (const auto& h : history_) {
    if (h.delta < 0) downs += 1;
    else if (h.delta > 0) ups += 1;
    exp_down += h.exposure_down;
    exp_up += h.exposure_up;
  }
  if (exp_down <= 0.0 || exp_up <= 0.0) return std::nullopt;
  return ParamEstimate{downs / exp_down, ups / exp_up, 0.0};
}

MonitorResult monitor_snapshot(const ManagedSystem& world, EstimatorKind estimator) {
  MonitorResult r;
  r.snapshot = Snapshot{world.config(), world.state(), world.now()};
  r.estimate = estimator == EstimatorKind::GroundTruth
                   ? std::optional<ParamEstimate>(world.ground_truth_estimate())
                   : world.empirical_estimate();
  return r;
}

// ---------------------------------------------------------------------------
// Analyze

namespace {

ChainSpec apply_estimate(const ChainSpec& tmpl, const ParamEstimate& est) {
  ChainSpec model = tmpl;
  model.p = est.p_hat;
  model.q = est.q_hat;
  model.r = est.r_hat;
  model.validate();
  return model;
}

// Largest t with P(tau_{target} <= t) <= epsilon, by iterating the one-step
// distribution with the target state absorbing. For the CTMCs the chain is
// uniformized at the top rate Lambda and t is reported in uniformized steps
// divided by Lambda (the expected time of that many steps); the Poisson
// spread around it is not resolved further.
SafeWindow quantile_hitting(const ChainSpec& model, int observed, int target,
                            double epsilon, long long max_steps) {
  const std::vector<StateTransitions> table = transition_table(model);
  std::vector<double> down(target + 1), up(target + 1);
  for (int i = 0; i < target; ++i) {
    down[i] = table[i].down;
    up[i] = table[i].up;
  }
  for (int i = observed; i < target; ++i)
    if (up[i] <= 0.0) return std::nullopt;  // can never cross

  double lambda = 1.0;  // DTMC steps are unit time
  if (is_ctmc(model.variant)) {
    lambda = 0.0;
    for (int i = 0; i < target; ++i) lambda = std::max(lambda, down[i] + up[i]);
    if (lambda <= 0.0) return std::nullopt;
  }

  // v[0..target-1] live states, v[target] absorbed mass.
  std::vector<double> v(target + 1, 0.0), w(target + 1, 0.0);
  v[observed] = 1.0;
  for (long long k = 1; k <= max_steps; ++k) {
    std::fill(w.begin(), w.end(), 0.0);
    w[target] = v[target];
    for (int i = 0; i < target; ++i) {
      const double mass = v[i];
      if (mass == 0.0) continue;
      const double pd = down[i] / lambda;
      const double pu = up[i] / lambda;
      if (i > 0) w[i - 1] += mass * pd;
      w[i + 1] += mass * pu;
      w[i] += mass * (1.0 - pd - pu);
    }
    v.swap(w);
    if (v[target] > epsilon) return double(k - 1) / lambda;
  }
  // Cap reached: report the capped window (an underestimate, which can only
  // schedule rejuvenation earlier than necessary).
  return double(max_steps) / lambda;
}

SafeWindow mean_hitting(const ChainSpec& model, int observed, int target) {
  const std::vector<StateTransitions> table = transition_table(model);
  std::vector<double> down(target + 1), up(target + 1);
  for (int i = 0; i <= target; ++i) {
    down[i] = table[i].down;
    up[i] = table[i].up;
  }
  // The walk cannot descend past the highest state at or below `observed`
  // with a zero down rate; solve on the block above that floor.
  int floor_state = observed;
  while (floor_state > 0 && down[floor_state] > 0.0) --floor_state;
  for (int i = floor_state; i < target; ++i)
    if (up[i] <= 0.0) return std::nullopt;  // trapped below: infinite mean

  std::vector<double> sub_down(down.begin() + floor_state, down.end());
  std::vector<double> sub_up(up.begin() + floor_state, up.end());
  sub_down[0] = 0.0;  // reflecting floor
  sub_up[sub_up.size() - 1] = 0.0;
  const auto f = hitting_times_from_rates(sub_down, sub_up, target - floor_state);
  return f[observed - floor_state];
}

}  // namespace

SafeWindow analyze(const ChainSpec& model, int observed_faulty,
                   const ThresholdPolicy& policy, const AnalyzeMethod& method) {
  model.validate();
  if (observed_faulty < 0 || observed_faulty > model.n)
    throw std::invalid_argument("analyze: observed_faulty outside [0, n]");
  if (observed_faulty > policy.f) return 0.0;  // already unsafe
  if (policy.f >= model.n) return std::nullopt;  // no state can exceed f

  const int target = policy.f + 1;
  if (method.kind == AnalyzeMethod::Kind::MeanHitting)
    return mean_hitting(model, observed_faulty, target);
  if (!(method.epsilon > 0.0 && method.epsilon < 1.0))
    throw std::invalid_argument("analyze: epsilon must lie in (0,1)");
  return quantile_hitting(model, observed_faulty, target, method.epsilon,
                          method.max_steps);
}

SafeWindow analyze(const ChainSpec& model_template, const Snapshot& snapshot,
                   const ParamEstimate& estimate, const ThresholdPolicy& policy,
                   const AnalyzeMethod& method) {
  return analyze(apply_estimate(model_template, estimate),
                 snapshot.observed_faulty, policy, method);
}

PlannerState plan(PlannerState planner, SafeWindow delta_safe) {
  if (!delta_safe) {
    planner.timer.reset();
    planner.last_delta_safe.reset();
    planner.last_was_never = true;
    return planner;
  }
  if (*delta_safe < 0) throw std::invalid_argument("plan: delta_safe must be >= 0");
  planner.last_was_never = false;
  planner.last_delta_safe = *delta_safe;
  planner.timer = planner.delta_reconfig < *delta_safe
                      ? *delta_safe - planner.delta_reconfig
                      : 0.0;
  return planner;
}

void deploy(ManagedSystem& world, const Configuration& new_config) {
  world.reset_to_clean(new_config);
}

// ---------------------------------------------------------------------------
// Scenario / report serialization

namespace {

std::string estimator_name(EstimatorKind e) {
  return e == EstimatorKind::GroundTruth ? "ground-truth" : "empirical";
}

EstimatorKind estimator_from_name(const std::string& s) {
  if (s == "ground-truth") return EstimatorKind::GroundTruth;
  if (s == "empirical") return EstimatorKind::Empirical;
  throw std::invalid_argument("unknown estimator: \"" + s + "\"");
}

std::string method_name(AnalyzeMethod::Kind k) {
  return k == AnalyzeMethod::Kind::MeanHitting ? "mean-hitting" : "quantile-hitting";
}

AnalyzeMethod::Kind method_from_name(const std::string& s) {
  if (s == "mean-hitting") return AnalyzeMethod::Kind::MeanHitting;
  if (s == "quantile-hitting") return AnalyzeMethod::Kind::QuantileHitting;
  throw std::invalid_argument("unknown analyze method: \"" + s + "\"");
}

std::string replan_name(ReplanMode m) {
  return m == ReplanMode::EverySnapshot ? "every-snapshot" : "once-per-interval";
}

ReplanMode replan_from_name(const std::string& s) {
  if (s == "every-snapshot") return ReplanMode::EverySnapshot;
  if (s == "once-per-interval") return ReplanMode::OncePerInterval;
  throw std::invalid_argument("unknown replan mode: \"" + s + "\"");
}

bool is_integral(double v) { return v == std::floor(v); }

}  // namespace

void LoopScenario::validate() const {
  spec.validate();
  if (policy.f < 0 || policy.f > spec.n)
    throw std::invalid_argument("scenario: f outside [0, n]");
  if (start < 0 || start > spec.n)
    throw std::invalid_argument("scenario: start outside [0, n]");
  if (!(horizon > 0)) throw std::invalid_argument("scenario: horizon must be > 0");
  if (!(monitor_period > 0))
    throw std::invalid_argument("scenario: monitor period must be > 0");
  if (delta_reconfig < 0)
    throw std::invalid_argument("scenario: delta_reconfig must be >= 0");
  if (empirical_window < 1)
    throw std::invalid_argument("scenario: empirical window must be >= 1");
  if (spec.variant == Variant::Dtmc &&
      (!is_integral(monitor_period) || !is_integral(delta_reconfig) ||
       !is_integral(horizon)))
    throw std::invalid_argument(
        "scenario: DTMC loops need integral horizon, period and delta");
}

std::string LoopScenario::to_json() const {
  nlohmann::json j;
  j["spec"] = nlohmann::json::parse(spec.to_json());
  j["policy"] = {{"f", policy.f}};
  j["start"] = start;
  j["estimator"] = estimator_name(estimator);
  j["method"] = method_name(method.kind);
  j["epsilon"] = method.epsilon;
  j["delta_reconfig"] = delta_reconfig;
  j["monitor_period"] = monitor_period;
  j["horizon"] = horizon;
  j["seed"] = seed;
  j["replan"] = replan_name(replan);
  j["empirical_window"] = empirical_window;
  j["security_tag"] = security_tag;
  return j.dump();
}

LoopScenario LoopScenario::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  LoopScenario sc;
  sc.spec = ChainSpec::from_json(j.at("spec").dump());
  const auto& pol = j.at("policy");
  if (pol.contains("f")) sc.policy = ThresholdPolicy::from_f(pol["f"].get<int>(), sc.spec.n);
  else if (pol.contains("fraction"))
    sc.policy = ThresholdPolicy::from_fraction(pol["fraction"].get<double>(), sc.spec.n);
  else throw std::invalid_argument("scenario: policy needs f or fraction");
  sc.start = j.value("start", 0);
  sc.estimator = estimator_from_name(j.value("estimator", std::string("ground-truth")));
  sc.method.kind = method_from_name(j.value("method", std::string("quantile-hitting")));
  sc.method.epsilon = j.value("epsilon", 0.01);
  sc.delta_reconfig = j.value("delta_reconfig", 0.0);
  sc.monitor_period = j.value("monitor_period", 1.0);
  sc.horizon = j.at("horizon").get<double>();
  sc.seed = j.at("seed").get<std::uint64_t>();
  sc.replan = replan_from_name(j.value("replan", std::string("every-snapshot")));
  sc.empirical_window = j.value("empirical_window", 1000);
  sc.security_tag = j.value("security_tag", std::string("baseline"));
  sc.validate();
  return sc;
}

std::string LoopReport::to_json() const {
  nlohmann::json j;
  j["horizon"] = horizon;
  j["n_reconfigurations"] = n_reconfigurations;
  j["total_unsafe_time"] = total_unsafe_time;
  j["unsafe_fraction"] = unsafe_fraction;
  j["n_completed_intervals"] = n_completed_intervals;
  j["n_crossed_before_trigger"] = n_crossed_before_trigger;
  if (n_completed_intervals > 0)
    j["crossing_frequency"] = double(n_crossed_before_trigger) / n_completed_intervals;
  else
    j["crossing_frequency"] = nullptr;
  j["n_immediate_triggers"] = n_immediate_triggers;
  j["thrashing"] = thrashing;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& iv : intervals) {
    nlohmann::json e;
    e["start"] = iv.start;
    if (iv.first_crossing) e["first_crossing"] = *iv.first_crossing;
    else e["first_crossing"] = nullptr;
    if (iv.trigger_time) e["trigger_time"] = *iv.trigger_time;
    else e["trigger_time"] = nullptr;
    e["immediate"] = iv.immediate;
    arr.push_back(e);
  }
  j["intervals"] = arr;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Closed loop

namespace {

// Shared controller bookkeeping for both loop drivers.
struct LoopDriver {
  const LoopScenario& sc;
  ManagedSystem world;
  PlannerState planner;
  LoopReport report;

  enum class Ctl { Idle, Armed, Deploying } ctl = Ctl::Idle;
  double timer_expiry = 0.0;
  double deploy_done = 0.0;
  IntervalRecord current;

  explicit LoopDriver(const LoopScenario& scenario)
      : sc(scenario),
        world(scenario.spec,
              Configuration::uniform(scenario.spec.n, scenario.security_tag),
              scenario.start, scenario.seed, scenario.empirical_window) {
    planner.delta_reconfig = scenario.delta_reconfig;
    current.start = 0.0;
  }

  void note_state(int state, double t) {
    if (state > sc.policy.f && !current.first_crossing)
      current.first_crossing = t - current.start;
  }

  void start_deploy(double t, bool immediate) {
    current.trigger_time = t - current.start;
    current.immediate = immediate;
    if (immediate) ++report.n_immediate_triggers;
    planner.timer.reset();  // never two overlapping deployments
    ctl = Ctl::Deploying;
    deploy_done = t + sc.delta_reconfig;
    if (sc.delta_reconfig == 0.0) finish_deploy(t);
  }

  void finish_deploy(double t) {
    deploy(world, define_new_configuration(world.config()));
    ++report.n_reconfigurations;
    close_interval(t);
    ctl = Ctl::Idle;
  }

  void close_interval(double t) {
    report.intervals.push_back(current);
    current = IntervalRecord{};
    current.start = t;
  }

  void do_monitor() {
    if (ctl == Ctl::Deploying) return;
    if (sc.replan == ReplanMode::OncePerInterval && ctl == Ctl::Armed) return;
    const MonitorResult mr = monitor_snapshot(world, sc.estimator);
    if (!mr.estimate) return;  // insufficient data: try again next period
    const SafeWindow ds = analyze(sc.spec, mr.snapshot, *mr.estimate, sc.policy,
                                  sc.method);
    planner = plan(planner, ds);
    if (!planner.timer) {
      ctl = Ctl::Idle;
      return;
    }
    if (*planner.timer <= 0.0) {
      start_deploy(world.now(), /*immediate=*/true);
    } else {
      ctl = Ctl::Armed;
      timer_expiry = world.now() + *planner.timer;
    }
  }

  void finalize(double horizon) {
    report.horizon = horizon;
    report.unsafe_fraction = report.total_unsafe_time / horizon;
    report.intervals.push_back(current);
    int triggered = 0, crossed = 0, immediate = 0;
    for (const auto& iv : report.intervals) {
      if (!iv.trigger_time) continue;
      ++triggered;
      if (iv.immediate) ++immediate;
      if (iv.first_crossing && *iv.first_crossing <= *iv.trigger_time) ++crossed;
    }
    report.n_completed_intervals = triggered;
    report.n_crossed_before_trigger = crossed;
    report.thrashing =
        report.n_reconfigurations >= 2 && triggered >= 2 && immediate == triggered;
  }
};

LoopReport closed_loop_dtmc(const LoopScenario& sc) {
  LoopDriver drv(sc);
  const long long horizon = llround(sc.horizon);
  const long long period = llround(sc.monitor_period);

  drv.do_monitor();  // t = 0
  long long unsafe_steps = 0;
  for (long long t = 1; t <= horizon; ++t) {
    if (drv.world.state() > sc.policy.f) ++unsafe_steps;  // state over [t-1, t)
    const int s = drv.world.step_dtmc();
    const double now = double(t);
    drv.note_state(s, now);
    if (drv.ctl == LoopDriver::Ctl::Deploying && now >= drv.deploy_done) {
      drv.finish_deploy(now);
    } else if (drv.ctl == LoopDriver::Ctl::Armed && now >= drv.timer_expiry) {
      drv.start_deploy(now, /*immediate=*/false);
    }
    if (t % period == 0) drv.do_monitor();
  }
  drv.report.total_unsafe_time = double(unsafe_steps);
  drv.finalize(double(horizon));
  return drv.report;
}

LoopReport closed_loop_ctmc(const LoopScenario& sc) {
  LoopDriver drv(sc);
  const double horizon = sc.horizon;
  double next_monitor = 0.0;
  double acct_time = 0.0;  // unsafe-time integration frontier

  auto integrate_unsafe = [&](double to) {
    if (drv.world.state() > sc.policy.f)
      drv.report.total_unsafe_time += to - acct_time;
    acct_time = to;
  };

  while (true) {
    // Next event: chain transition, deployment completion, timer expiry,
    // monitor tick. Ties resolve in that order.
    enum { kChain, kDeploy, kTimer, kMonitor, kNone } kind = kNone;
    double when = horizon;
    const auto chain_t = drv.world.next_ctmc_event_time();
    if (chain_t && *chain_t <= when) { when = *chain_t; kind = kChain; }
    if (drv.ctl == LoopDriver::Ctl::Deploying && drv.deploy_done <= when &&
        (kind == kNone || drv.deploy_done < when)) {
      when = drv.deploy_done;
      kind = kDeploy;
    }
    if (drv.ctl == LoopDriver::Ctl::Armed && drv.timer_expiry <= when &&
        (kind == kNone || drv.timer_expiry < when)) {
      when = drv.timer_expiry;
      kind = kTimer;
    }
    if (next_monitor <= when && (kind == kNone || next_monitor < when)) {
      when = next_monitor;
      kind = kMonitor;
    }
    if (kind == kNone || when > horizon) break;

    integrate_unsafe(when);
    switch (kind) {
      case kChain: {
        const auto [te, s] = drv.world.apply_ctmc_event();
        drv.note_state(s, te);
        break;
      }
      case kDeploy:
        drv.world.advance_clock(when);
        drv.finish_deploy(when);
        break;
      case kTimer:
        drv.world.advance_clock(when);
        drv.start_deploy(when, /*immediate=*/false);
        break;
      case kMonitor:
        drv.world.advance_clock(when);
        drv.do_monitor();
        next_monitor += sc.monitor_period;
        break;
      case kNone: break;
    }
  }
  integrate_unsafe(horizon);
  drv.finalize(horizon);
  return drv.report;
}

}  // namespace

LoopReport closed_loop(const LoopScenario& scenario) {
  scenario.validate();
  return scenario.spec.variant == Variant::Dtmc ? closed_loop_dtmc(scenario)
                                                : closed_loop_ctmc(scenario);
}

}  // namespace mbf
