#pragma once

// Seed-swept experiment drivers: subset-sum convergence, rare faults, the
// unrolled double-fault query and scenario tracking. Each returns typed
// results; run_experiment wraps them as CSV plus a JSON summary.

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "clg/benchmarks.hpp"
#include "clg/dbn.hpp"
#include "clg/inference.hpp"

namespace clg {

/// Calls f(i) for i in [0, n) on up to `threads` workers; rethrows the first
/// failure after all workers stop.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

/// 1, 2, 4, ... below `max`, then `max`.
inline std::vector<std::size_t> doubling(std::size_t max) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k < max; k *= 2) out.push_back(k);
  out.push_back(max);
  return out;
}

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = first + i;
  return s;
}

struct CurvePoint {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  double estimate = 0.0;
};

namespace exp_detail {

inline Query subset_query(const SubsetSumInstance& in) {
  Query q;
  q.q_discrete = {"B"};
  q.evidence.continuous["Y"] = static_cast<double>(in.L);
  return q;
}

/// Per-seed anytime estimates of P(B=1) at the given checkpoints.
template <class Run>
std::vector<CurvePoint> curve(const std::string& alg, std::uint64_t seed, const std::vector<std::size_t>& marks, Run&& run) {
  std::vector<CurvePoint> pts;
  std::size_t next = 0;
  InferenceOptions opt;
  opt.weighting = Weighting::counts;
  opt.progress = [&](std::size_t n, const HypothesisAccumulator& acc) {
    if (next < marks.size() && n == marks[next]) pts.push_back({alg, seed, n, acc.probability(1)}), ++next;
  };
  run(opt);
  return pts;
}

}  // namespace exp_detail

// ---------------------------------------------------------------- convergence

struct ConvergenceSetup {
  SubsetSumInstance instance;
  std::size_t enum_max = 1024;  // per value of B
  std::size_t samples = 16384;
  std::vector<std::uint64_t> seeds = seed_range(0, 100);
  unsigned threads = 1;
};

struct ConvergenceSeed {
  std::uint64_t seed = 0;
  std::size_t lw_first_correct = 0;  // index of the first valid B=1 sample; 0 = never
  std::size_t lw_first_close = 0;    // first checkpoint within 0.05 of exact; 0 = never
  std::size_t lw_settled = 0;        // checkpoint from which every later one stays within 0.05
  std::size_t gibbs_first_close = 0;
  std::size_t gibbs_settled = 0;
};

struct ConvergenceResult {
  SubsetSumInstance instance;
  double exact = 0.0;
  std::vector<CurvePoint> curve;  // enum rows first, then per seed lw and gibbs
  double enum_final = 0.0;
  std::vector<ConvergenceSeed> seeds;
};

/// Valid instance with n items drawn from `seed` (the first one that has a
/// subset summing to L).
inline SubsetSumInstance valid_instance(std::uint64_t seed, int n, long long max_s, double C) {
  std::mt19937_64 rng(seed);
  for (;;) {
    auto in = random_instance(rng, n, max_s, C);
    if (has_subset_sum(in.s, in.L)) return in;
  }
}

inline ConvergenceResult run_convergence(const ConvergenceSetup& su) {
  su.instance.check();
  ConvergenceResult r;
  r.instance = su.instance;
  Model m(gen_theorem1(su.instance));
  const Query q = exp_detail::subset_query(su.instance);
  const int B = m.id("B");
  std::vector<int> A;
  for (const auto& a : indexed("A", 1, su.instance.n())) A.push_back(m.id(a));
  r.exact = answer_exact(PreparedQuery(m, q)).probability({"1"});

  InferenceOptions per_q;
  per_q.per_q = true;
  PreparedQuery pq_enum(m, q, per_q);
  for (std::size_t k : doubling(su.enum_max)) {
    double p = answer_enum(pq_enum, k, per_q).probability({"1"});
    r.curve.push_back({"enum", 0, k, p});
    r.enum_final = p;
  }

  const auto marks = doubling(su.samples);
  std::vector<std::vector<CurvePoint>> rows(su.seeds.size());
  r.seeds.resize(su.seeds.size());
  parallel_for(su.seeds.size(), su.threads, [&](std::size_t i) {
    const auto seed = su.seeds[i];
    PreparedQuery pq(m, q);
    auto lw = exp_detail::curve("lw", seed, marks, [&](const InferenceOptions& o) {
      std::mt19937_64 rng(seed);
      answer_lw(pq, su.samples, rng, o);
    });
    auto gibbs = exp_detail::curve("gibbs", seed, marks, [&](const InferenceOptions& o) {
      std::mt19937_64 rng(seed);
      answer_gibbs(pq, su.samples, rng, o);
    });
    ConvergenceSeed cs;
    cs.seed = seed;
    // Likelihood weighting draws one prior sample per step, so replaying the
    // generator recovers the sampled hypotheses.
    std::mt19937_64 replay(seed);
    for (std::size_t n = 1; n <= su.samples && !cs.lw_first_correct; ++n) {
      auto d = pq.sample(replay);
      if (d[B] != 1) continue;
      std::vector<int> a;
      for (int v : A) a.push_back(d[v]);
      if (subset_sum(su.instance.s, a) == su.instance.L) cs.lw_first_correct = n;
    }
    auto scan = [&](const std::vector<CurvePoint>& pts, std::size_t& first, std::size_t& settled) {
      for (const auto& p : pts) {
        const bool close = std::abs(p.estimate - r.exact) <= 0.05;
        if (close && !first) first = p.samples;
        if (close && !settled) settled = p.samples;
        if (!close) settled = 0;
      }
    };
    scan(lw, cs.lw_first_close, cs.lw_settled);
    scan(gibbs, cs.gibbs_first_close, cs.gibbs_settled);
    rows[i] = std::move(lw);
    rows[i].insert(rows[i].end(), gibbs.begin(), gibbs.end());
    r.seeds[i] = cs;
  });
  for (auto& v : rows) r.curve.insert(r.curve.end(), v.begin(), v.end());
  return r;
}

// ---------------------------------------------------------------- rare faults

struct RareFaultSetup {
  SubsetSumInstance instance;
  std::map<std::string, double> extra;  // additional continuous evidence
  std::size_t enum_k = 100;                              // per value of B
  std::size_t samples = 50000;
  std::vector<std::uint64_t> seeds = seed_range(0, 100);
  unsigned threads = 1;
};

struct RareFaultResult {
  double exact = 0.0;
  double enumeration = 0.0;
  std::vector<double> lw, gibbs;  // final estimate per seed
};

/// Items 1, 2, 4, ..., 2^(n-1) with prior 0.999 on state 0 and L the sum of
/// items i and j (1-based), so the only valid subset is {i, j}.
inline SubsetSumInstance rare_fault_instance(int n = 10, int i = 3, int j = 8, double C = 1e7) {
  if (i < 1 || j < 1 || i > n || j > n || i == j) throw InputError("rare fault instance: need distinct items in 1..n");
  SubsetSumInstance in;
  for (int k = 0; k < n; ++k) in.s.push_back(1LL << k);
  in.L = in.s[i - 1] + in.s[j - 1];
  in.C = C;
  in.prior_zero = 0.999;
  return in;
}

inline RareFaultResult run_rare_fault(const RareFaultSetup& su) {
  su.instance.check();
  Model m(gen_theorem1(su.instance));
  Query q = exp_detail::subset_query(su.instance);
  for (const auto& [k, v] : su.extra) q.evidence.continuous[k] = v;
  RareFaultResult r;
  r.exact = answer_exact(PreparedQuery(m, q)).probability({"1"});
  InferenceOptions per_q;
  per_q.per_q = true;
  r.enumeration = answer_enum(PreparedQuery(m, q, per_q), su.enum_k, per_q).probability({"1"});
  r.lw.resize(su.seeds.size());
  r.gibbs.resize(su.seeds.size());
  InferenceOptions counts;
  counts.weighting = Weighting::counts;
  parallel_for(su.seeds.size(), su.threads, [&](std::size_t i) {
    PreparedQuery pq(m, q, counts);
    std::mt19937_64 a(su.seeds[i]), b(su.seeds[i]);
    r.lw[i] = answer_lw(pq, su.samples, a, counts).probability({"1"});
    r.gibbs[i] = answer_gibbs(pq, su.samples, b, counts).probability({"1"});
  });
  return r;
}

// ---------------------------------------------------------------- unrolled double fault

/// Number of joint discrete-interface trajectories over T slices with at
/// most `max_faults` mode changes (leaving the first state counts as one).
/// Only trajectories of positive prior probability are counted; every
/// discrete variable must be an interface variable depending on its own
/// previous value only.
inline std::size_t fault_hypothesis_count(const TwoSliceNet& tbn, int T, int max_faults) {
  check_two_slice(tbn);
  std::set<std::string> iface(tbn.interface.begin(), tbn.interface.end());
  std::vector<std::size_t> poly{1};
  for (const auto& n : tbn.net.nodes) {
    auto [base, t] = split_slice(n.name);
    if (n.kind != NodeKind::discrete || t != 1) continue;
    if (!iface.count(base)) throw UnsupportedStructureError("fault count: '" + base + "' is not an interface variable");
    const Node* next = tbn.net.find(slice_name(base, 2));
    if (!n.parents.empty() || next->parents != std::vector<std::string>{n.name})
      throw UnsupportedStructureError("fault count: '" + base + "' must depend only on its previous value");
    const std::size_t card = n.states.size();
    // ways[s][f]: trajectories ending in s with f changes.
    std::vector<std::vector<std::size_t>> ways(card, std::vector<std::size_t>(max_faults + 1, 0));
    for (std::size_t s = 0; s < card; ++s)
      if (n.cpt[0][s] > 0 && (s != 0 ? 1 : 0) <= max_faults) ways[s][s != 0 ? 1 : 0] = 1;
    for (int step = 2; step <= T; ++step) {
      std::vector<std::vector<std::size_t>> nw(card, std::vector<std::size_t>(max_faults + 1, 0));
      for (std::size_t a = 0; a < card; ++a)
        for (std::size_t b = 0; b < card; ++b) {
          if (!(next->cpt[a][b] > 0)) continue;
          const int add = a != b ? 1 : 0;
          for (int f = 0; f + add <= max_faults; ++f) nw[b][f + add] += ways[a][f];
        }
      ways = std::move(nw);
    }
    std::vector<std::size_t> mine(max_faults + 1, 0);
    for (const auto& row : ways)
      for (int f = 0; f <= max_faults; ++f) mine[f] += row[f];
    std::vector<std::size_t> prod(max_faults + 1, 0);
    for (std::size_t a = 0; a < poly.size(); ++a)
      for (std::size_t b = 0; a + b <= static_cast<std::size_t>(max_faults); ++b) prod[a + b] += poly[a] * mine[b];
    poly = std::move(prod);
  }
  std::size_t total = 0;
  for (auto c : poly) total += c;
  return total;
}

struct DoubleFaultSetup {
  TankParams tanks;
  int slices = 3;
  std::vector<ScenarioEvent> faults{{2, "Pipe12", "burst"}, {2, "Pipe34", "burst"}};
  std::uint64_t data_seed = 7;
  std::size_t samples = 200000;
  std::vector<std::uint64_t> seeds = seed_range(0, 20);
  unsigned threads = 1;

  DoubleFaultSetup() { tanks.burst_prior = tanks.drift_prior = tanks.sensor_prior = 1e-4; }
};

struct DoubleFaultSeed {
  std::uint64_t seed = 0;
  std::vector<std::string> lw_top, gibbs_top;
  double lw_truth = 0.0, gibbs_truth = 0.0;  // probability of the true pair
};

struct DoubleFaultResult {
  std::size_t K = 0;
  std::vector<std::string> query, truth;
  std::vector<std::string> enum_top;
  double enum_truth = 0.0;
  std::size_t enum_generated = 0;
  std::vector<DoubleFaultSeed> seeds;
};

inline std::vector<std::string> top_assignment(const QueryResult& r) {
  const QueryEntry* best = &r.entries.front();
  for (const auto& e : r.entries)
    if (e.probability > best->probability) best = &e;
  return best->assignment;
}

/// Unrolled network and evidence for the double-fault query.
inline std::pair<Network, Query> double_fault_problem(const DoubleFaultSetup& su) {
  auto tbn = gen_tanks(su.tanks);
  DbnTracker tr(tbn);
  Scenario sc;
  sc.horizon = su.slices;
  sc.events = su.faults;
  std::mt19937_64 rng(su.data_seed);
  auto traj = simulate(tr, sc, rng);
  Query q;
  for (const auto& f : su.faults) q.q_discrete.push_back(slice_name(f.component, su.slices));
  for (int t = 1; t <= su.slices; ++t) {
    for (const auto& [b, v] : traj.observations[t - 1].continuous) q.evidence.continuous[slice_name(b, t)] = v;
    for (const auto& [b, v] : traj.observations[t - 1].discrete) q.evidence.discrete[slice_name(b, t)] = v;
  }
  return {unroll(tbn, su.slices), q};
}

inline DoubleFaultResult run_double_fault(const DoubleFaultSetup& su) {
  DoubleFaultResult r;
  auto [net, q] = double_fault_problem(su);
  Model m(net);
  r.query = q.q_discrete;
  for (const auto& f : su.faults) r.truth.push_back(f.mode);
  r.K = fault_hypothesis_count(gen_tanks(su.tanks), su.slices, static_cast<int>(su.faults.size()));
  PreparedQuery pq(m, q);
  auto en = answer_enum(pq, r.K);
  r.enum_top = top_assignment(en);
  r.enum_truth = en.probability(r.truth);
  r.enum_generated = en.diagnostics.generated;
  InferenceOptions counts;
  counts.weighting = Weighting::counts;
  r.seeds.resize(su.seeds.size());
  parallel_for(su.seeds.size(), su.threads, [&](std::size_t i) {
    PreparedQuery p(m, q, counts);
    std::mt19937_64 a(su.seeds[i]), b(su.seeds[i]);
    DoubleFaultSeed s;
    s.seed = su.seeds[i];
    auto lw = answer_lw(p, su.samples, a, counts);
    auto gb = answer_gibbs(p, su.samples, b, counts);
    s.lw_top = top_assignment(lw);
    s.gibbs_top = top_assignment(gb);
    s.lw_truth = lw.probability(r.truth);
    s.gibbs_truth = gb.probability(r.truth);
    r.seeds[i] = s;
  });
  return r;
}

// ---------------------------------------------------------------- scenario tracking

inline Scenario tank_scenario() {
  Scenario s;
  s.horizon = 30;
  s.events = {{5, "Pipe23", "drift"},  {10, "Sensor23", "failed"}, {10, "Sensor5o", "failed"},
              {13, "Pipe23", "burst"}, {17, "Pipe45", "drift"},    {23, "Pipe45", "burst"},
              {25, "Pipe12", "burst"}};
  return s;
}

struct TrackingSetup {
  TankParams tanks;
  Scenario scenario = tank_scenario();
  TrackOptions options;
  std::vector<std::uint64_t> seeds = seed_range(0, 20);
  std::vector<std::string> vars{"C12", "C45", "P5"};
  int window = 3;
  unsigned threads = 1;
};

struct TrackingSeed {
  std::uint64_t seed = 0;
  Trajectory truth;
  TrackRun run;
  std::vector<GaussianDist> kf;
  std::vector<int> detected;  // per event: first matching step, 0 = missed
  std::vector<double> rmse_track, rmse_kf;
  bool all_detected() const {
    return std::all_of(detected.begin(), detected.end(), [](int d) { return d > 0; });
  }
};

struct TrackingResult {
  std::vector<TrackingSeed> seeds;
};

inline TrackingResult run_scenario_tracking(const TrackingSetup& su) {
  DbnTracker tr(gen_tanks(su.tanks));
  su.scenario.check(tr);
  TrackingResult r;
  r.seeds.resize(su.seeds.size());
  parallel_for(su.seeds.size(), su.threads, [&](std::size_t i) {
    TrackingSeed s;
    s.seed = su.seeds[i];
    std::mt19937_64 rng(s.seed);
    s.truth = simulate(tr, su.scenario, rng);
    TrackOptions opt = su.options;
    opt.seed = s.seed;
    opt.threads = 1;
    s.run = run_tracking(tr, s.truth.observations, opt);
    s.kf = omniscient_kf(tr, s.truth);
    for (const auto& e : su.scenario.events) {
      int hit = 0;
      for (const auto& st : s.run.steps) {
        if (st.step < e.t || st.step > e.t + su.window) continue;
        bool same = true;
        for (std::size_t k = 0; k < tr.discrete_interface().size(); ++k)
          same = same && st.top_labels[k] == s.truth.discrete[st.step - 1].at(tr.discrete_interface()[k]);
        if (same) {
          hit = st.step;
          break;
        }
      }
      s.detected.push_back(hit);
    }
    std::vector<GaussianDist> est;
    for (const auto& st : s.run.steps) est.push_back(st.moments);
    for (const auto& v : su.vars) {
      s.rmse_track.push_back(s.run.lost ? std::numeric_limits<double>::infinity() : rmse(est, s.truth, v));
      s.rmse_kf.push_back(rmse(s.kf, s.truth, v));
    }
    r.seeds[i] = std::move(s);
  });
  return r;
}

/// Truth modes rendered like BeliefState::mode_string.
inline std::string mode_string(const DbnTracker& tr, const std::map<std::string, std::string>& modes) {
  std::string s;
  for (std::size_t i = 0; i < tr.discrete_interface().size(); ++i) {
    const auto& v = tr.discrete_interface()[i];
    const auto& st = modes.at(v);
    if (st != tr.labels()[i].front()) s += (s.empty() ? "" : ";") + v + "=" + st;
  }
  return s.empty() ? "nominal" : s;
}

// ---------------------------------------------------------------- configs and reports

inline const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"fig2a", "rarefault", "x5evidence", "fig2b", "track5"};
  return ids;
}

struct ExperimentConfig {
  std::string id;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::size_t> budgets;
  json params = json::object();
  std::string out;
  unsigned threads = 1;

  std::size_t budget(const std::string& key) const {
    auto it = budgets.find(key);
    if (it == budgets.end()) throw InputError("experiment '" + id + "': missing budget '" + key + "'");
    return it->second;
  }
  void check() const {
    const auto& ids = experiment_ids();
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) throw InputError("unknown experiment '" + id + "'");
    if (seeds.empty()) throw InputError("experiment '" + id + "': the seed list is empty");
    for (const auto& [k, v] : budgets)
      if (v < 1) throw InputError("experiment '" + id + "': budget '" + k + "' must be at least 1");
  }
};

inline ExperimentConfig default_experiment(const std::string& id) {
  ExperimentConfig c;
  c.id = id;
  if (id == "fig2a") {
    c.seeds = seed_range(0, 100);
    c.budgets = {{"enum", 1024}, {"samples", 16384}};
    c.params = {{"instance_seed", 1}, {"n", 10}, {"max_s", 20}, {"C", 2.0}};
  } else if (id == "rarefault" || id == "x5evidence") {
    c.seeds = seed_range(0, 100);
    c.budgets = {{"enum", 100}, {"samples", 50000}};
    c.params = {{"n", 10}, {"i", 3}, {"j", 8}, {"C", 1e7}};
    if (id == "x5evidence") c.params["observe"] = {{"X5", 4.0}};
  } else if (id == "fig2b") {
    DoubleFaultSetup d;
    c.seeds = d.seeds;
    c.budgets = {{"samples", d.samples}};
    json faults = json::array();
    for (const auto& f : d.faults) faults.push_back({{"t", f.t}, {"component", f.component}, {"mode", f.mode}});
    c.params = {{"tanks", tank_params_to_json(d.tanks)}, {"slices", d.slices}, {"data_seed", d.data_seed}, {"faults", faults}};
  } else if (id == "track5") {
    TrackingSetup t;
    c.seeds = t.seeds;
    c.budgets = {{"budget", t.options.budget}, {"hypotheses", t.options.hypotheses}};
    c.params = {{"tanks", tank_params_to_json(t.tanks)},
                {"scenario", scenario_to_json(t.scenario)},
                {"method", "enum"},
                {"window", t.window},
                {"vars", t.vars}};
  } else {
    throw InputError("unknown experiment '" + id + "' (expected fig2a, rarefault, x5evidence, fig2b or track5)");
  }
  return c;
}

/// Reads {"experiment", "seeds", "budgets", "params", "out", "threads"} on
/// top of the defaults of the named experiment. Seeds are a list or
/// {"first", "count"}; params are merged key by key.
inline ExperimentConfig experiment_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("experiment config: expected an object");
  auto c = default_experiment(io_detail::string(io_detail::field(doc, "experiment", "experiment config"), "experiment config.experiment"));
  if (doc.contains("seeds")) {
    const auto& s = doc["seeds"];
    if (s.is_array()) {
      c.seeds.clear();
      for (const auto& v : s) {
        if (!v.is_number_unsigned()) throw ParseError("experiment config.seeds: expected nonnegative integers");
        c.seeds.push_back(v.get<std::uint64_t>());
      }
    } else if (s.is_object()) {
      const auto& first = io_detail::field(s, "first", "experiment config.seeds");
      const auto& count = io_detail::field(s, "count", "experiment config.seeds");
      if (!first.is_number_unsigned() || !count.is_number_unsigned())
        throw ParseError("experiment config.seeds: first and count must be nonnegative integers");
      c.seeds = seed_range(first.get<std::uint64_t>(), count.get<std::size_t>());
    } else {
      throw ParseError("experiment config.seeds: expected a list or {\"first\", \"count\"}");
    }
  }
  if (doc.contains("budgets")) {
    const auto& b = doc["budgets"];
    if (!b.is_object()) throw ParseError("experiment config.budgets: expected an object");
    for (const auto& [k, v] : b.items()) {
      if (!v.is_number_integer()) throw ParseError("experiment config.budgets." + k + ": expected an integer");
      if (v.get<long long>() < 1) throw InputError("experiment '" + c.id + "': budget '" + k + "' must be at least 1");
      c.budgets[k] = v.get<std::size_t>();
    }
  }
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) throw ParseError("experiment config.params: expected an object");
    for (const auto& [k, v] : doc["params"].items()) c.params[k] = v;
  }
  if (doc.contains("out")) c.out = io_detail::string(doc["out"], "experiment config.out");
  if (doc.contains("threads")) {
    if (!doc["threads"].is_number_unsigned()) throw ParseError("experiment config.threads: expected a nonnegative integer");
    c.threads = doc["threads"].get<unsigned>();
  }
  c.check();
  return c;
}

inline json experiment_to_json(const ExperimentConfig& c) {
  json j{{"experiment", c.id}, {"seeds", c.seeds}, {"budgets", c.budgets}, {"params", c.params}, {"threads", c.threads}};
  if (!c.out.empty()) j["out"] = c.out;
  return j;
}

struct ExperimentReport {
  std::string id;
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
  json summary;

  std::string csv() const {
    std::string s;
    for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
    s += "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) s += ",";
        const auto& v = row[i];
        if (v.is_string())
          s += v.get<std::string>();
        else if (v.is_number_float())
          s += format_real(v.get<double>());
        else
          s += v.dump();
      }
      s += "\n";
    }
    return s;
  }
  json to_json() const {
    json rs = json::array();
    for (const auto& row : rows) {
      json o = json::object();
      for (std::size_t i = 0; i < columns.size(); ++i) o[columns[i]] = row[i];
      rs.push_back(o);
    }
    return json{{"experiment", id}, {"summary", summary}, {"rows", rs}};
  }
};

namespace exp_detail {

inline long long int_param(const json& p, const char* key) {
  const auto& v = io_detail::field(p, key, "experiment params");
  if (!v.is_number_integer()) throw ParseError(std::string("experiment params.") + key + ": expected an integer");
  return v.get<long long>();
}

inline double real_param(const json& p, const char* key) {
  return io_detail::number(io_detail::field(p, key, "experiment params"), std::string("experiment params.") + key);
}

inline std::string join(const std::vector<std::string>& names, const std::vector<std::string>& labels) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) s += (i ? ";" : "") + names[i] + "=" + labels[i];
  return s;
}

inline std::size_t count_if_seed(const std::vector<double>& v, bool (*pred)(double)) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), pred));
}

}  // namespace exp_detail

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  using namespace exp_detail;
  cfg.check();
  const json& p = cfg.params;
  ExperimentReport rep;
  rep.id = cfg.id;

  if (cfg.id == "fig2a") {
    ConvergenceSetup su;
    su.instance = p.contains("instance")
                      ? instance_from_json(p["instance"])
                      : valid_instance(static_cast<std::uint64_t>(int_param(p, "instance_seed")), static_cast<int>(int_param(p, "n")),
                                       int_param(p, "max_s"), real_param(p, "C"));
    su.enum_max = cfg.budget("enum");
    su.samples = cfg.budget("samples");
    su.seeds = cfg.seeds;
    su.threads = cfg.threads;
    auto r = run_convergence(su);
    rep.columns = {"algorithm", "seed", "samples", "estimate"};
    rep.rows.push_back({"exact", 0, 0, r.exact});
    for (const auto& c : r.curve) rep.rows.push_back({c.algorithm, c.seed, c.samples, c.estimate});
    std::size_t found = 0, settled = 0, settled_after = 0;
    json per_seed = json::array();
    for (const auto& s : r.seeds) {
      found += s.lw_first_correct > 0;
      settled += s.lw_settled > 0;
      settled_after += s.lw_settled > 0 && s.lw_first_correct > 0 && s.lw_settled >= s.lw_first_correct;
      per_seed.push_back({{"seed", s.seed},
                          {"lw_first_correct", s.lw_first_correct},
                          {"lw_first_close", s.lw_first_close},
                          {"lw_settled", s.lw_settled},
                          {"gibbs_first_close", s.gibbs_first_close},
                          {"gibbs_settled", s.gibbs_settled}});
    }
    rep.summary = {{"instance", instance_to_json(r.instance)},
                   {"exact", r.exact},
                   {"enum_final", r.enum_final},
                   {"enum_budget_per_value", su.enum_max},
                   {"seeds", r.seeds.size()},
                   {"lw_sampled_correct", found},
                   {"lw_settled", settled},
                   {"lw_settled_after_correct", settled_after},
                   {"per_seed", per_seed}};
  } else if (cfg.id == "rarefault" || cfg.id == "x5evidence") {
    RareFaultSetup su;
    su.instance = p.contains("instance") ? instance_from_json(p["instance"])
                                         : rare_fault_instance(static_cast<int>(int_param(p, "n")), static_cast<int>(int_param(p, "i")),
                                                               static_cast<int>(int_param(p, "j")), real_param(p, "C"));
    if (p.contains("observe")) {
      if (!p["observe"].is_object()) throw ParseError("experiment params.observe: expected an object");
      for (const auto& [k, v] : p["observe"].items()) su.extra[k] = io_detail::number(v, "experiment params.observe." + k);
    }
    su.enum_k = cfg.budget("enum");
    su.samples = cfg.budget("samples");
    su.seeds = cfg.seeds;
    su.threads = cfg.threads;
    auto r = run_rare_fault(su);
    rep.columns = {"algorithm", "seed", "samples", "estimate"};
    rep.rows.push_back({"exact", 0, 0, r.exact});
    rep.rows.push_back({"enum", 0, su.enum_k, r.enumeration});
    for (std::size_t i = 0; i < su.seeds.size(); ++i) rep.rows.push_back({"lw", su.seeds[i], su.samples, r.lw[i]});
    for (std::size_t i = 0; i < su.seeds.size(); ++i) rep.rows.push_back({"gibbs", su.seeds[i], su.samples, r.gibbs[i]});
    auto below = [](double x) { return x < 0.01; };
    auto positive = [](double x) { return x > 0.0; };
    rep.summary = {{"instance", instance_to_json(su.instance)},
                   {"observe", su.extra},
                   {"exact", r.exact},
                   {"enum", r.enumeration},
                   {"seeds", su.seeds.size()},
                   {"lw_below_0.01", count_if_seed(r.lw, below)},
                   {"gibbs_below_0.01", count_if_seed(r.gibbs, below)},
                   {"gibbs_positive", count_if_seed(r.gibbs, positive)}};
  } else if (cfg.id == "fig2b") {
    DoubleFaultSetup su;
    if (p.contains("tanks")) su.tanks = tank_params_from_json(p["tanks"]);
    su.slices = static_cast<int>(int_param(p, "slices"));
    su.data_seed = static_cast<std::uint64_t>(int_param(p, "data_seed"));
    if (p.contains("faults")) {
      json sc{{"horizon", su.slices}, {"events", p["faults"]}};
      su.faults = scenario_from_json(sc).events;
    }
    su.samples = cfg.budget("samples");
    su.seeds = cfg.seeds;
    su.threads = cfg.threads;
    auto r = run_double_fault(su);
    rep.columns = {"algorithm", "seed", "samples", "top_mode", "true_pair_probability"};
    rep.rows.push_back({"enum", 0, r.K, join(r.query, r.enum_top), r.enum_truth});
    std::size_t lw_hit = 0, gibbs_hit = 0;
    for (const auto& s : r.seeds) {
      rep.rows.push_back({"lw", s.seed, su.samples, join(r.query, s.lw_top), s.lw_truth});
      lw_hit += s.lw_top == r.truth;
    }
    for (const auto& s : r.seeds) {
      rep.rows.push_back({"gibbs", s.seed, su.samples, join(r.query, s.gibbs_top), s.gibbs_truth});
      gibbs_hit += s.gibbs_top == r.truth;
    }
    rep.summary = {{"hypotheses_with_at_most_two_faults", r.K},
                   {"truth", join(r.query, r.truth)},
                   {"enum_top", join(r.query, r.enum_top)},
                   {"enum_identifies_pair", r.enum_top == r.truth},
                   {"enum_true_pair_probability", r.enum_truth},
                   {"seeds", r.seeds.size()},
                   {"lw_identifies_pair", lw_hit},
                   {"gibbs_identifies_pair", gibbs_hit}};
  } else {
    TrackingSetup su;
    if (p.contains("tanks")) su.tanks = tank_params_from_json(p["tanks"]);
    if (p.contains("scenario")) su.scenario = scenario_from_json(p["scenario"]);
    if (p.contains("method")) su.options.method = algorithm_from_string(io_detail::string(p["method"], "experiment params.method"));
    if (p.contains("window")) su.window = static_cast<int>(int_param(p, "window"));
    if (p.contains("vars")) su.vars = io_detail::strings(p["vars"], "experiment params.vars");
    su.options.budget = cfg.budget("budget");
    su.options.hypotheses = cfg.budget("hypotheses");
    su.seeds = cfg.seeds;
    su.threads = cfg.threads;
    auto r = run_scenario_tracking(su);
    DbnTracker tr(gen_tanks(su.tanks));
    rep.columns = {"seed", "step", "true_mode", "top_mode", "top_probability", "discarded", "cumulative_discarded"};
    for (const auto& v : su.vars)
      for (const char* c : {"true_", "mean_", "var_", "kf_mean_", "kf_var_"}) rep.columns.push_back(c + v);
    std::size_t detected = 0, rmse_ok = 0, both = 0, lost = 0;
    json per_seed = json::array();
    for (const auto& s : r.seeds) {
      for (const auto& st : s.run.steps) {
        std::vector<json> row{s.seed, st.step, mode_string(tr, s.truth.discrete[st.step - 1]), st.top_mode, st.top_probability,
                              st.discarded, st.total_discarded};
        const auto& kf = s.kf[st.step - 1];
        for (const auto& v : su.vars) {
          int i = st.moments.index_of(v), k = kf.index_of(v);
          if (i < 0 || k < 0) throw InputError("'" + v + "' is not a continuous interface variable");
          row.insert(row.end(), {s.truth.continuous[st.step - 1].at(v), st.moments.mean(i), st.moments.cov(i, i), kf.mean(k), kf.cov(k, k)});
        }
        rep.rows.push_back(std::move(row));
      }
      bool ok = true;
      for (std::size_t k = 0; k < su.vars.size(); ++k) ok = ok && s.rmse_track[k] <= 3 * s.rmse_kf[k];
      detected += s.all_detected();
      rmse_ok += ok;
      both += ok && s.all_detected();
      lost += s.run.lost.has_value();
      json rm = json::object();
      for (std::size_t k = 0; k < su.vars.size(); ++k) rm[su.vars[k]] = {{"tracking", s.rmse_track[k]}, {"omniscient", s.rmse_kf[k]}};
      json js{{"seed", s.seed}, {"detected_at", s.detected}, {"rmse", rm}};
      if (s.run.lost) js["lost_at"] = s.run.lost_step;
      per_seed.push_back(js);
    }
    rep.summary = {{"seeds", r.seeds.size()},
                   {"all_events_detected", detected},
                   {"rmse_within_3x", rmse_ok},
                   {"both", both},
                   {"lost", lost},
                   {"per_seed", per_seed}};
  }
  return rep;
}

}  // namespace clg
