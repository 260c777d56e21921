#pragma once

// Belief-state tracking over two-slice networks, trajectory simulation and
// the omniscient Kalman filter baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "clg/gaussian.hpp"
#include "clg/inference.hpp"
#include "clg/io.hpp"
#include "clg/model.hpp"
#include "clg/two_slice.hpp"

namespace clg {

struct TrackOptions {
  Algorithm method = Algorithm::enumeration;
  std::size_t budget = 32;          // belief entries kept; 0 = unlimited
  std::size_t hypotheses = 24;      // per component: K for enum, samples/steps for lw/gibbs
  std::size_t max_components = 1;   // Gaussians per entry; 0 = unlimited
  std::vector<std::vector<std::string>> partition;  // factored belief groups; at most one supported
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

struct BeliefComponent {
  double weight = 0.0;
  Vec mean;
  Mat cov;
};

struct BeliefEntry {
  std::vector<int> modes;  // aligned with BeliefState::discrete
  double weight = 0.0;
  std::vector<BeliefComponent> components;  // weights sum to `weight`
};

struct BeliefState {
  std::vector<std::string> discrete, continuous;  // interface base names
  std::vector<std::vector<std::string>> labels;   // states per discrete variable
  std::vector<BeliefEntry> entries;               // weight-descending
  double discarded = 0.0;        // mass pruned by the step that produced this state
  double total_discarded = 0.0;  // 1 - prod(1 - discarded) over all steps
  std::size_t budget = 0;

  double total_weight() const {
    double s = 0;
    for (const auto& e : entries) s += e.weight;
    return s;
  }
  std::size_t num_components() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.components.size();
    return n;
  }
  const BeliefEntry& top() const {
    if (entries.empty()) throw EmptyMixtureError("belief state is empty");
    return entries.front();
  }
  std::vector<std::string> mode_labels(const BeliefEntry& e) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < discrete.size(); ++i) out.push_back(labels[i][e.modes[i]]);
    return out;
  }
  /// Non-default modes as "var=state" joined by ';', or "nominal".
  std::string mode_string(const BeliefEntry& e) const {
    std::string s;
    for (std::size_t i = 0; i < discrete.size(); ++i)
      if (e.modes[i] != 0) s += (s.empty() ? "" : ";") + discrete[i] + "=" + labels[i][e.modes[i]];
    return s.empty() ? "nominal" : s;
  }
  double marginal(const std::string& var, const std::string& state) const {
    auto it = std::find(discrete.begin(), discrete.end(), var);
    if (it == discrete.end()) throw InputError("'" + var + "' is not a discrete interface variable");
    std::size_t i = static_cast<std::size_t>(it - discrete.begin());
    double p = 0;
    for (const auto& e : entries)
      if (labels[i][e.modes[i]] == state) p += e.weight;
    return p;
  }
  /// Moment-matched Gaussian of one entry.
  GaussianDist entry_gaussian(const BeliefEntry& e) const {
    MomentAccumulator acc;
    for (const auto& c : e.components) acc.add(std::log(c.weight), c.mean, c.cov);
    if (acc.empty()) throw EmptyMixtureError("belief entry has no weight");
    return GaussianDist{continuous, acc.mean(), acc.cov()};
  }
  /// Moment-matched Gaussian over the whole belief.
  GaussianDist moments() const {
    MomentAccumulator acc;
    for (const auto& e : entries)
      for (const auto& c : e.components) acc.add(std::log(c.weight), c.mean, c.cov);
    if (acc.empty()) throw EmptyMixtureError("belief state is empty");
    return GaussianDist{continuous, acc.mean(), acc.cov()};
  }
};

namespace dbn_detail {

/// Sequential linear-Gaussian factorization of N(mu, S): node j regresses
/// on nodes 0..j-1.
inline std::vector<Node> gaussian_chain(const std::vector<std::string>& names, const Vec& mu, const Mat& S) {
  std::vector<Node> out;
  if (names.empty()) return out;
  auto llt = gauss_detail::robust_cholesky(S, names);
  Mat L = llt.matrixL();
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    std::vector<std::string> ps(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(j));
    std::vector<double> co(j);
    double icpt = mu(jj);
    if (j > 0) {
      Vec row = L.block(jj, 0, 1, jj).transpose();
      Vec b = L.topLeftCorner(jj, jj).transpose().triangularView<Eigen::Upper>().solve(row);
      for (std::size_t i = 0; i < j; ++i) {
        co[i] = b(static_cast<Eigen::Index>(i));
        icpt -= co[i] * mu(static_cast<Eigen::Index>(i));
      }
    }
    out.push_back(Node::make_continuous(names[j], {}, ps, {ClgEntry{{}, icpt, co, L(jj, jj) * L(jj, jj)}}));
  }
  return out;
}

struct Piece {
  std::vector<int> modes;
  double log_w;
  Vec mean;
  Mat cov;
};

}  // namespace dbn_detail

/// A two-slice network compiled for filtering.
class DbnTracker {
 public:
  explicit DbnTracker(TwoSliceNet tbn) : tbn_(std::move(tbn)) {
    check_two_slice(tbn_);
    slice1_ = unroll(tbn_, 1);
    std::set<std::string> iface(tbn_.interface.begin(), tbn_.interface.end());
    for (const auto& n : tbn_.net.nodes) {
      auto [b, t] = split_slice(n.name);
      if (t == 2) {
        slice2_.push_back(n);
        (n.kind == NodeKind::discrete ? all_discrete_ : all_continuous_).push_back(b);
      }
      if (t != 1 || !iface.count(b)) continue;
      if (n.kind == NodeKind::discrete) {
        discrete_.push_back(b);
        labels_.push_back(n.states);
      } else {
        continuous_.push_back(b);
      }
    }
    observed_ = observed_vars(tbn_);
  }

  const TwoSliceNet& net() const { return tbn_; }
  const std::vector<std::string>& discrete_interface() const { return discrete_; }
  const std::vector<std::string>& continuous_interface() const { return continuous_; }
  const std::vector<std::vector<std::string>>& labels() const { return labels_; }
  const std::vector<std::string>& observed() const { return observed_; }
  const std::vector<std::string>& slice_discrete() const { return all_discrete_; }
  const std::vector<std::string>& slice_continuous() const { return all_continuous_; }
  const std::vector<Node>& slice2_nodes() const { return slice2_; }
  const Network& slice1() const { return slice1_; }

  /// Belief after the first slice's observations.
  BeliefState initial(const Evidence& obs, const TrackOptions& opt) const {
    check_options(opt);
    auto pieces = infer_piece(slice1_, 1, {}, 0.0, obs, opt, 0, 0);
    return assemble(std::move(pieces), opt, 1, 0.0);
  }

  /// One filtering step: every component of every entry is run through the
  /// slice-2 fragment with its Gaussian as the continuous prior and its modes
  /// as slice-1 evidence; results are merged per new mode assignment and
  /// pruned to the budget.
  BeliefState propagate(const BeliefState& b, const Evidence& obs, const TrackOptions& opt, int step) const {
    check_options(opt);
    struct Job {
      const BeliefEntry* e;
      const BeliefComponent* c;
    };
    std::vector<Job> jobs;
    for (const auto& e : b.entries)
      for (const auto& c : e.components)
        if (c.weight > 0) jobs.push_back({&e, &c});
    std::vector<std::vector<dbn_detail::Piece>> out(jobs.size());
    std::vector<std::exception_ptr> errs(jobs.size());
    auto work = [&](std::size_t i) {
      try {
        out[i] = infer_piece(step_network(*jobs[i].e, *jobs[i].c), 2, jobs[i].e->modes, std::log(jobs[i].c->weight), obs, opt, step, i);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    };
    const unsigned nt = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(jobs.size())));
    if (nt <= 1) {
      for (std::size_t i = 0; i < jobs.size(); ++i) work(i);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < nt; ++t)
        pool.emplace_back([&, t] {
          for (std::size_t i = t; i < jobs.size(); i += nt) work(i);
        });
      for (auto& th : pool) th.join();
    }
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
    std::vector<dbn_detail::Piece> all;
    for (auto& v : out)
      for (auto& p : v) all.push_back(std::move(p));
    return assemble(std::move(all), opt, step, b.total_discarded);
  }

 private:
  void check_options(const TrackOptions& opt) const {
    if (opt.partition.size() > 1)
      throw UnsupportedStructureError("factored belief states are not supported; give at most one partition group");
    if (opt.method != Algorithm::exact && opt.hypotheses < 1)
      throw InputError("tracking: hypotheses per component must be at least 1");
  }

  Network step_network(const BeliefEntry& e, const BeliefComponent& c) const {
    Network net;
    for (std::size_t i = 0; i < discrete_.size(); ++i) {
      std::vector<double> row(labels_[i].size(), 0.0);
      row[e.modes[i]] = 1.0;
      net.nodes.push_back(Node::make_discrete(slice_name(discrete_[i], 1), labels_[i], {}, {row}));
    }
    std::vector<std::string> names;
    for (const auto& b : continuous_) names.push_back(slice_name(b, 1));
    for (auto& n : dbn_detail::gaussian_chain(names, c.mean, c.cov)) net.nodes.push_back(std::move(n));
    for (const auto& n : slice2_) net.nodes.push_back(n);
    return net;
  }

  /// Runs the chosen algorithm on a step network and returns weighted
  /// pieces keyed by the new interface modes. An inconsistent component
  /// contributes nothing.
  std::vector<dbn_detail::Piece> infer_piece(const Network& net, int slice, const std::vector<int>& prev_modes,
                                             double log_w, const Evidence& obs,
                                             const TrackOptions& opt, int step, std::size_t index) const {
    Model m(net);
    Query q;
    std::vector<int> fixed(discrete_.size(), -1);
    for (const auto& [name, v] : obs.continuous) q.evidence.continuous[slice_name(name, slice)] = v;
    for (const auto& [name, v] : obs.discrete) {
      q.evidence.discrete[slice_name(name, slice)] = v;
      auto it = std::find(discrete_.begin(), discrete_.end(), name);
      if (it != discrete_.end()) {
        std::size_t i = static_cast<std::size_t>(it - discrete_.begin());
        auto s = std::find(labels_[i].begin(), labels_[i].end(), v);
        if (s == labels_[i].end()) throw InputError("unknown state '" + v + "' of '" + name + "'");
        fixed[i] = static_cast<int>(s - labels_[i].begin());
      }
    }
    if (slice == 2)
      for (std::size_t i = 0; i < discrete_.size(); ++i)
        q.evidence.discrete[slice_name(discrete_[i], 1)] = labels_[i][prev_modes[i]];
    std::vector<std::size_t> free_idx;
    for (std::size_t i = 0; i < discrete_.size(); ++i)
      if (fixed[i] < 0) {
        q.q_discrete.push_back(slice_name(discrete_[i], slice));
        free_idx.push_back(i);
      }
    for (const auto& b : continuous_) q.q_continuous.push_back(slice_name(b, slice));

    InferenceOptions io;
    io.keep_mixture = opt.max_components != 1;
    std::vector<dbn_detail::Piece> out;
    QueryResult r;
    double log_d = 0.0;
    try {
      PreparedQuery pq(m, q, io);
      log_d = pq.tree().log_z;
      std::seed_seq ss{opt.seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(index)};
      std::mt19937_64 rng(ss);
      switch (opt.method) {
        case Algorithm::exact: r = answer_exact(pq, io); break;
        case Algorithm::enumeration: r = answer_enum(pq, opt.hypotheses, io); break;
        case Algorithm::lw: r = answer_lw(pq, opt.hypotheses, rng, io); break;
        case Algorithm::gibbs: r = answer_gibbs(pq, opt.hypotheses, rng, io); break;
      }
    } catch (const ImpossibleEvidenceError&) {
      return out;
    } catch (const DegenerateResultError&) {
      return out;
    } catch (const InitializationError&) {
      return out;
    }
    const double base = log_w + log_d + r.diagnostics.log_evidence;
    for (const auto& e : r.entries) {
      if (!(e.probability > 0)) continue;
      std::vector<int> modes = fixed;
      for (std::size_t k = 0; k < free_idx.size(); ++k) modes[free_idx[k]] = e.states[k];
      if (io.keep_mixture && !e.mixture.empty()) {
        for (const auto& c : e.mixture.components)
          out.push_back({modes, base + c.log_weight, c.dist.mean, c.dist.cov});
      } else if (e.collapsed) {
        out.push_back({modes, base + std::log(e.probability), e.collapsed->mean, e.collapsed->cov});
      } else {
        out.push_back({modes, base + std::log(e.probability), Vec(), Mat()});
      }
    }
    return out;
  }

  BeliefState assemble(std::vector<dbn_detail::Piece> pieces, const TrackOptions& opt, int step,
                       double prev_discarded) const {
    BeliefState b;
    b.discrete = discrete_;
    b.continuous = continuous_;
    b.labels = labels_;
    b.budget = opt.budget;
    std::vector<double> lw;
    for (const auto& p : pieces) lw.push_back(p.log_w);
    const double total = lw.empty() ? kNegInf : log_sum_exp(lw);
    if (!(total > kNegInf) || !std::isfinite(total))
      throw TrackingLostError("tracking lost at step " + std::to_string(step) +
                                  ": every hypothesis is inconsistent with the observations",
                              step);
    std::map<std::vector<int>, std::vector<const dbn_detail::Piece*>> groups;
    for (const auto& p : pieces)
      if (p.log_w > kNegInf) groups[p.modes].push_back(&p);
    for (auto& [modes, ps] : groups) {
      BeliefEntry e;
      e.modes = modes;
      std::sort(ps.begin(), ps.end(), [](auto* a, auto* c) { return a->log_w > c->log_w; });
      const std::size_t keep = opt.max_components == 0 ? ps.size() : std::min(ps.size(), opt.max_components);
      const std::size_t exact = keep == ps.size() ? keep : keep - 1;
      for (std::size_t i = 0; i < exact; ++i) e.components.push_back({std::exp(ps[i]->log_w - total), ps[i]->mean, ps[i]->cov});
      if (exact < ps.size()) {
        MomentAccumulator acc;
        for (std::size_t j = exact; j < ps.size(); ++j) acc.add(ps[j]->log_w - total, ps[j]->mean, ps[j]->cov);
        e.components.push_back({std::exp(acc.log_total()), acc.mean(), acc.cov()});
      }
      for (const auto& c : e.components) e.weight += c.weight;
      b.entries.push_back(std::move(e));
    }
    std::stable_sort(b.entries.begin(), b.entries.end(),
                     [](const BeliefEntry& a, const BeliefEntry& c) { return a.weight > c.weight; });
    double dropped = 0.0;
    if (opt.budget > 0 && b.entries.size() > opt.budget) {
      for (std::size_t i = opt.budget; i < b.entries.size(); ++i) dropped += b.entries[i].weight;
      b.entries.resize(opt.budget);
    }
    const double kept = b.total_weight();
    for (auto& e : b.entries) {
      e.weight /= kept;
      for (auto& c : e.components) c.weight /= kept;
    }
    b.discarded = dropped;
    b.total_discarded = 1.0 - (1.0 - prev_discarded) * (1.0 - dropped);
    return b;
  }

  TwoSliceNet tbn_;
  Network slice1_;
  std::vector<Node> slice2_;
  std::vector<std::string> discrete_, continuous_, observed_, all_discrete_, all_continuous_;
  std::vector<std::vector<std::string>> labels_;
};

inline BeliefState propagate(const DbnTracker& tr, const BeliefState& b, const Evidence& obs, const TrackOptions& opt,
                             int step) {
  return tr.propagate(b, obs, opt, step);
}

// ---------------------------------------------------------------- scenarios

struct ScenarioEvent {
  int t = 1;
  std::string component;
  std::string mode;
  bool operator==(const ScenarioEvent&) const = default;
};

struct Scenario {
  int horizon = 1;
  std::vector<ScenarioEvent> events;
  std::optional<std::uint64_t> seed;

  void check(const DbnTracker& tr) const {
    if (horizon < 1) throw InputError("scenario: horizon must be at least 1");
    const auto& d = tr.discrete_interface();
    for (const auto& e : events) {
      if (e.t < 1 || e.t > horizon) throw InputError("scenario: event time " + std::to_string(e.t) + " outside horizon");
      auto it = std::find(d.begin(), d.end(), e.component);
      if (it == d.end()) throw InputError("scenario: '" + e.component + "' is not a discrete interface variable");
      const auto& lab = tr.labels()[static_cast<std::size_t>(it - d.begin())];
      if (std::find(lab.begin(), lab.end(), e.mode) == lab.end())
        throw InputError("scenario: '" + e.mode + "' is not a state of '" + e.component + "'");
    }
  }
};

inline Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("scenario: expected an object");
  Scenario s;
  const auto& h = io_detail::field(j, "horizon", "scenario");
  if (!h.is_number_integer()) throw ParseError("scenario.horizon: expected an integer");
  s.horizon = h.get<int>();
  if (j.contains("events")) {
    const auto& ev = j["events"];
    if (!ev.is_array()) throw ParseError("scenario.events: expected an array");
    for (std::size_t i = 0; i < ev.size(); ++i) {
      std::string where = "scenario.events[" + std::to_string(i) + "]";
      ScenarioEvent e;
      const auto& t = io_detail::field(ev[i], "t", where);
      if (!t.is_number_integer()) throw ParseError(where + ".t: expected an integer");
      e.t = t.get<int>();
      e.component = io_detail::string(io_detail::field(ev[i], "component", where), where + ".component");
      e.mode = io_detail::string(io_detail::field(ev[i], "mode", where), where + ".mode");
      s.events.push_back(e);
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ParseError("scenario.seed: expected a nonnegative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  return s;
}

inline json scenario_to_json(const Scenario& s) {
  json ev = json::array();
  for (const auto& e : s.events) ev.push_back({{"t", e.t}, {"component", e.component}, {"mode", e.mode}});
  json j{{"horizon", s.horizon}, {"events", ev}};
  if (s.seed) j["seed"] = *s.seed;
  return j;
}

/// Ground truth per step (base names) and the observations drawn from it.
struct Trajectory {
  std::vector<std::map<std::string, std::string>> discrete;
  std::vector<std::map<std::string, double>> continuous;
  std::vector<Evidence> observations;

  int horizon() const { return static_cast<int>(discrete.size()); }
};

namespace dbn_detail {

inline std::size_t cpt_row(const Node& n, const std::map<std::string, std::string>& dv, const Network& net) {
  std::size_t row = 0;
  for (const auto& p : n.parents) {
    const auto& st = net.find(p)->states;
    auto it = std::find(st.begin(), st.end(), dv.at(p));
    row = row * st.size() + static_cast<std::size_t>(it - st.begin());
  }
  return row;
}

inline const ClgEntry& clg_entry(const Node& n, const std::map<std::string, std::string>& dv) {
  std::vector<std::string> a;
  for (const auto& p : n.discrete_parents) a.push_back(dv.at(p));
  for (const auto& e : n.clg)
    if (e.assignment == a) return e;
  throw StructuralError("no CPD entry of '" + n.name + "' for the sampled parent states");
}

}  // namespace dbn_detail

/// Ancestral sampling per slice. Discrete interface variables follow the
/// scenario: first state at t = 1, changed only by events, otherwise held.
template <class Rng>
Trajectory simulate(const DbnTracker& tr, const Scenario& sc, Rng& rng) {
  sc.check(tr);
  const auto& net = tr.net().net;
  std::vector<const Node*> order[2];
  for (const auto& name : topological_order(net)) {
    const Node* n = net.find(name);
    order[split_slice(name).second - 1].push_back(n);
  }
  std::set<std::string> iface_d(tr.discrete_interface().begin(), tr.discrete_interface().end());
  const auto& obs = tr.observed();
  Trajectory out;
  std::map<std::string, std::string> prev_d;
  std::map<std::string, double> prev_c;
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 1; t <= sc.horizon; ++t) {
    const int s = t == 1 ? 1 : 2;
    std::map<std::string, std::string> dv;
    std::map<std::string, double> cv;
    for (const auto& [b, v] : prev_d) dv[slice_name(b, 1)] = v;
    for (const auto& [b, v] : prev_c) cv[slice_name(b, 1)] = v;
    std::map<std::string, std::string> forced;
    for (const auto& e : sc.events)
      if (e.t == t) forced[e.component] = e.mode;
    for (const Node* n : order[s - 1]) {
      const std::string base = split_slice(n->name).first;
      if (n->kind == NodeKind::discrete) {
        if (iface_d.count(base)) {
          auto f = forced.find(base);
          dv[n->name] = f != forced.end() ? f->second : (t == 1 ? n->states.front() : prev_d.at(base));
          continue;
        }
        const auto& row = n->cpt[dbn_detail::cpt_row(*n, dv, net)];
        double r = u(rng), acc = 0.0;
        std::size_t k = 0;
        for (; k + 1 < row.size(); ++k) {
          acc += row[k];
          if (r < acc) break;
        }
        dv[n->name] = n->states[k];
      } else {
        const auto& e = dbn_detail::clg_entry(*n, dv);
        double mean = e.intercept;
        for (std::size_t i = 0; i < e.coeffs.size(); ++i) mean += e.coeffs[i] * cv.at(n->continuous_parents[i]);
        cv[n->name] = mean + std::sqrt(e.variance) * z(rng);
      }
    }
    prev_d.clear();
    prev_c.clear();
    Evidence ev;
    for (const Node* n : order[s - 1]) {
      const std::string base = split_slice(n->name).first;
      if (n->kind == NodeKind::discrete)
        prev_d[base] = dv.at(n->name);
      else
        prev_c[base] = cv.at(n->name);
    }
    for (const auto& b : obs) {
      if (prev_c.count(b))
        ev.continuous[b] = prev_c[b];
      else if (prev_d.count(b))
        ev.discrete[b] = prev_d[b];
    }
    out.discrete.push_back(prev_d);
    out.continuous.push_back(prev_c);
    out.observations.push_back(ev);
  }
  return out;
}

// ---------------------------------------------------------------- runs

struct TrackStep {
  int step = 0;
  GaussianDist moments;  // over the continuous interface
  std::string top_mode;
  std::vector<std::string> top_labels;
  double top_probability = 0.0;
  double discarded = 0.0;
  double total_discarded = 0.0;
  std::size_t entries = 0;
};

struct TrackRun {
  std::vector<TrackStep> steps;
  std::optional<std::string> lost;  // message when tracking was lost
  int lost_step = 0;
  BeliefState final_belief;
};

inline TrackStep summarize(const BeliefState& b, int step) {
  TrackStep s;
  s.step = step;
  s.moments = b.moments();
  s.top_mode = b.mode_string(b.top());
  s.top_labels = b.mode_labels(b.top());
  s.top_probability = b.top().weight;
  s.discarded = b.discarded;
  s.total_discarded = b.total_discarded;
  s.entries = b.entries.size();
  return s;
}

/// Filters through every observation; stops at the first lost step and keeps
/// the steps completed so far.
inline TrackRun run_tracking(const DbnTracker& tr, const std::vector<Evidence>& obs, const TrackOptions& opt) {
  TrackRun run;
  try {
    for (std::size_t t = 0; t < obs.size(); ++t) {
      const int step = static_cast<int>(t) + 1;
      run.final_belief = t == 0 ? tr.initial(obs[0], opt) : tr.propagate(run.final_belief, obs[t], opt, step);
      run.steps.push_back(summarize(run.final_belief, step));
    }
  } catch (const TrackingLostError& e) {
    run.lost = e.what();
    run.lost_step = e.step();
  }
  return run;
}

/// Single-Gaussian filter with every discrete variable clamped to the truth.
/// With `lost_step` given, a truth the model deems impossible ends the run
/// early and records the step instead of throwing.
inline std::vector<GaussianDist> omniscient_kf(const DbnTracker& tr, const Trajectory& truth, int* lost_step = nullptr) {
  TrackOptions opt;
  opt.method = Algorithm::exact;
  opt.budget = 1;
  opt.max_components = 1;
  std::vector<GaussianDist> out;
  BeliefState b;
  for (int t = 1; t <= truth.horizon(); ++t) {
    Evidence ev = truth.observations[t - 1];
    for (const auto& [name, v] : truth.discrete[t - 1]) ev.discrete[name] = v;
    try {
      b = t == 1 ? tr.initial(ev, opt) : tr.propagate(b, ev, opt, t);
    } catch (const TrackingLostError& e) {
      if (!lost_step) throw;
      *lost_step = e.step();
      break;
    }
    out.push_back(b.moments());
  }
  return out;
}

// ---------------------------------------------------------------- CSV

inline std::string tracking_csv(const TrackRun& run, const Trajectory& truth, const std::vector<std::string>& vars) {
  std::string s = "step";
  for (const auto& v : vars) s += ",true_" + v + ",mean_" + v + ",var_" + v;
  s += ",top_mode,top_probability,discarded,cumulative_discarded\n";
  for (const auto& st : run.steps) {
    s += std::to_string(st.step);
    for (const auto& v : vars) {
      int i = st.moments.index_of(v);
      if (i < 0) throw InputError("'" + v + "' is not a continuous interface variable");
      s += "," + format_real(truth.continuous.at(st.step - 1).at(v)) + "," + format_real(st.moments.mean(i)) + "," +
           format_real(st.moments.cov(i, i));
    }
    s += "," + st.top_mode + "," + format_real(st.top_probability) + "," + format_real(st.discarded) + "," +
         format_real(st.total_discarded) + "\n";
  }
  return s;
}

inline std::string kf_csv(const std::vector<GaussianDist>& kf, const Trajectory& truth,
                          const std::vector<std::string>& vars) {
  std::string s = "step";
  for (const auto& v : vars) s += ",true_" + v + ",mean_" + v + ",var_" + v;
  s += "\n";
  for (std::size_t t = 0; t < kf.size(); ++t) {
    s += std::to_string(t + 1);
    for (const auto& v : vars) {
      int i = kf[t].index_of(v);
      if (i < 0) throw InputError("'" + v + "' is not a continuous interface variable");
      s += "," + format_real(truth.continuous.at(t).at(v)) + "," + format_real(kf[t].mean(i)) + "," +
           format_real(kf[t].cov(i, i));
    }
    s += "\n";
  }
  return s;
}

/// Root-mean-square error of per-step means of `var` against the truth.
inline double rmse(const std::vector<GaussianDist>& est, const Trajectory& truth, const std::string& var) {
  double s = 0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    double d = est[t].mean(est[t].index_of(var)) - truth.continuous.at(t).at(var);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(est.size()));
}

}  // namespace clg
