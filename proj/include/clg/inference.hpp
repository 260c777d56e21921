#pragma once

// Hybrid queries P(Q_disc, Q_cont | d, x) answered by summing over
// hypotheses: exact enumeration, prior-order K-best enumeration, likelihood
// weighted sampling and Gibbs sampling over the relevant discrete variables.

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "clg/discrete.hpp"
#include "clg/gaussian.hpp"
#include "clg/io.hpp"
#include "clg/model.hpp"

namespace clg {

struct Query {
  std::vector<std::string> q_discrete;
  std::vector<std::string> q_continuous;
  Evidence evidence;
};

enum class Weighting { likelihood, counts };
enum class Algorithm { exact, enumeration, lw, gibbs };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::exact: return "exact";
    case Algorithm::enumeration: return "enum";
    case Algorithm::lw: return "lw";
    case Algorithm::gibbs: return "gibbs";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "exact") return Algorithm::exact;
  if (s == "enum") return Algorithm::enumeration;
  if (s == "lw") return Algorithm::lw;
  if (s == "gibbs") return Algorithm::gibbs;
  throw InputError("unknown algorithm '" + s + "' (expected exact, enum, lw or gibbs)");
}

class HypothesisAccumulator;

struct InferenceOptions {
  Weighting weighting = Weighting::likelihood;
  bool per_q = false;          // enumerate separately inside every value of Q_disc
  bool keep_mixture = false;   // retain every component, not only the collapse
  bool random_scan = false;    // Gibbs site selection
  std::size_t burn_in = 0;     // Gibbs steps discarded
  std::size_t exact_cap = std::size_t{1} << 20;
  std::size_t tree_fallback_entries = 10'000'000;
  std::size_t init_retries = 1000;
  /// Called after every generated hypothesis / sample / step.
  std::function<void(std::size_t, const HypothesisAccumulator&)> progress;
};

struct Hypothesis {
  std::vector<int> delta;  // node-indexed, -1 outside the summation set
  double log_prior = kNegInf;
  double log_evidence = 0.0;
  GaussianDist conditioned;  // over Q_cont
};

struct QueryEntry {
  std::vector<std::string> assignment;  // labels aligned with q_discrete
  std::vector<int> states;
  double probability = 0.0;
  bool covered = false;
  std::size_t hypotheses = 0;
  std::optional<GaussianDist> collapsed;
  GaussianMixture mixture;  // weights sum to `probability` when retained
};

struct Diagnostics {
  std::size_t generated = 0;
  std::size_t distinct = 0;
  std::size_t duplicates = 0;
  std::size_t not_covered = 0;
  double log_evidence = kNegInf;  // log of the summed (unnormalized) weight
  double generated_prior_mass = 0.0;
  std::optional<double> residual_bound;
  std::size_t delta1_size = 0;
  double delta1_domain = 0.0;
  std::size_t tree_entries = 0;
  std::size_t tree_cliques = 0;
  bool full_tree_fallback = false;
};

struct QueryResult {
  Algorithm algorithm = Algorithm::exact;
  std::vector<std::string> q_discrete;
  std::vector<std::string> q_continuous;
  std::vector<QueryEntry> entries;  // every value of Q_disc, row-major
  Diagnostics diagnostics;

  /// Probability of one Q_disc value given by labels.
  double probability(const std::vector<std::string>& labels) const {
    for (const auto& e : entries)
      if (e.assignment == labels) return e.probability;
    throw InputError("no such query value");
  }
  const QueryEntry& entry(const std::vector<std::string>& labels) const {
    for (const auto& e : entries)
      if (e.assignment == labels) return e;
    throw InputError("no such query value");
  }
};

// ---------------------------------------------------------------------------
// preparation

/// Query compiled against a model: ids, the summation set, the relevant
/// continuous nodes and a calibrated discrete tree.
class PreparedQuery {
 public:
  PreparedQuery(const Model& m, const Query& q, const InferenceOptions& opt = {}) : m_(&m) {
    check_evidence(m, q.evidence);
    std::set<int> seen;
    for (const auto& n : q.q_discrete) {
      int id = m.id(n);
      if (!m.is_discrete(id)) throw InputError("query variable '" + n + "' is not discrete");
      if (q.evidence.discrete.count(n)) throw InputError("query variable '" + n + "' is also evidence");
      if (!seen.insert(id).second) throw InputError("query variable '" + n + "' listed twice");
      qd_.push_back(id);
    }
    for (const auto& n : q.q_continuous) {
      int id = m.id(n);
      if (m.is_discrete(id)) throw InputError("query variable '" + n + "' is not continuous");
      if (q.evidence.continuous.count(n)) throw InputError("query variable '" + n + "' is also evidence");
      if (!seen.insert(id).second) throw InputError("query variable '" + n + "' listed twice");
      qc_.push_back(id);
      qc_names_.push_back(n);
    }
    q_names_ = q.q_discrete;
    dev_ = discrete_evidence_ids(m, q.evidence);
    cev_ = q.evidence.continuous;

    std::set<int> d1(qd_.begin(), qd_.end());
    d1.insert(m.direct_parents().begin(), m.direct_parents().end());
    delta1_.assign(d1.begin(), d1.end());
    for (int v : delta1_)
      if (!dev_.count(v)) free_.push_back(v);
    domain_ = 1.0;
    for (int v : free_) domain_ *= m.card(v);

    std::vector<int> seeds = qc_;
    for (const auto& [n, x] : cev_) seeds.push_back(m.id(n));
    relevant_ = m.ancestral_closure(seeds);
    for (std::size_t v = 0; v < m.size(); ++v)
      if (m.is_discrete(static_cast<int>(v))) relevant_[v] = false;

    try {
      tree_ = restricted_tree(m, delta1_, dev_, opt.tree_fallback_entries);
    } catch (const CapExceededError&) {
      fallback_ = true;
      tree_ = restricted_tree(m, m.discrete_ids(), dev_);
    }
    q_cards_.clear();
    q_rows_ = 1;
    for (int v : qd_) {
      q_cards_.push_back(m.card(v));
      q_rows_ *= static_cast<std::size_t>(m.card(v));
    }
  }

  const Model& model() const { return *m_; }
  const std::vector<int>& qd() const { return qd_; }
  const std::vector<int>& qc() const { return qc_; }
  const std::vector<std::string>& qd_names() const { return q_names_; }
  const std::vector<std::string>& qc_names() const { return qc_names_; }
  const std::vector<int>& delta1() const { return delta1_; }
  /// Summation variables not fixed by evidence.
  const std::vector<int>& free_vars() const { return free_; }
  const std::map<int, int>& discrete_evidence() const { return dev_; }
  const std::map<std::string, double>& continuous_evidence() const { return cev_; }
  const std::vector<bool>& relevant() const { return relevant_; }
  const CalibratedTree& tree() const { return tree_; }
  bool fallback() const { return fallback_; }
  double domain_size() const { return domain_; }
  std::size_t q_rows() const { return q_rows_; }
  const std::vector<int>& q_cards() const { return q_cards_; }

  std::size_t q_index(const std::vector<int>& delta) const {
    std::size_t r = 0;
    for (std::size_t i = 0; i < qd_.size(); ++i) r = r * q_cards_[i] + static_cast<std::size_t>(delta[qd_[i]]);
    return r;
  }
  std::vector<int> q_states(std::size_t row) const {
    std::vector<int> s(qd_.size());
    for (std::size_t i = qd_.size(); i-- > 0;) {
      s[i] = static_cast<int>(row % q_cards_[i]);
      row /= q_cards_[i];
    }
    return s;
  }

  /// Canonical encoding of the summation-set part of a hypothesis.
  std::string key(const std::vector<int>& delta) const {
    std::string k(delta1_.size(), '\0');
    for (std::size_t i = 0; i < delta1_.size(); ++i) k[i] = static_cast<char>(delta[delta1_[i]]);
    return k;
  }

  /// log P(delta | d).
  double log_prior(const std::vector<int>& delta) const {
    for (const auto& [v, s] : dev_)
      if (delta[v] >= 0 && delta[v] != s) return kNegInf;
    if (!fallback_) return log_prob_of(tree_, delta);
    std::map<int, int> ev = dev_;
    for (int v : delta1_) ev[v] = delta[v];
    CliqueTree t = tree_.tree;
    for (std::size_t c = 0; c < t.cliques.size(); ++c) t.cliques[c].table = tree_.potentials[c];
    try {
      return calibrate(std::move(t), ev).log_z - tree_.log_z;
    } catch (const ImpossibleEvidenceError&) {
      return kNegInf;
    }
  }

  /// Prior sample of the summation set (other entries -1).
  template <class Rng>
  std::vector<int> sample(Rng& rng) const {
    auto s = sample_configuration(tree_, rng);
    if (fallback_) {
      std::vector<int> out(s.size(), -1);
      for (int v : delta1_) out[v] = s[v];
      return out;
    }
    return s;
  }

 private:
  const Model* m_;
  std::vector<int> qd_, qc_, delta1_, free_;
  std::vector<std::string> q_names_, qc_names_;
  std::map<int, int> dev_;
  std::map<std::string, double> cev_;
  std::vector<bool> relevant_;
  CalibratedTree tree_;
  bool fallback_ = false;
  double domain_ = 1.0;
  std::vector<int> q_cards_;
  std::size_t q_rows_ = 1;
};

// ---------------------------------------------------------------------------
// hypotheses

/// log P(x | delta) and the conditioned Gaussian over Q_cont. A delta that
/// is impossible under d gets log_prior = -inf and is otherwise left alone.
inline Hypothesis evaluate_hypothesis(const PreparedQuery& pq, const std::vector<int>& delta) {
  Hypothesis h;
  h.delta = delta;
  h.log_prior = pq.log_prior(delta);
  if (h.log_prior == kNegInf) return h;
  if (pq.continuous_evidence().empty() && pq.qc().empty()) return h;
  auto g = joint_for_hypothesis(pq.model(), delta, &pq.relevant());
  auto c = condition(g, pq.continuous_evidence());
  h.log_evidence = c.log_density;
  if (!pq.qc().empty()) h.conditioned = marginalize(c.dist, pq.qc_names());
  return h;
}

/// Name-keyed form: delta assigns every summation variable by label.
inline Hypothesis evaluate_hypothesis(const Model& m, const Query& q, const std::map<std::string, std::string>& delta) {
  PreparedQuery pq(m, q);
  std::vector<int> a(m.size(), -1);
  for (const auto& [n, s] : delta) {
    int id = m.id(n);
    a[id] = m.state_index(id, s);
  }
  for (int v : pq.delta1())
    if (a[v] < 0) throw InputError("hypothesis does not assign '" + m.name(v) + "'");
  return evaluate_hypothesis(pq, a);
}

/// Memoizing evaluator keyed by the canonical summation-set encoding.
class HypothesisCache {
 public:
  explicit HypothesisCache(const PreparedQuery& pq) : pq_(&pq) {}

  const Hypothesis& get(const std::vector<int>& delta, bool* fresh = nullptr) {
    auto k = pq_->key(delta);
    auto it = cache_.find(k);
    if (fresh) *fresh = it == cache_.end();
    if (it != cache_.end()) return it->second;
    return cache_.emplace(std::move(k), evaluate_hypothesis(*pq_, delta)).first->second;
  }
  std::size_t size() const { return cache_.size(); }

 private:
  const PreparedQuery* pq_;
  std::unordered_map<std::string, Hypothesis> cache_;
};

/// Streaming per-Q_disc accumulation of weighted hypotheses.
class HypothesisAccumulator {
 public:
  HypothesisAccumulator(const PreparedQuery& pq, bool keep_mixture)
      : pq_(&pq), keep_(keep_mixture), slots_(pq.q_rows()) {}

  void add(const Hypothesis& h, double log_w) {
    auto& s = slots_[pq_->q_index(h.delta)];
    ++s.count;
    if (log_w == kNegInf) return;
    s.log_mass = log_add(s.log_mass, log_w);
    log_total_ = log_add(log_total_, log_w);
    if (!pq_->qc().empty()) {
      s.moments.add(log_w, h.conditioned.mean, h.conditioned.cov);
      if (keep_) s.mixture.components.push_back({log_w, h.conditioned});
    }
  }

  double log_total() const { return log_total_; }

  /// Current normalized probability of the Q_disc row (0 while empty).
  double probability(std::size_t row) const {
    if (log_total_ == kNegInf) return 0.0;
    return std::exp(slots_[row].log_mass - log_total_);
  }

  QueryResult finish(Algorithm alg, Diagnostics diag) const {
    if (log_total_ == kNegInf)
      throw DegenerateResultError("every generated hypothesis has zero weight");
    QueryResult r;
    r.algorithm = alg;
    r.q_discrete = pq_->qd_names();
    r.q_continuous = pq_->qc_names();
    const auto& m = pq_->model();
    for (std::size_t row = 0; row < slots_.size(); ++row) {
      const auto& s = slots_[row];
      QueryEntry e;
      e.states = pq_->q_states(row);
      for (std::size_t i = 0; i < e.states.size(); ++i) e.assignment.push_back(m.node(pq_->qd()[i]).states[e.states[i]]);
      e.hypotheses = s.count;
      e.covered = s.count > 0;
      e.probability = std::exp(s.log_mass - log_total_);
      if (!e.covered) ++diag.not_covered;
      if (!pq_->qc().empty() && !s.moments.empty()) {
        e.collapsed = GaussianDist{pq_->qc_names(), s.moments.mean(), s.moments.cov()};
        if (keep_) {
          e.mixture = s.mixture;
          for (auto& c : e.mixture.components) c.log_weight -= log_total_;
        }
      }
      r.entries.push_back(std::move(e));
    }
    diag.log_evidence = log_total_;
    r.diagnostics = diag;
    return r;
  }

 private:
  struct Slot {
    double log_mass = kNegInf;
    std::size_t count = 0;
    MomentAccumulator moments;
    GaussianMixture mixture;
  };
  const PreparedQuery* pq_;
  bool keep_;
  std::vector<Slot> slots_;
  double log_total_ = kNegInf;
};

namespace inf_detail {

inline Diagnostics base_diagnostics(const PreparedQuery& pq) {
  Diagnostics d;
  d.delta1_size = pq.delta1().size();
  d.delta1_domain = pq.domain_size();
  d.tree_entries = pq.tree().tree.total_entries();
  d.tree_cliques = pq.tree().tree.num_cliques();
  d.full_tree_fallback = pq.fallback();
  return d;
}

inline bool bound_applies(const PreparedQuery& pq) {
  return pq.model().is_polytree() && pq.continuous_evidence().size() == 1;
}

}  // namespace inf_detail

// ---------------------------------------------------------------------------
// residual mass bound

/// Smallest variance any hypothesis can give the single evidence variable,
/// choosing per node (in topological order) the parent row that minimizes
/// accumulated variance.
inline double min_evidence_variance(const PreparedQuery& pq) {
  const auto& m = pq.model();
  std::vector<double> vmin(m.size(), 0.0);
  const auto& dev = pq.discrete_evidence();
  for (int v : m.continuous_topo()) {
    const auto& n = m.node(v);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> a(m.size(), 0);
    std::vector<int> digits(n.dparents.size(), 0);
    while (true) {
      bool ok = true;
      for (std::size_t j = 0; j < n.dparents.size(); ++j) {
        a[n.dparents[j]] = digits[j];
        auto it = dev.find(n.dparents[j]);
        if (it != dev.end() && it->second != digits[j]) ok = false;
      }
      if (ok) {
        const auto& lg = n.clg[m.parent_row(v, a)];
        double var = lg.variance;
        for (std::size_t j = 0; j < n.cparents.size(); ++j) var += lg.coeffs[j] * lg.coeffs[j] * vmin[n.cparents[j]];
        best = std::min(best, var);
      }
      int k = static_cast<int>(digits.size()) - 1;
      while (k >= 0 && ++digits[k] == m.card(n.dparents[k])) digits[k--] = 0;
      if (k < 0) break;
    }
    vmin[v] = best;
  }
  return vmin[m.id(pq.continuous_evidence().begin()->first)];
}

/// Upper bound on sum over non-generated delta of P(delta | d) p(x | delta),
/// given the prior mass already generated. Only for polytrees with a single
/// continuous evidence variable.
inline double residual_mass_bound(const PreparedQuery& pq, double generated_prior_mass) {
  if (!pq.model().is_polytree())
    throw UnsupportedStructureError("residual mass bound needs a polytree network");
  if (pq.continuous_evidence().size() != 1)
    throw UnsupportedStructureError("residual mass bound needs exactly one continuous evidence variable");
  double rest = std::max(0.0, 1.0 - generated_prior_mass);
  return rest / std::sqrt(2.0 * M_PI * min_evidence_variance(pq));
}

inline double residual_mass_bound(const Model& m, const Query& q, const std::vector<std::vector<int>>& generated) {
  PreparedQuery pq(m, q);
  std::set<std::string> seen;
  double mass = 0.0;
  for (const auto& d : generated)
    if (seen.insert(pq.key(d)).second) mass += std::exp(pq.log_prior(d));
  return residual_mass_bound(pq, mass);
}

// ---------------------------------------------------------------------------
// reweighting

/// Normalized log weights of a hypothesis set. Likelihood: one term per
/// distinct hypothesis, prior times likelihood. Counts: multiplicity times
/// likelihood.
inline std::vector<double> reweigh(const PreparedQuery& pq, const std::vector<Hypothesis>& hyps,
                                   Weighting scheme, const std::vector<std::size_t>& counts = {}) {
  if (hyps.empty()) throw DegenerateResultError("reweigh: empty hypothesis set");
  if (scheme == Weighting::counts && counts.size() != hyps.size())
    throw InputError("reweigh: counts scheme needs one count per hypothesis");
  std::vector<double> lw(hyps.size(), kNegInf);
  if (scheme == Weighting::likelihood) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < hyps.size(); ++i)
      if (seen.insert(pq.key(hyps[i].delta)).second) lw[i] = hyps[i].log_prior + hyps[i].log_evidence;
  } else {
    for (std::size_t i = 0; i < hyps.size(); ++i)
      if (counts[i] > 0 && hyps[i].log_prior > kNegInf)
        lw[i] = std::log(static_cast<double>(counts[i])) + hyps[i].log_evidence;
  }
  if (log_sum_exp(lw) == kNegInf) throw DegenerateResultError("reweigh: all weights are zero");
  return log_normalize(lw);
}

// ---------------------------------------------------------------------------
// algorithms

inline QueryResult answer_exact(const PreparedQuery& pq, const InferenceOptions& opt = {}) {
  if (pq.domain_size() > static_cast<double>(opt.exact_cap))
    throw CapExceededError("exact enumeration over " + std::to_string(static_cast<long double>(pq.domain_size())) +
                           " hypotheses exceeds the cap of " + std::to_string(opt.exact_cap));
  const auto& m = pq.model();
  HypothesisAccumulator acc(pq, opt.keep_mixture);
  Diagnostics diag = inf_detail::base_diagnostics(pq);
  std::vector<int> a(m.size(), -1);
  for (const auto& [v, s] : pq.discrete_evidence()) a[v] = s;
  const auto& fv = pq.free_vars();
  for (int v : fv) a[v] = 0;
  while (true) {
    auto h = evaluate_hypothesis(pq, a);
    ++diag.generated;
    if (h.log_prior > kNegInf) {
      diag.generated_prior_mass += std::exp(h.log_prior);
      acc.add(h, h.log_prior + h.log_evidence);
    }
    if (opt.progress) opt.progress(diag.generated, acc);
    int k = static_cast<int>(fv.size()) - 1;
    while (k >= 0 && ++a[fv[k]] == m.card(fv[k])) a[fv[k--]] = 0;
    if (k < 0) break;
  }
  diag.distinct = diag.generated;
  if (inf_detail::bound_applies(pq)) diag.residual_bound = 0.0;
  return acc.finish(Algorithm::exact, diag);
}

/// First K hypotheses in decreasing P(delta | d). With per_q set, K applies
/// to each value of Q_disc separately.
inline QueryResult answer_enum(const PreparedQuery& pq, std::size_t K, const InferenceOptions& opt = {}) {
  if (K < 1) throw InputError("answer_enum: K must be at least 1");
  HypothesisAccumulator acc(pq, opt.keep_mixture);
  Diagnostics diag = inf_detail::base_diagnostics(pq);
  std::set<std::string> seen;
  auto run = [&](const std::map<int, int>& fixed) {
    KBestStream stream(pq.tree(), fixed);
    std::size_t taken = 0;
    while (taken < K) {
      auto item = stream.next();
      if (!item) break;
      std::vector<int> delta = item->assignment;
      if (pq.fallback()) {
        std::vector<int> proj(delta.size(), -1);
        for (int v : pq.delta1()) proj[v] = delta[v];
        delta = std::move(proj);
        if (!seen.insert(pq.key(delta)).second) {
          ++diag.duplicates;
          continue;
        }
      }
      ++taken;
      auto h = evaluate_hypothesis(pq, delta);
      ++diag.generated;
      ++diag.distinct;
      diag.generated_prior_mass += std::exp(h.log_prior);
      double w = opt.weighting == Weighting::likelihood ? h.log_prior + h.log_evidence : h.log_evidence;
      acc.add(h, w);
      if (opt.progress) opt.progress(diag.generated, acc);
    }
  };
  if (opt.per_q && !pq.qd().empty()) {
    for (std::size_t row = 0; row < pq.q_rows(); ++row) {
      auto st = pq.q_states(row);
      std::map<int, int> fixed;
      for (std::size_t i = 0; i < st.size(); ++i) fixed[pq.qd()[i]] = st[i];
      run(fixed);
    }
  } else {
    run({});
  }
  if (inf_detail::bound_applies(pq)) diag.residual_bound = residual_mass_bound(pq, diag.generated_prior_mass);
  return acc.finish(Algorithm::enumeration, diag);
}

/// Likelihood weighting: delta drawn from P(delta | d), continuous part
/// handled analytically.
template <class Rng>
QueryResult answer_lw(const PreparedQuery& pq, std::size_t n_samples, Rng& rng, const InferenceOptions& opt = {}) {
  if (n_samples < 1) throw InputError("answer_lw: need at least one sample");
  HypothesisAccumulator acc(pq, opt.keep_mixture);
  HypothesisCache cache(pq);
  Diagnostics diag = inf_detail::base_diagnostics(pq);
  for (std::size_t i = 0; i < n_samples; ++i) {
    auto delta = pq.sample(rng);
    bool fresh = false;
    const auto& h = cache.get(delta, &fresh);
    ++diag.generated;
    if (fresh) {
      ++diag.distinct;
      diag.generated_prior_mass += std::exp(h.log_prior);
      if (opt.weighting == Weighting::likelihood) acc.add(h, h.log_prior + h.log_evidence);
    } else {
      ++diag.duplicates;
    }
    if (opt.weighting == Weighting::counts) acc.add(h, h.log_evidence);
    if (opt.progress) opt.progress(diag.generated, acc);
  }
  if (inf_detail::bound_applies(pq)) diag.residual_bound = residual_mass_bound(pq, diag.generated_prior_mass);
  return acc.finish(Algorithm::lw, diag);
}

/// Gibbs sampling over the free summation variables. A step is one
/// single-site update; each visited state after burn-in is a sample. Under
/// the counts scheme the chain already targets the posterior, so visits
/// are counted without a likelihood factor.
template <class Rng>
QueryResult answer_gibbs(const PreparedQuery& pq, std::size_t n_steps, Rng& rng, const InferenceOptions& opt = {}) {
  if (n_steps < 1) throw InputError("answer_gibbs: need at least one step");
  const auto& m = pq.model();
  HypothesisAccumulator acc(pq, opt.keep_mixture);
  HypothesisCache cache(pq);
  Diagnostics diag = inf_detail::base_diagnostics(pq);

  std::vector<int> state;
  bool init = false;
  for (std::size_t t = 0; t < opt.init_retries && !init; ++t) {
    state = pq.sample(rng);
    const auto& h = cache.get(state);
    init = h.log_prior + h.log_evidence > kNegInf;
  }
  if (!init) throw InitializationError("no initial state with positive weight after " + std::to_string(opt.init_retries) + " prior samples");

  const auto& sites = pq.free_vars();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, sites.empty() ? 0 : sites.size() - 1);
  std::set<std::string> seen;
  std::vector<double> lw;
  for (std::size_t step = 0; step < n_steps; ++step) {
    if (!sites.empty()) {
      int v = opt.random_scan ? sites[pick(rng)] : sites[step % sites.size()];
      lw.assign(m.card(v), kNegInf);
      for (int s = 0; s < m.card(v); ++s) {
        state[v] = s;
        const auto& h = cache.get(state);
        lw[s] = h.log_prior + h.log_evidence;
      }
      double mx = *std::max_element(lw.begin(), lw.end());
      double total = 0.0;
      for (double& x : lw) total += (x = std::exp(x - mx));
      double u = unif(rng) * total;
      int chosen = m.card(v) - 1;
      for (int s = 0; s < m.card(v); ++s) {
        if (lw[s] <= 0.0) continue;
        u -= lw[s];
        if (u < 0.0) {
          chosen = s;
          break;
        }
      }
      while (lw[chosen] <= 0.0) --chosen;
      state[v] = chosen;
    }
    if (step < opt.burn_in) continue;
    const auto& h = cache.get(state);
    ++diag.generated;
    bool fresh = seen.insert(pq.key(state)).second;
    if (fresh) {
      ++diag.distinct;
      diag.generated_prior_mass += std::exp(h.log_prior);
      if (opt.weighting == Weighting::likelihood) acc.add(h, h.log_prior + h.log_evidence);
    } else {
      ++diag.duplicates;
    }
    if (opt.weighting == Weighting::counts) acc.add(h, 0.0);
    if (opt.progress) opt.progress(diag.generated, acc);
  }
  if (inf_detail::bound_applies(pq)) diag.residual_bound = residual_mass_bound(pq, diag.generated_prior_mass);
  return acc.finish(Algorithm::gibbs, diag);
}

/// One entry point for every algorithm; `budget` is K, samples or steps.
inline QueryResult answer(const Model& m, const Query& q, Algorithm alg, std::size_t budget, std::uint64_t seed,
                          const InferenceOptions& opt = {}) {
  PreparedQuery pq(m, q, opt);
  std::mt19937_64 rng(seed);
  switch (alg) {
    case Algorithm::exact: return answer_exact(pq, opt);
    case Algorithm::enumeration: return answer_enum(pq, budget, opt);
    case Algorithm::lw: return answer_lw(pq, budget, rng, opt);
    case Algorithm::gibbs: return answer_gibbs(pq, budget, rng, opt);
  }
  throw InputError("unknown algorithm");
}

// ---------------------------------------------------------------------------
// files

struct QueryFile {
  Query query;
  Algorithm algorithm = Algorithm::exact;
  std::size_t budget = 1000;
  std::uint64_t seed = 0;
  bool has_seed = false;
  InferenceOptions options;
};

inline QueryFile query_from_json(const json& doc) {
  using namespace io_detail;
  if (!doc.is_object()) throw ParseError("query: expected an object");
  QueryFile f;
  if (doc.contains("q_discrete")) f.query.q_discrete = strings(doc["q_discrete"], "query.q_discrete");
  if (doc.contains("q_continuous")) f.query.q_continuous = strings(doc["q_continuous"], "query.q_continuous");
  if (doc.contains("evidence")) f.query.evidence = evidence_from_json(doc["evidence"]);
  if (doc.contains("algorithm")) f.algorithm = algorithm_from_string(string(doc["algorithm"], "query.algorithm"));
  if (doc.contains("budget")) {
    if (!doc["budget"].is_number_unsigned() || doc["budget"].get<std::size_t>() < 1)
      throw ParseError("query.budget: expected a positive integer");
    f.budget = doc["budget"].get<std::size_t>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer()) throw ParseError("query.seed: expected an integer");
    f.seed = doc["seed"].get<std::uint64_t>();
    f.has_seed = true;
  }
  if (doc.contains("weighting")) {
    auto w = string(doc["weighting"], "query.weighting");
    if (w == "likelihood")
      f.options.weighting = Weighting::likelihood;
    else if (w == "counts")
      f.options.weighting = Weighting::counts;
    else
      throw ParseError("query.weighting: expected \"likelihood\" or \"counts\"");
  }
  if (doc.contains("per_q")) f.options.per_q = doc["per_q"].get<bool>();
  if (doc.contains("mixture")) f.options.keep_mixture = doc["mixture"].get<bool>();
  if (doc.contains("burn_in")) f.options.burn_in = doc["burn_in"].get<std::size_t>();
  return f;
}

inline json gaussian_to_json(const GaussianDist& g) {
  json mean = json::array(), cov = json::array();
  for (Eigen::Index i = 0; i < g.mean.size(); ++i) mean.push_back(g.mean(i));
  for (Eigen::Index i = 0; i < g.cov.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < g.cov.cols(); ++j) row.push_back(g.cov(i, j));
    cov.push_back(row);
  }
  return json{{"scope", g.scope}, {"mean", mean}, {"covariance", cov}};
}

inline json result_to_json(const QueryResult& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    json je;
    json as = json::object();
    for (std::size_t i = 0; i < r.q_discrete.size(); ++i) as[r.q_discrete[i]] = e.assignment[i];
    je["assignment"] = as;
    je["probability"] = e.probability;
    je["covered"] = e.covered;
    je["hypotheses"] = e.hypotheses;
    if (e.collapsed) je["gaussian"] = gaussian_to_json(*e.collapsed);
    if (!e.mixture.empty()) {
      json mix = json::array();
      for (const auto& c : e.mixture.components) {
        json jc = gaussian_to_json(c.dist);
        jc["weight"] = std::exp(c.log_weight);
        mix.push_back(jc);
      }
      je["mixture"] = mix;
    }
    entries.push_back(je);
  }
  const auto& d = r.diagnostics;
  json diag{{"generated", d.generated},
            {"distinct", d.distinct},
            {"duplicates", d.duplicates},
            {"not_covered", d.not_covered},
            {"log_evidence", d.log_evidence},
            {"generated_prior_mass", d.generated_prior_mass},
            {"summation_variables", d.delta1_size},
            {"summation_domain", d.delta1_domain},
            {"tree_entries", d.tree_entries},
            {"tree_cliques", d.tree_cliques},
            {"full_tree_fallback", d.full_tree_fallback}};
  if (d.residual_bound) diag["residual_bound"] = *d.residual_bound;
  return json{{"algorithm", to_string(r.algorithm)},
              {"q_discrete", r.q_discrete},
              {"q_continuous", r.q_continuous},
              {"entries", entries},
              {"diagnostics", diag}};
}

}  // namespace clg
