#include <gtest/gtest.h>

#include <random>

#include "clg/inference.hpp"
#include "oracles.hpp"

using namespace clg;

namespace {

struct Case {
  Network net;
  Model model;
  Query query;
  std::vector<int> qd, qc;
  std::map<int, int> dev;
  std::map<int, double> cev;
};

// Random network plus a random query with one or two discrete query nodes,
// up to one continuous query node and evidence on one or two continuous nodes.
Case random_case(std::mt19937_64& rng, oracle::RandomNetSpec spec, bool discrete_evidence = false) {
  for (;;) {
    Case c;
    c.net = oracle::random_network(rng, spec);
    c.model = Model(c.net);
    const auto& m = c.model;
    auto d = m.discrete_ids();
    auto x = m.continuous_ids();
    std::shuffle(d.begin(), d.end(), rng);
    std::shuffle(x.begin(), x.end(), rng);
    int nq = 1 + static_cast<int>(rng() % 2);
    for (int i = 0; i < nq && i < static_cast<int>(d.size()); ++i) c.qd.push_back(d[i]);
    if (discrete_evidence && static_cast<int>(d.size()) > nq) c.dev[d[nq]] = static_cast<int>(rng() % m.card(d[nq]));
    std::normal_distribution<double> nd(0.0, 2.0);
    int ne = std::min<int>(1 + static_cast<int>(rng() % 2), static_cast<int>(x.size()));
    for (int i = 0; i < ne; ++i) c.cev[x[i]] = nd(rng);
    if (static_cast<int>(x.size()) > ne) c.qc.push_back(x[ne]);
    for (int v : c.qd) c.query.q_discrete.push_back(m.name(v));
    for (int v : c.qc) c.query.q_continuous.push_back(m.name(v));
    for (auto [v, s] : c.dev) c.query.evidence.discrete[m.name(v)] = m.node(v).states[s];
    for (auto [v, val] : c.cev) c.query.evidence.continuous[m.name(v)] = val;
    // Reject impossible discrete evidence.
    bool possible = c.dev.empty();
    for (const auto& je : oracle::discrete_joint(m)) {
      bool ok = je.p > 0;
      for (auto [v, s] : c.dev) ok = ok && je.a[v] == s;
      possible = possible || ok;
    }
    if (possible) return c;
  }
}

double tv_distance(const QueryResult& r, const oracle::BruteAnswer& b) {
  double tv = 0;
  for (const auto& e : r.entries) tv += std::abs(e.probability - b.prob.at(e.states));
  return tv / 2;
}

std::size_t full_domain(const PreparedQuery& pq) { return static_cast<std::size_t>(pq.domain_size()); }

Network thm1_like() {
  // A -> X, B -> Y with Y | B=1 ~ X, small polytree.
  Network n;
  n.nodes.push_back(Node::make_discrete("A", {"0", "1"}, {}, {{0.5, 0.5}}));
  n.nodes.push_back(Node::make_discrete("B", {"0", "1"}, {}, {{0.5, 0.5}}));
  n.nodes.push_back(Node::make_continuous("X", {"A"}, {}, {{{"0"}, 0.0, {}, 0.1}, {{"1"}, 3.0, {}, 0.1}}));
  n.nodes.push_back(Node::make_continuous("Y", {"B"}, {"X"}, {{{"0"}, 1.0, {0.0}, 1.0}, {{"1"}, 0.0, {1.0}, 0.1}}));
  return n;
}

}  // namespace

TEST(EvaluateHypothesis, NoContinuousEvidenceGivesZeroLogEvidence) {
  Model m(thm1_like());
  Query q{{"B"}, {"Y"}, {}};
  auto h = evaluate_hypothesis(m, q, {{"A", "1"}, {"B", "1"}});
  EXPECT_EQ(h.log_evidence, 0.0);
  EXPECT_NEAR(h.log_prior, std::log(0.25), 1e-14);
  EXPECT_NEAR(h.conditioned.mean(0), 3.0, 1e-14);
  EXPECT_NEAR(h.conditioned.cov(0, 0), 0.2, 1e-14);
}

TEST(EvaluateHypothesis, MatchesUnprunedDenseConstruction) {
  std::mt19937_64 rng(51);
  for (int it = 0; it < 40; ++it) {
    auto c = random_case(rng, {5, 5, 2, 2, 2});
    PreparedQuery pq(c.model, c.query);
    auto joint = oracle::discrete_joint(c.model);
    for (const auto& je : joint) {
      auto h = evaluate_hypothesis(pq, je.a);
      double marginal = 0;
      for (const auto& other : joint) {
        bool same = true;
        for (int v : pq.delta1()) same = same && other.a[v] == je.a[v];
        if (same) marginal += other.p;
      }
      auto g = oracle::dense_joint(c.model, je.a);
      Eigen::VectorXd x(c.cev.size()), mu(c.cev.size());
      Eigen::MatrixXd S(c.cev.size(), c.cev.size());
      std::vector<int> idx;
      for (auto [v, val] : c.cev) {
        idx.push_back(static_cast<int>(std::find(g.nodes.begin(), g.nodes.end(), v) - g.nodes.begin()));
        x(idx.size() - 1) = val;
      }
      for (std::size_t a = 0; a < idx.size(); ++a) {
        mu(a) = g.mean(idx[a]);
        for (std::size_t b = 0; b < idx.size(); ++b) S(a, b) = g.cov(idx[a], idx[b]);
      }
      EXPECT_NEAR(h.log_evidence, oracle::dense_log_pdf(x, mu, S), 1e-9);
      EXPECT_NEAR(h.log_prior, std::log(marginal), 1e-9);
    }
  }
}

TEST(EvaluateHypothesis, ImpossibleDeltaIsFlaggedNotThrown) {
  Network n = thm1_like();
  n.nodes[0].cpt = {{1.0, 0.0}};
  Model m(n);
  Query q{{"B"}, {}, {{}, {{"Y", 0.5}}}};
  auto h = evaluate_hypothesis(m, q, {{"A", "1"}, {"B", "1"}});
  EXPECT_EQ(h.log_prior, kNegInf);
}

TEST(AnswerExact, MatchesBruteForceOnRandomNetworks) {
  std::mt19937_64 rng(53);
  for (int it = 0; it < 60; ++it) {
    auto c = random_case(rng, {6, 4, 2, 2, 2, false, it % 2 == 1}, it % 3 == 0);
    PreparedQuery pq(c.model, c.query);
    auto r = answer_exact(pq);
    auto b = oracle::brute_force(c.model, c.qd, c.qc, c.dev, c.cev);
    double total = 0;
    for (const auto& e : r.entries) {
      total += e.probability;
      double want = b.prob.count(e.states) ? b.prob.at(e.states) : 0.0;
      EXPECT_NEAR(e.probability, want, 1e-9);
      if (!c.qc.empty() && e.probability > 1e-6) {
        ASSERT_TRUE(e.collapsed.has_value());
        EXPECT_NEAR(e.collapsed->mean(0), b.mean.at(e.states)(0), 1e-7 * (1 + std::abs(b.mean.at(e.states)(0))));
        EXPECT_NEAR(e.collapsed->cov(0, 0), b.cov.at(e.states)(0, 0), 1e-7 * (1 + b.cov.at(e.states)(0, 0)));
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(AnswerExact, NoContinuousEvidenceReducesToDiscreteMarginal) {
  std::mt19937_64 rng(55);
  for (int it = 0; it < 20; ++it) {
    auto net = oracle::random_network(rng, {6, 3});
    Model m(net);
    Query q{{"D2"}, {}, {}};
    auto r = answer(m, q, Algorithm::exact, 0, 0);
    auto ct = restricted_tree(m, {2}, {});
    for (const auto& e : r.entries) {
      std::vector<int> a(m.size(), -1);
      a[2] = e.states[0];
      EXPECT_NEAR(e.probability, prob_of(ct, a), 1e-12);
    }
  }
}

TEST(AnswerExact, CapIsEnforced) {
  Model m(thm1_like());
  InferenceOptions opt;
  opt.exact_cap = 2;
  EXPECT_THROW(answer(m, {{"B"}, {}, {{}, {{"Y", 1.0}}}}, Algorithm::exact, 0, 0, opt), CapExceededError);
}

TEST(AnswerExact, MixtureWeightsSumToProbability) {
  Model m(thm1_like());
  InferenceOptions opt;
  opt.keep_mixture = true;
  auto r = answer(m, {{"B"}, {"X"}, {{}, {{"Y", 2.0}}}}, Algorithm::exact, 0, 0, opt);
  for (const auto& e : r.entries) {
    double s = 0;
    for (const auto& comp : e.mixture.components) s += std::exp(comp.log_weight);
    EXPECT_NEAR(s, e.probability, 1e-12);
    auto col = collapse(e.mixture);
    EXPECT_NEAR(col.mean(0), e.collapsed->mean(0), 1e-12);
    EXPECT_NEAR(col.cov(0, 0), e.collapsed->cov(0, 0), 1e-12);
  }
}

TEST(AnswerEnum, FullKEqualsExactAndPrefixesAreConsistent) {
  std::mt19937_64 rng(57);
  for (int it = 0; it < 40; ++it) {
    auto c = random_case(rng, {7, 4, 2, 2, 2, false, true}, it % 4 == 0);
    PreparedQuery pq(c.model, c.query);
    auto ex = answer_exact(pq);
    auto en = answer_enum(pq, full_domain(pq));
    for (std::size_t i = 0; i < ex.entries.size(); ++i) {
      EXPECT_NEAR(en.entries[i].probability, ex.entries[i].probability, 1e-9);
      if (ex.entries[i].collapsed && ex.entries[i].probability > 1e-6) {
        EXPECT_NEAR(en.entries[i].collapsed->mean(0), ex.entries[i].collapsed->mean(0), 1e-7);
      }
    }
    std::size_t prev_generated = 0;
    for (std::size_t k : {1, 2, 5, 17}) {
      auto r = answer_enum(pq, k);
      double total = 0;
      for (const auto& e : r.entries) total += e.probability;
      EXPECT_NEAR(total, 1.0, 1e-9);
      EXPECT_GE(r.diagnostics.generated, prev_generated);
      prev_generated = r.diagnostics.generated;
    }
  }
}

TEST(AnswerEnum, PerQEnumerationWithFullBudgetEqualsExact) {
  std::mt19937_64 rng(59);
  for (int it = 0; it < 20; ++it) {
    auto c = random_case(rng, {6, 3, 2, 2, 2});
    InferenceOptions opt;
    opt.per_q = true;
    PreparedQuery pq(c.model, c.query, opt);
    auto ex = answer_exact(pq);
    auto en = answer_enum(pq, full_domain(pq), opt);
    for (std::size_t i = 0; i < ex.entries.size(); ++i) EXPECT_NEAR(en.entries[i].probability, ex.entries[i].probability, 1e-9);
  }
}

TEST(AnswerEnum, SingleHypothesisOnUniformPriorsHasLargeResidual) {
  Model m(thm1_like());
  PreparedQuery pq(m, {{"B"}, {}, {{}, {{"Y", 3.0}}}});
  auto r = answer_enum(pq, 1);
  ASSERT_TRUE(r.diagnostics.residual_bound.has_value());
  EXPECT_NEAR(r.diagnostics.generated_prior_mass, 0.25, 1e-12);
  EXPECT_GT(*r.diagnostics.residual_bound, std::exp(r.diagnostics.log_evidence));
  EXPECT_EQ(r.diagnostics.not_covered, 1u);
}

TEST(AnswerLw, ConvergesToExact) {
  std::mt19937_64 rng(61);
  for (int it = 0; it < 20; ++it) {
    auto c = random_case(rng, {8, 3, 2, 2, 2});
    PreparedQuery pq(c.model, c.query);
    auto ex = answer_exact(pq);
    std::mt19937_64 srng(1000 + it);
    auto r = answer_lw(pq, 10000, srng);
    auto b = oracle::brute_force(c.model, c.qd, c.qc, c.dev, c.cev);
    EXPECT_LT(tv_distance(r, b), 0.05);
    double total = 0;
    for (const auto& e : r.entries) total += e.probability;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(AnswerLw, DeterministicPriorGivesOneExactHypothesis) {
  Network n = thm1_like();
  n.nodes[0].cpt = {{0.0, 1.0}};
  n.nodes[1].cpt = {{1.0, 0.0}};
  Model m(n);
  PreparedQuery pq(m, {{"B"}, {"X"}, {{}, {{"Y", 2.0}}}});
  std::mt19937_64 rng(3);
  auto r = answer_lw(pq, 500, rng);
  EXPECT_EQ(r.diagnostics.distinct, 1u);
  auto ex = answer_exact(pq);
  EXPECT_NEAR(r.entries[0].probability, 1.0, 1e-15);
  EXPECT_NEAR(r.entries[0].collapsed->mean(0), ex.entries[0].collapsed->mean(0), 1e-12);
}

TEST(AnswerGibbs, StationaryDistributionWithoutEvidenceIsThePrior) {
  std::mt19937_64 rng(63);
  for (int it = 0; it < 10; ++it) {
    auto net = oracle::random_network(rng, {5, 2, 2, 2, 2});
    Model m(net);
    Query q{{"D0", "D1"}, {}, {}};
    InferenceOptions opt;
    opt.weighting = Weighting::counts;
    auto r = answer(m, q, Algorithm::gibbs, 40000, 77 + it, opt);
    auto b = oracle::brute_force(m, {0, 1}, {}, {}, {});
    EXPECT_LT(tv_distance(r, b), 0.03);
  }
}

TEST(AnswerGibbs, ConvergesToExact) {
  std::mt19937_64 rng(65);
  for (int it = 0; it < 20; ++it) {
    auto c = random_case(rng, {8, 3, 2, 2, 2});
    PreparedQuery pq(c.model, c.query);
    std::mt19937_64 srng(2000 + it);
    auto r = answer_gibbs(pq, 10000, srng);
    auto b = oracle::brute_force(c.model, c.qd, c.qc, c.dev, c.cev);
    EXPECT_LT(tv_distance(r, b), 0.05);
  }
}

TEST(AnswerGibbs, ImpossibleInitialisation) {
  Network n = thm1_like();
  Model m(n);
  InferenceOptions opt;
  opt.init_retries = 5;
  // Y observed exactly where no hypothesis can reach it numerically.
  PreparedQuery pq(m, {{"B"}, {}, {{}, {{"Y", 1e300}}}});
  std::mt19937_64 rng(1);
  EXPECT_THROW(answer_gibbs(pq, 10, rng, opt), InitializationError);
}

TEST(AllAlgorithms, AgreeWhenHypothesisSetIsExhaustive) {
  Model m(thm1_like());
  PreparedQuery pq(m, {{"B"}, {"X"}, {{}, {{"Y", 1.5}}}});
  auto ex = answer_exact(pq);
  auto en = answer_enum(pq, 4);
  std::mt19937_64 rng(9);
  auto lw = answer_lw(pq, 2000, rng);
  auto gb = answer_gibbs(pq, 20000, rng);
  ASSERT_EQ(lw.diagnostics.distinct, 4u);
  ASSERT_EQ(gb.diagnostics.distinct, 4u);
  for (std::size_t i = 0; i < 2; ++i) {
    for (const auto* r : {&en, &lw, &gb}) {
      EXPECT_NEAR(r->entries[i].probability, ex.entries[i].probability, 1e-12);
      EXPECT_NEAR(r->entries[i].collapsed->mean(0), ex.entries[i].collapsed->mean(0), 1e-9);
    }
  }
}

TEST(Reweigh, SchemesAndDuplicates) {
  Model m(thm1_like());
  PreparedQuery pq(m, {{"B"}, {}, {{}, {{"Y", 2.5}}}});
  std::vector<int> a{1, 1, -1, -1}, b{0, 1, -1, -1};
  auto ha = evaluate_hypothesis(pq, a), hb = evaluate_hypothesis(pq, b);
  EXPECT_NEAR(reweigh(pq, {ha}, Weighting::likelihood)[0], 0.0, 1e-15);
  EXPECT_NEAR(reweigh(pq, {ha}, Weighting::counts, {3})[0], 0.0, 1e-15);
  auto once = reweigh(pq, {ha, hb}, Weighting::likelihood);
  auto twice = reweigh(pq, {ha, hb, ha}, Weighting::likelihood);
  EXPECT_NEAR(once[0], twice[0], 1e-15);
  EXPECT_EQ(twice[2], kNegInf);
  auto counts = reweigh(pq, {ha, hb}, Weighting::counts, {3, 1});
  EXPECT_NEAR(counts[0] - counts[1], std::log(3.0) + ha.log_evidence - hb.log_evidence, 1e-9);
  Hypothesis dead = ha;
  dead.log_prior = kNegInf;
  EXPECT_THROW(reweigh(pq, {dead}, Weighting::likelihood), DegenerateResultError);
}

TEST(Reweigh, CountsSchemeIsUnbiased) {
  Model m(thm1_like());
  PreparedQuery pq(m, {{"B"}, {}, {{}, {{"Y", 1.8}}}});
  const double exact = answer_exact(pq).entries[1].probability;
  InferenceOptions opt;
  opt.weighting = Weighting::counts;
  const int runs = 1000;
  double s = 0, s2 = 0;
  for (int r = 0; r < runs; ++r) {
    std::mt19937_64 rng(100000 + r);
    double p = answer_lw(pq, 2000, rng, opt).entries[1].probability;
    s += p;
    s2 += p * p;
  }
  double mean = s / runs, sd = std::sqrt(s2 / runs - mean * mean);
  EXPECT_NEAR(mean, exact, 3 * sd / std::sqrt(runs));
}

TEST(ResidualBound, ZeroWhenEverythingIsGenerated) {
  Model m(thm1_like());
  PreparedQuery pq(m, {{"B"}, {}, {{}, {{"Y", 2.5}}}});
  EXPECT_EQ(residual_mass_bound(pq, 1.0), 0.0);
  EXPECT_EQ(*answer_exact(pq).diagnostics.residual_bound, 0.0);
}

TEST(ResidualBound, UnsupportedStructures) {
  Model m(thm1_like());
  PreparedQuery two(m, {{"B"}, {}, {{}, {{"Y", 2.5}, {"X", 0.0}}}});
  EXPECT_THROW(residual_mass_bound(two, 0.5), UnsupportedStructureError);
  Network loop = thm1_like();
  loop.nodes[3].discrete_parents = {"A", "B"};
  loop.nodes[3].clg = {{{"0", "0"}, 0, {1}, 1}, {{"0", "1"}, 0, {1}, 1}, {{"1", "0"}, 0, {1}, 1}, {{"1", "1"}, 0, {1}, 1}};
  Model ml(loop);
  PreparedQuery pl(ml, {{"B"}, {}, {{}, {{"Y", 2.5}}}});
  EXPECT_THROW(residual_mass_bound(pl, 0.5), UnsupportedStructureError);
}

TEST(ResidualBound, DominatesOmittedMassOnRandomPolytrees) {
  std::mt19937_64 rng(67);
  int checked = 0;
  for (int it = 0; it < 60 && checked < 25; ++it) {
    auto net = oracle::random_network(rng, {3, 3, 2, 2, 2, true});
    Model m(net);
    if (!m.is_polytree()) continue;
    auto x = m.continuous_ids().back();
    Query q{{"D0"}, {}, {{}, {{m.name(x), std::normal_distribution<double>(0, 2)(rng)}}}};
    PreparedQuery pq(m, q);
    std::vector<Hypothesis> all;
    std::vector<int> a(m.size(), -1);
    for (int v : pq.delta1()) a[v] = 0;
    while (true) {
      all.push_back(evaluate_hypothesis(pq, a));
      int k = static_cast<int>(pq.delta1().size()) - 1;
      while (k >= 0 && ++a[pq.delta1()[k]] == m.card(pq.delta1()[k])) a[pq.delta1()[k--]] = 0;
      if (k < 0) break;
    }
    const std::size_t n = all.size();
    ASSERT_LE(n, 16u);
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      double gen = 0, omitted = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double p = std::exp(all[i].log_prior);
        if (mask >> i & 1)
          gen += p;
        else
          omitted += p * std::exp(all[i].log_evidence);
      }
      EXPECT_GE(residual_mass_bound(pq, gen) * (1 + 1e-12) + 1e-300, omitted);
    }
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

TEST(QueryValidation, RejectsBadQueries) {
  Model m(thm1_like());
  EXPECT_THROW(PreparedQuery(m, {{"X"}, {}, {}}), InputError);
  EXPECT_THROW(PreparedQuery(m, {{}, {"A"}, {}}), InputError);
  EXPECT_THROW(PreparedQuery(m, {{"B"}, {}, {{{"B", "0"}}, {}}}), InputError);
  EXPECT_THROW(PreparedQuery(m, {{"Nope"}, {}, {}}), InputError);
  EXPECT_THROW(PreparedQuery(m, {{"B"}, {}, {{{"A", "7"}}, {}}}), InputError);
}

TEST(QueryFile, ParsesAndSerializes) {
  auto f = query_from_json(parse_json(R"({"q_discrete":["B"],"q_continuous":["X"],
      "evidence":{"continuous":{"Y":2.5}},"algorithm":"enum","budget":3,"seed":5})"));
  EXPECT_EQ(f.algorithm, Algorithm::enumeration);
  EXPECT_EQ(f.budget, 3u);
  EXPECT_TRUE(f.has_seed);
  Model m(thm1_like());
  auto r = answer(m, f.query, f.algorithm, f.budget, f.seed);
  auto j = result_to_json(r);
  EXPECT_EQ(j["entries"].size(), 2u);
  EXPECT_EQ(j["algorithm"], "enum");
  EXPECT_THROW(query_from_json(parse_json(R"({"algorithm":"magic"})")), InputError);
  EXPECT_THROW(query_from_json(parse_json(R"({"budget":0})")), ParseError);
}
