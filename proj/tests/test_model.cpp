#include <gtest/gtest.h>

#include <random>

#include "clg/model.hpp"
#include "oracles.hpp"

using namespace clg;

namespace {

Network chain3() {
  Network n;
  n.nodes.push_back(Node::make_discrete("A", {"a0", "a1"}, {}, {{0.3, 0.7}}));
  n.nodes.push_back(Node::make_discrete("B", {"b0", "b1"}, {"A"}, {{0.9, 0.1}, {0.2, 0.8}}));
  n.nodes.push_back(Node::make_discrete("C", {"c0", "c1"}, {"B"}, {{0.5, 0.5}, {0.4, 0.6}}));
  return n;
}

Network mixed() {
  Network n = chain3();
  n.nodes.push_back(Node::make_discrete("U", {"u0", "u1"}, {}, {{0.5, 0.5}}));
  n.nodes.push_back(Node::make_continuous("X", {"A"}, {}, {{{"a0"}, 0.0, {}, 1.0}, {{"a1"}, 2.0, {}, 1.0}}));
  n.nodes.push_back(Node::make_continuous("Y", {}, {"X"}, {{{}, 1.0, {2.0}, 1.0}}));
  return n;
}

}  // namespace

TEST(Validate, AcceptsWellFormedNetworks) {
  EXPECT_TRUE(validate(chain3()).ok());
  EXPECT_TRUE(validate(mixed()).ok());
  EXPECT_TRUE(validate(Network{}).ok());
}

TEST(Validate, UnnormalizedRowIsReported) {
  Network n;
  n.nodes.push_back(Node::make_discrete("A", {"a0", "a1"}, {}, {{0.5, 0.6}}));
  auto rep = validate(n);
  ASSERT_TRUE(rep.has(ViolationKind::unnormalized_row));
  EXPECT_NE(rep.to_string().find("row sums to 1.1"), std::string::npos) << rep.to_string();
}

TEST(Validate, ContinuousParentOfDiscreteIsIllegal) {
  Network n;
  n.nodes.push_back(Node::make_continuous("X", {}, {}, {{{}, 0.0, {}, 1.0}}));
  n.nodes.push_back(Node::make_discrete("A", {"a0", "a1"}, {"X"}, {{0.5, 0.5}}));
  auto rep = validate(n);
  ASSERT_TRUE(rep.has(ViolationKind::illegal_parent_kind));
  EXPECT_NE(rep.to_string().find("illegal parent kind"), std::string::npos);
}

TEST(Validate, CyclesDanglingAndVariance) {
  Network n;
  n.nodes.push_back(Node::make_discrete("A", {"a0", "a1"}, {"B"}, {{0.5, 0.5}, {0.5, 0.5}}));
  n.nodes.push_back(Node::make_discrete("B", {"b0", "b1"}, {"A"}, {{0.5, 0.5}, {0.5, 0.5}}));
  EXPECT_TRUE(validate(n).has(ViolationKind::cycle));

  Network d;
  d.nodes.push_back(Node::make_discrete("A", {"a0", "a1"}, {"Nope"}, {{0.5, 0.5}}));
  EXPECT_TRUE(validate(d).has(ViolationKind::dangling_reference));

  Network v;
  v.nodes.push_back(Node::make_continuous("X", {}, {}, {{{}, 0.0, {}, 0.0}}));
  EXPECT_TRUE(validate(v).has(ViolationKind::nonpositive_variance));
}

TEST(Validate, ClgCoverageMustBeBijective) {
  Network n = mixed();
  n.nodes[4].clg.pop_back();
  EXPECT_TRUE(validate(n).has(ViolationKind::clg_coverage));
  Network m = mixed();
  m.nodes[4].clg.push_back(m.nodes[4].clg.front());
  EXPECT_FALSE(validate(m).ok());
  Network c = mixed();
  c.nodes[5].clg[0].coeffs.push_back(1.0);
  EXPECT_TRUE(validate(c).has(ViolationKind::coefficient_count));
}

TEST(TopologicalOrder, ChainAndSingle) {
  Network one;
  one.nodes.push_back(Node::make_discrete("A", {"a0", "a1"}, {}, {{0.5, 0.5}}));
  EXPECT_EQ(topological_order(one), std::vector<std::string>{"A"});
  EXPECT_EQ(topological_order(chain3()), (std::vector<std::string>{"A", "B", "C"}));
}

TEST(TopologicalOrder, TiesFollowDeclarationOrder) {
  Network n;
  n.nodes.push_back(Node::make_discrete("Z", {"a", "b"}, {"Q"}, {{0.5, 0.5}, {0.5, 0.5}}));
  n.nodes.push_back(Node::make_discrete("Y", {"a", "b"}, {}, {{0.5, 0.5}}));
  n.nodes.push_back(Node::make_discrete("Q", {"a", "b"}, {}, {{0.5, 0.5}}));
  EXPECT_EQ(topological_order(n), (std::vector<std::string>{"Y", "Q", "Z"}));
}

TEST(TopologicalOrder, CycleThrows) {
  Network n;
  n.nodes.push_back(Node::make_discrete("A", {"a0", "a1"}, {"B"}, {{0.5, 0.5}, {0.5, 0.5}}));
  n.nodes.push_back(Node::make_discrete("B", {"b0", "b1"}, {"A"}, {{0.5, 0.5}, {0.5, 0.5}}));
  EXPECT_THROW(topological_order(n), StructuralError);
}

TEST(TopologicalOrder, RandomNetworksRespectEveryEdge) {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 50; ++it) {
    auto net = oracle::random_network(rng, {8, 5, 3, 3, 3});
    auto order = topological_order(net);
    ASSERT_EQ(order.size(), net.nodes.size());
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (const auto& n : net.nodes)
      for (const auto& p : n.all_parents()) EXPECT_LT(pos[p], pos[n.name]);
  }
}

TEST(DirectDiscreteParents, Basic) {
  EXPECT_TRUE(direct_discrete_parents(chain3()).empty());
  EXPECT_EQ(direct_discrete_parents(mixed()), std::vector<std::string>{"A"});
}

TEST(DirectDiscreteParents, EdgeScanProperty) {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 50; ++it) {
    auto net = oracle::random_network(rng, {7, 4});
    auto dp = direct_discrete_parents(net);
    std::set<std::string> expected;
    for (const auto& n : net.nodes)
      if (n.kind == NodeKind::continuous) expected.insert(n.discrete_parents.begin(), n.discrete_parents.end());
    EXPECT_EQ(std::set<std::string>(dp.begin(), dp.end()), expected);
    for (const auto& name : dp) EXPECT_EQ(net.find(name)->kind, NodeKind::discrete);
  }
}

TEST(Model, CompilesIndexedView) {
  Model m(mixed());
  EXPECT_EQ(m.size(), 6u);
  EXPECT_EQ(m.discrete_ids().size(), 4u);
  EXPECT_EQ(m.continuous_topo(), (std::vector<int>{4, 5}));
  EXPECT_EQ(m.state_index(m.id("B"), "b1"), 1);
  EXPECT_DOUBLE_EQ(m.cpt(m.id("B"), 1, 1), 0.8);
  EXPECT_TRUE(m.is_polytree());
  EXPECT_THROW(m.id("nope"), InputError);
  auto anc = m.ancestral_closure({m.id("Y")});
  EXPECT_TRUE(anc[m.id("A")] && anc[m.id("X")] && anc[m.id("Y")]);
  EXPECT_FALSE(anc[m.id("B")] || anc[m.id("U")]);
}

TEST(Model, RejectsInvalidNetworks) {
  Network n;
  n.nodes.push_back(Node::make_discrete("A", {"a0", "a1"}, {}, {{0.5, 0.6}}));
  EXPECT_THROW(Model{n}, InputError);
}

TEST(Model, EvidenceChecks) {
  Model m(mixed());
  EXPECT_NO_THROW(check_evidence(m, {{{"A", "a1"}}, {{"Y", 1.0}}}));
  EXPECT_THROW(check_evidence(m, {{{"A", "zz"}}, {}}), InputError);
  EXPECT_THROW(check_evidence(m, {{{"X", "a1"}}, {}}), InputError);
  EXPECT_THROW(check_evidence(m, {{}, {{"A", 1.0}}}), InputError);
}
