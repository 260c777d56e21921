#include <gtest/gtest.h>

#include <random>

#include "clg/gaussian.hpp"
#include "oracles.hpp"

using namespace clg;

namespace {

Network linear_pair() {
  Network n;
  n.nodes.push_back(Node::make_continuous("X", {}, {}, {{{}, 0.0, {}, 1.0}}));
  n.nodes.push_back(Node::make_continuous("Y", {}, {"X"}, {{{}, 1.0, {2.0}, 1.0}}));
  return n;
}

Mat random_psd(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> nd;
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = nd(rng);
  return a * a.transpose() + 0.5 * Mat::Identity(d, d);
}

GaussianDist random_gaussian(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> nd;
  GaussianDist g;
  for (int i = 0; i < d; ++i) g.scope.push_back("V" + std::to_string(i));
  g.mean = Vec(d);
  for (int i = 0; i < d; ++i) g.mean(i) = 2 * nd(rng);
  g.cov = random_psd(rng, d);
  return g;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST(Joint, LinearPairClosedForm) {
  Model m(linear_pair());
  auto g = joint_for_hypothesis(m, std::vector<int>(m.size(), -1));
  EXPECT_EQ(g.scope, (std::vector<std::string>{"X", "Y"}));
  EXPECT_NEAR(g.mean(0), 0.0, 1e-15);
  EXPECT_NEAR(g.mean(1), 1.0, 1e-15);
  EXPECT_NEAR(g.cov(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(g.cov(0, 1), 2.0, 1e-15);
  EXPECT_NEAR(g.cov(1, 1), 5.0, 1e-15);
}

TEST(Joint, MatchesMonteCarloMoments) {
  Model m(linear_pair());
  auto g = joint_for_hypothesis(m, std::vector<int>(m.size(), -1));
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd;
  const int n = 1000000;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    double x = nd(rng);
    double y = 1 + 2 * x + nd(rng);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  double mx = sx / n, my = sy / n;
  double vxx = sxx / n - mx * mx, vxy = sxy / n - mx * my, vyy = syy / n - my * my;
  // standard errors: mean sqrt(v/n); variance ~ sqrt(2 v^2 / n); covariance ~ sqrt((vxx vyy + vxy^2)/n)
  EXPECT_NEAR(mx, g.mean(0), 3 * std::sqrt(g.cov(0, 0) / n));
  EXPECT_NEAR(my, g.mean(1), 3 * std::sqrt(g.cov(1, 1) / n));
  EXPECT_NEAR(vxx, g.cov(0, 0), 3 * std::sqrt(2.0 / n) * g.cov(0, 0));
  EXPECT_NEAR(vyy, g.cov(1, 1), 3 * std::sqrt(2.0 / n) * g.cov(1, 1));
  EXPECT_NEAR(vxy, g.cov(0, 1), 3 * std::sqrt((g.cov(0, 0) * g.cov(1, 1) + g.cov(0, 1) * g.cov(0, 1)) / n));
}

TEST(Joint, NoContinuousParentsGivesDiagonal) {
  Network n;
  n.nodes.push_back(Node::make_discrete("A", {"a", "b"}, {}, {{0.5, 0.5}}));
  n.nodes.push_back(Node::make_continuous("X", {"A"}, {}, {{{"a"}, 1.0, {}, 2.0}, {{"b"}, 0.0, {}, 3.0}}));
  n.nodes.push_back(Node::make_continuous("Y", {}, {}, {{{}, 0.0, {}, 0.5}}));
  Model m(n);
  auto g = joint_for_hypothesis(m, {{"A", "b"}});
  EXPECT_DOUBLE_EQ(g.cov(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(g.cov(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(g.cov(0, 1), 0.0);
  EXPECT_THROW(joint_for_hypothesis(m, std::map<std::string, std::string>{}), InputError);
}

TEST(Joint, MatchesDenseLinearSystemAndIsPsd) {
  std::mt19937_64 rng(99);
  for (int it = 0; it < 40; ++it) {
    auto net = oracle::random_network(rng, {6, 6, 2, 3, 2});
    Model m(net);
    for (const auto& je : oracle::discrete_joint(m)) {
      auto g = joint_for_hypothesis(m, je.a);
      auto d = oracle::dense_joint(m, je.a);
      ASSERT_TRUE(is_psd(g.cov));
      for (std::size_t i = 0; i < g.dim(); ++i) {
        int di = static_cast<int>(std::find(d.nodes.begin(), d.nodes.end(), m.id(g.scope[i])) - d.nodes.begin());
        EXPECT_NEAR(g.mean(i), d.mean(di), 1e-9);
        for (std::size_t j = 0; j < g.dim(); ++j) {
          int dj = static_cast<int>(std::find(d.nodes.begin(), d.nodes.end(), m.id(g.scope[j])) - d.nodes.begin());
          EXPECT_NEAR(g.cov(i, j), d.cov(di, dj), 1e-9);
        }
      }
    }
  }
}

TEST(Condition, IndependentCoordinates) {
  GaussianDist g{{"a", "b"}, Vec::Zero(2), Mat::Identity(2, 2)};
  auto c = condition(g, {{"a", 5.0}});
  EXPECT_EQ(c.dist.scope, std::vector<std::string>{"b"});
  EXPECT_NEAR(c.dist.mean(0), 0.0, 1e-15);
  EXPECT_NEAR(c.dist.cov(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(c.log_density, log_normal_pdf(5.0, 0.0, 1.0), 1e-14);
  auto e = condition(g, {});
  EXPECT_EQ(e.log_density, 0.0);
  EXPECT_EQ(e.dist.scope, g.scope);
}

TEST(Condition, MatchesBlockInverseOracle) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int it = 0; it < 200; ++it) {
    auto g = random_gaussian(rng, 4);
    std::map<std::string, double> obs{{"V1", nd(rng)}, {"V3", nd(rng)}};
    auto c = condition(g, obs);
    // Oracle: precision-matrix form.
    Eigen::MatrixXd P = g.cov.inverse();
    std::vector<int> h{0, 2}, o{1, 3};
    Eigen::MatrixXd Phh(2, 2), Pho(2, 2);
    Eigen::VectorXd xo(2), mo(2), mh(2);
    for (int a = 0; a < 2; ++a) {
      xo(a) = obs.at(g.scope[o[a]]);
      mo(a) = g.mean(o[a]);
      mh(a) = g.mean(h[a]);
      for (int b = 0; b < 2; ++b) {
        Phh(a, b) = P(h[a], h[b]);
        Pho(a, b) = P(h[a], o[b]);
      }
    }
    Eigen::MatrixXd cov = Phh.inverse();
    Eigen::VectorXd mean = mh - cov * Pho * (xo - mo);
    for (int a = 0; a < 2; ++a) {
      EXPECT_LT(rel(c.dist.mean(a), mean(a)), 1e-9);
      for (int b = 0; b < 2; ++b) EXPECT_LT(rel(c.dist.cov(a, b), cov(a, b)), 1e-9);
    }
    // Density via marginalize + dense evaluation.
    auto mg = marginalize(g, {"V1", "V3"});
    double ld = oracle::dense_log_pdf(xo, mg.mean, mg.cov);
    EXPECT_LT(std::abs(c.log_density - ld) / std::max(1.0, std::abs(ld)), 1e-9);
    // condition then marginalize equals marginalize then condition.
    auto c2 = condition(marginalize(g, {"V0", "V1", "V3"}), obs);
    EXPECT_LT(rel(c2.dist.mean(0), c.dist.mean(0)), 1e-9);
    EXPECT_LT(rel(c2.dist.cov(0, 0), c.dist.cov(0, 0)), 1e-9);
  }
}

TEST(Condition, SingularBlockNamesTheBlock) {
  GaussianDist g{{"a", "b"}, Vec::Zero(2), Mat::Zero(2, 2)};
  try {
    condition(g, {{"a", 1.0}});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("a"), std::string::npos);
  }
}

TEST(Condition, TinyVariancesSurviveJitterPolicy) {
  GaussianDist g{{"a", "b"}, Vec::Zero(2), Mat::Identity(2, 2) * 1e-14};
  auto c = condition(g, {{"a", 0.0}});
  EXPECT_TRUE(std::isfinite(c.log_density));
}

TEST(Condition, UnknownIdThrows) {
  GaussianDist g{{"a"}, Vec::Zero(1), Mat::Identity(1, 1)};
  EXPECT_THROW(condition(g, {{"z", 1.0}}), InputError);
  EXPECT_THROW(marginalize(g, {"z"}), InputError);
}

TEST(Marginalize, IdentityAndPermutation) {
  std::mt19937_64 rng(8);
  auto g = random_gaussian(rng, 3);
  auto same = marginalize(g, g.scope);
  EXPECT_EQ(same.mean, g.mean);
  EXPECT_EQ(same.cov, g.cov);
  auto perm = marginalize(g, {"V2", "V0"});
  EXPECT_EQ(perm.mean(0), g.mean(2));
  EXPECT_EQ(perm.cov(0, 1), g.cov(2, 0));
  Model m(linear_pair());
  auto y = marginalize(joint_for_hypothesis(m, std::vector<int>(m.size(), -1)), {"Y"});
  EXPECT_DOUBLE_EQ(y.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(y.cov(0, 0), 5.0);
}

TEST(Collapse, SingleAndSymmetricPair) {
  GaussianDist a{{"x"}, Vec::Constant(1, -1.0), Mat::Identity(1, 1)};
  GaussianDist b{{"x"}, Vec::Constant(1, 1.0), Mat::Identity(1, 1)};
  auto one = collapse({{{-3.0, a}}});
  EXPECT_EQ(one.mean, a.mean);
  auto two = collapse({{{0.0, a}, {0.0, b}}});
  EXPECT_NEAR(two.mean(0), 0.0, 1e-15);
  EXPECT_NEAR(two.cov(0, 0), 2.0, 1e-15);
  EXPECT_THROW(collapse({{{kNegInf, a}}}), EmptyMixtureError);
  EXPECT_THROW(collapse({}), EmptyMixtureError);
}

TEST(Collapse, PreservesMomentsAndStreamingAgrees) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  for (int it = 0; it < 100; ++it) {
    GaussianMixture mix;
    for (int c = 0; c < 5; ++c) mix.components.push_back({3 * nd(rng), random_gaussian(rng, 3)});
    auto g = collapse(mix);
    std::vector<double> lw;
    for (auto& c : mix.components) lw.push_back(c.log_weight);
    auto w = log_normalize(lw);
    Vec m1 = Vec::Zero(3);
    Mat m2 = Mat::Zero(3, 3);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const auto& d = mix.components[i].dist;
      m1 += std::exp(w[i]) * d.mean;
      m2 += std::exp(w[i]) * (d.cov + d.mean * d.mean.transpose());
    }
    Mat second = g.cov + g.mean * g.mean.transpose();
    for (int i = 0; i < 3; ++i) {
      EXPECT_LT(rel(g.mean(i), m1(i)), 1e-9);
      for (int j = 0; j < 3; ++j) EXPECT_LT(rel(second(i, j), m2(i, j)), 1e-9);
    }
    MomentAccumulator acc;
    for (auto& c : mix.components) acc.add(c.log_weight, c.dist.mean, c.dist.cov);
    EXPECT_LT(rel(acc.log_total(), log_sum_exp(lw)), 1e-12);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_LT(rel(acc.cov()(i, j), g.cov(i, j)), 1e-9);
  }
}

TEST(Collapse, MatchesMonteCarlo) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  GaussianMixture mix;
  for (int c = 0; c < 5; ++c) mix.components.push_back({nd(rng), random_gaussian(rng, 3)});
  auto g = collapse(mix);
  std::vector<double> lw;
  for (auto& c : mix.components) lw.push_back(c.log_weight);
  auto w = log_normalize(lw);
  std::vector<double> p;
  for (double x : w) p.push_back(std::exp(x));
  std::discrete_distribution<int> pick(p.begin(), p.end());
  std::vector<Eigen::LLT<Mat>> chol;
  for (auto& c : mix.components) chol.emplace_back(c.dist.cov);
  const int n = 1000000;
  Vec s1 = Vec::Zero(3);
  Mat s2 = Mat::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    int k = pick(rng);
    Vec z(3);
    for (int j = 0; j < 3; ++j) z(j) = nd(rng);
    Vec x = mix.components[k].dist.mean + chol[k].matrixL() * z;
    s1 += x;
    s2 += x * x.transpose();
  }
  Vec mean = s1 / n;
  Mat cov = s2 / n - mean * mean.transpose();
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(mean(i), g.mean(i), 4 * std::sqrt(g.cov(i, i) / n));
    EXPECT_NEAR(cov(i, i), g.cov(i, i), 0.02 * g.cov(i, i));
  }
}

TEST(LogNormalize, BasicsAndShiftInvariance) {
  auto a = log_normalize({0.0, 0.0});
  EXPECT_NEAR(a[0], std::log(0.5), 1e-15);
  EXPECT_EQ(log_normalize({-1234.5})[0], 0.0);
  EXPECT_THROW(log_normalize({kNegInf, kNegInf}), EmptyMixtureError);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int it = 0; it < 100; ++it) {
    std::vector<double> v(6), s(6);
    double c = 100 * nd(rng);
    for (int i = 0; i < 6; ++i) {
      v[i] = 5 * nd(rng);
      s[i] = v[i] + c;
    }
    auto x = log_normalize(v), y = log_normalize(s);
    double sum = 0;
    for (int i = 0; i < 6; ++i) {
      EXPECT_NEAR(x[i], y[i], 1e-12);
      sum += std::exp(x[i]);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}
