#pragma once

// Independent reference computations for the test suites. Nothing in here
// uses the library's inference code; only the data types are shared.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "clg/model.hpp"

namespace oracle {

using clg::Network;
using clg::Node;

struct RandomNetSpec {
  int discrete = 6;
  int continuous = 3;
  int max_dparents = 2;
  int max_cparents = 2;
  int max_card = 2;
  bool polytree = false;
  bool sparse_cpts = false;  // sprinkle exact zeros into CPTs
};

inline std::vector<double> random_row(std::mt19937_64& rng, int card, bool sparse) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> row(card);
  double s = 0;
  for (int i = 0; i < card; ++i) {
    row[i] = u(rng);
    if (sparse && i > 0 && u(rng) < 0.2) row[i] = 0.0;
    s += row[i];
  }
  for (double& x : row) x /= s;
  return row;
}

/// Random valid CLG network. Discrete nodes are D0.., continuous X0...
inline Network random_network(std::mt19937_64& rng, const RandomNetSpec& spec) {
  Network net;
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0), var(0.3, 2.0);
  std::vector<std::string> dnames, cnames;
  std::vector<int> dcards;
  // Union-find over node names to keep the skeleton a forest when asked.
  std::map<std::string, std::string> uf;
  auto find = [&](std::string x) {
    while (uf[x] != x) x = uf[x];
    return x;
  };
  auto try_link = [&](const std::string& a, const std::string& b) {
    if (!spec.polytree) return true;
    auto ra = find(a), rb = find(b);
    if (ra == rb) return false;
    uf[ra] = rb;
    return true;
  };
  auto pick_parents = [&](const std::vector<std::string>& pool, int maxp, const std::string& child) {
    std::vector<std::string> out;
    if (pool.empty()) return out;
    std::uniform_int_distribution<int> cnt(0, maxp), idx(0, static_cast<int>(pool.size()) - 1);
    int k = cnt(rng);
    for (int t = 0; t < k; ++t) {
      const auto& p = pool[idx(rng)];
      if (std::find(out.begin(), out.end(), p) != out.end()) continue;
      if (!try_link(p, child)) continue;
      out.push_back(p);
    }
    return out;
  };
  for (int i = 0; i < spec.discrete; ++i) {
    std::string name = "D" + std::to_string(i);
    uf[name] = name;
    std::uniform_int_distribution<int> cd(2, spec.max_card);
    int card = cd(rng);
    std::vector<std::string> states;
    for (int s = 0; s < card; ++s) states.push_back("s" + std::to_string(s));
    auto parents = pick_parents(dnames, spec.max_dparents, name);
    std::size_t rows = 1;
    for (const auto& p : parents) rows *= dcards[std::find(dnames.begin(), dnames.end(), p) - dnames.begin()];
    std::vector<std::vector<double>> cpt;
    for (std::size_t r = 0; r < rows; ++r) cpt.push_back(random_row(rng, card, spec.sparse_cpts));
    net.nodes.push_back(Node::make_discrete(name, states, parents, cpt));
    dnames.push_back(name);
    dcards.push_back(card);
  }
  for (int i = 0; i < spec.continuous; ++i) {
    std::string name = "X" + std::to_string(i);
    uf[name] = name;
    auto dps = pick_parents(dnames, spec.max_dparents, name);
    auto cps = pick_parents(cnames, spec.max_cparents, name);
    std::vector<clg::ClgEntry> entries;
    std::vector<int> cards;
    for (const auto& p : dps) cards.push_back(dcards[std::find(dnames.begin(), dnames.end(), p) - dnames.begin()]);
    std::vector<int> digit(cards.size(), 0);
    while (true) {
      clg::ClgEntry e;
      for (int d : digit) e.assignment.push_back("s" + std::to_string(d));
      e.intercept = 3.0 * u(rng);
      for (std::size_t j = 0; j < cps.size(); ++j) e.coeffs.push_back(u(rng));
      e.variance = var(rng);
      entries.push_back(e);
      int k = static_cast<int>(digit.size()) - 1;
      while (k >= 0 && ++digit[k] == cards[k]) digit[k--] = 0;
      if (k < 0) break;
    }
    net.nodes.push_back(Node::make_continuous(name, dps, cps, entries));
    cnames.push_back(name);
  }
  return net;
}

/// Every joint assignment of the discrete nodes (node-id indexed vectors,
/// continuous entries -1) with its prior probability.
struct JointEntry {
  std::vector<int> a;
  double p;
};

inline std::vector<JointEntry> discrete_joint(const clg::Model& m) {
  std::vector<JointEntry> out;
  const auto& d = m.discrete_ids();
  std::vector<int> a(m.size(), -1);
  for (int v : d) a[v] = 0;
  while (true) {
    double p = 1.0;
    for (int v : d) {
      const auto& n = m.node(v);
      std::size_t row = 0;
      for (int par : n.dparents) row = row * m.card(par) + a[par];
      p *= n.cpt[row * n.card + a[v]];
    }
    out.push_back({a, p});
    int k = static_cast<int>(d.size()) - 1;
    while (k >= 0 && ++a[d[k]] == m.card(d[k])) a[d[k--]] = 0;
    if (k < 0) break;
  }
  return out;
}

/// Dense Gaussian for one full discrete assignment, built by sampling-free
/// linear-map algebra: X = B X + c + e  =>  X = (I - B)^{-1}(c + e).
struct DenseGaussian {
  std::vector<int> nodes;  // continuous node ids in declaration order
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline DenseGaussian dense_joint(const clg::Model& m, const std::vector<int>& a) {
  DenseGaussian g;
  g.nodes = m.continuous_ids();
  const int n = static_cast<int>(g.nodes.size());
  std::map<int, int> pos;
  for (int i = 0; i < n; ++i) pos[g.nodes[i]] = i;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd c(n);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& node = m.node(g.nodes[i]);
    std::size_t row = 0;
    for (int par : node.dparents) row = row * m.card(par) + a[par];
    const auto& lg = node.clg[row];
    c(i) = lg.intercept;
    D(i, i) = lg.variance;
    for (std::size_t j = 0; j < node.cparents.size(); ++j) B(i, pos[node.cparents[j]]) = lg.coeffs[j];
  }
  Eigen::MatrixXd T = (Eigen::MatrixXd::Identity(n, n) - B).inverse();
  g.mean = T * c;
  g.cov = T * D * T.transpose();
  return g;
}

inline double dense_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& S) {
  const double k = static_cast<double>(x.size());
  Eigen::VectorXd r = x - mu;
  return -0.5 * (k * std::log(2 * M_PI) + std::log(S.determinant()) + r.dot(S.inverse() * r));
}

/// Brute-force posterior over the joint of query discrete nodes given
/// discrete and continuous evidence, plus per-q conditional moments of the
/// query continuous nodes (mixture moments).
struct BruteAnswer {
  std::map<std::vector<int>, double> prob;  // q-state tuple -> probability
  std::map<std::vector<int>, Eigen::VectorXd> mean;
  std::map<std::vector<int>, Eigen::MatrixXd> cov;
};

inline BruteAnswer brute_force(const clg::Model& m, const std::vector<int>& qd, const std::vector<int>& qc,
                               const std::map<int, int>& dev, const std::map<int, double>& cev) {
  BruteAnswer ans;
  struct Acc {
    double w = 0;
    std::vector<std::pair<double, std::pair<Eigen::VectorXd, Eigen::MatrixXd>>> comps;
  };
  std::map<std::vector<int>, Acc> acc;
  for (const auto& je : discrete_joint(m)) {
    bool ok = true;
    for (const auto& [v, s] : dev) ok = ok && je.a[v] == s;
    if (!ok || je.p == 0.0) continue;
    double w = je.p;
    auto g = dense_joint(m, je.a);
    std::vector<int> oi, hi;
    for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
      if (cev.count(g.nodes[i]))
        oi.push_back(i);
      else
        hi.push_back(i);
    }
    Eigen::VectorXd mu = g.mean;
    Eigen::MatrixXd S = g.cov;
    if (!oi.empty()) {
      const int no = static_cast<int>(oi.size()), nh = static_cast<int>(hi.size());
      Eigen::MatrixXd Soo(no, no), Sho(nh, no), Shh(nh, nh);
      Eigen::VectorXd mo(no), mh(nh), x(no);
      for (int a = 0; a < no; ++a) {
        mo(a) = g.mean(oi[a]);
        x(a) = cev.at(g.nodes[oi[a]]);
        for (int b = 0; b < no; ++b) Soo(a, b) = g.cov(oi[a], oi[b]);
      }
      for (int a = 0; a < nh; ++a) {
        mh(a) = g.mean(hi[a]);
        for (int b = 0; b < no; ++b) Sho(a, b) = g.cov(hi[a], oi[b]);
        for (int b = 0; b < nh; ++b) Shh(a, b) = g.cov(hi[a], hi[b]);
      }
      w *= std::exp(dense_log_pdf(x, mo, Soo));
      Eigen::MatrixXd K = Sho * Soo.inverse();
      Eigen::VectorXd mc = mh + K * (x - mo);
      Eigen::MatrixXd Sc = Shh - K * Sho.transpose();
      mu = Eigen::VectorXd::Zero(g.nodes.size());
      S = Eigen::MatrixXd::Zero(g.nodes.size(), g.nodes.size());
      for (int a = 0; a < nh; ++a) {
        mu(hi[a]) = mc(a);
        for (int b = 0; b < nh; ++b) S(hi[a], hi[b]) = Sc(a, b);
      }
    }
    const int nq = static_cast<int>(qc.size());
    Eigen::VectorXd qm(nq);
    Eigen::MatrixXd qS(nq, nq);
    for (int a = 0; a < nq; ++a) {
      int ia = static_cast<int>(std::find(g.nodes.begin(), g.nodes.end(), qc[a]) - g.nodes.begin());
      qm(a) = mu(ia);
      for (int b = 0; b < nq; ++b) {
        int ib = static_cast<int>(std::find(g.nodes.begin(), g.nodes.end(), qc[b]) - g.nodes.begin());
        qS(a, b) = S(ia, ib);
      }
    }
    std::vector<int> key;
    for (int v : qd) key.push_back(je.a[v]);
    auto& ac = acc[key];
    ac.w += w;
    ac.comps.push_back({w, {qm, qS}});
  }
  double total = 0;
  for (auto& [k, a] : acc) total += a.w;
  for (auto& [k, a] : acc) {
    ans.prob[k] = a.w / total;
    const int nq = static_cast<int>(qc.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(nq);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(nq, nq);
    if (a.w > 0) {
      for (auto& [w, mc] : a.comps) mean += (w / a.w) * mc.first;
      for (auto& [w, mc] : a.comps) {
        Eigen::VectorXd d = mc.first - mean;
        second += (w / a.w) * (mc.second + d * d.transpose());
      }
    }
    ans.mean[k] = mean;
    ans.cov[k] = second;
  }
  return ans;
}

}  // namespace oracle
