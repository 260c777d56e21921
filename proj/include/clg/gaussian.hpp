#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clg/errors.hpp"
#include "clg/model.hpp"

namespace clg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Multivariate Gaussian over an ordered scope of continuous node names.
struct GaussianDist {
  std::vector<std::string> scope;
  Vec mean;
  Mat cov;

  std::size_t dim() const { return scope.size(); }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < scope.size(); ++i)
      if (scope[i] == name) return static_cast<int>(i);
    return -1;
  }
};

struct WeightedGaussian {
  double log_weight = 0.0;
  GaussianDist dist;
};

/// Components share one scope; weights are in log space and need not be
/// normalized until normalize() is called.
struct GaussianMixture {
  std::vector<WeightedGaussian> components;

  bool empty() const { return components.empty(); }
};

// ---------------------------------------------------------------------------
// log-space weights

inline double log_sum_exp(const std::vector<double>& v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

/// Shifts log weights so that their exponentials sum to one.
inline std::vector<double> log_normalize(const std::vector<double>& w) {
  double z = log_sum_exp(w);
  if (z == kNegInf) throw EmptyMixtureError("log_normalize: every weight is zero");
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] - z;
  return out;
}

inline void symmetrize(Mat& m) { m = 0.5 * (m + m.transpose()).eval(); }

// ---------------------------------------------------------------------------
// checks and densities

/// Symmetric within tol and positive semidefinite (smallest eigenvalue
/// >= -tol, scaled by the matrix magnitude).
inline bool is_psd(const Mat& cov, double tol = 1e-9) {
  if (cov.rows() != cov.cols()) return false;
  if (cov.size() == 0) return true;
  double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Mat> es(cov, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

namespace gauss_detail {

/// Cholesky of a symmetric block with trace-scaled jitter escalation
/// 1e-12 .. 1e-6. Throws NumericalError naming the block when it fails.
inline Eigen::LLT<Mat> robust_cholesky(const Mat& block, const std::vector<std::string>& names) {
  Eigen::LLT<Mat> llt(block);
  auto good = [&](const Eigen::LLT<Mat>& f) {
    if (f.info() != Eigen::Success) return false;
    const auto& l = f.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i)
      if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return false;
    return true;
  };
  if (good(llt)) return llt;
  double s = block.trace() / static_cast<double>(std::max<Eigen::Index>(1, block.rows()));
  for (double j = 1e-12; s > 0.0 && std::isfinite(s) && j <= 1e-6 * 1.0000001; j *= 10.0) {
    Mat b = block;
    b.diagonal().array() += j * s;
    llt.compute(b);
    if (good(llt)) return llt;
  }
  std::string lbl;
  for (const auto& n : names) lbl += (lbl.empty() ? "" : ",") + n;
  throw NumericalError("observed covariance block {" + lbl + "} is singular after jitter");
}

inline double log_density_chol(const Eigen::LLT<Mat>& llt, const Vec& resid) {
  const auto& l = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
  Vec z = llt.matrixL().solve(resid);
  return -0.5 * (static_cast<double>(resid.size()) * kLog2Pi + logdet + z.squaredNorm());
}

}  // namespace gauss_detail

/// Log density of a full-scope point.
inline double log_pdf(const GaussianDist& g, const Vec& x) {
  auto llt = gauss_detail::robust_cholesky(g.cov, g.scope);
  return gauss_detail::log_density_chol(llt, x - g.mean);
}

inline double log_normal_pdf(double x, double mean, double var) {
  double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
}

// ---------------------------------------------------------------------------
// marginalize / condition

inline GaussianDist marginalize(const GaussianDist& g, const std::vector<std::string>& keep) {
  if (keep.empty()) throw InputError("marginalize: empty keep set");
  std::vector<int> idx;
  for (const auto& k : keep) {
    int i = g.index_of(k);
    if (i < 0) throw InputError("marginalize: '" + k + "' not in scope");
    idx.push_back(i);
  }
  GaussianDist out;
  out.scope = keep;
  const auto n = static_cast<Eigen::Index>(idx.size());
  out.mean.resize(n);
  out.cov.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    out.mean(a) = g.mean(idx[a]);
    for (Eigen::Index b = 0; b < n; ++b) out.cov(a, b) = g.cov(idx[a], idx[b]);
  }
  return out;
}

struct Conditioned {
  GaussianDist dist;          // over scope minus observed, original order
  double log_density = 0.0;   // log marginal density of the observation
};

inline Conditioned condition(const GaussianDist& g, const std::map<std::string, double>& obs) {
  if (obs.empty()) return {g, 0.0};
  std::vector<int> ob, hid;
  std::vector<char> observed(g.dim(), 0);
  std::vector<std::string> obs_names;
  Vec x(static_cast<Eigen::Index>(obs.size()));
  for (const auto& [name, value] : obs) {
    int i = g.index_of(name);
    if (i < 0) throw InputError("condition: '" + name + "' not in scope");
    observed[i] = 1;
  }
  // Observation order follows scope order.
  for (std::size_t i = 0; i < g.dim(); ++i) {
    if (observed[i]) {
      x(static_cast<Eigen::Index>(ob.size())) = obs.at(g.scope[i]);
      ob.push_back(static_cast<int>(i));
      obs_names.push_back(g.scope[i]);
    } else {
      hid.push_back(static_cast<int>(i));
    }
  }
  const auto no = static_cast<Eigen::Index>(ob.size());
  const auto nh = static_cast<Eigen::Index>(hid.size());
  Mat soo(no, no), sho(nh, no), shh(nh, nh);
  Vec mo(no), mh(nh);
  for (Eigen::Index a = 0; a < no; ++a) {
    mo(a) = g.mean(ob[a]);
    for (Eigen::Index b = 0; b < no; ++b) soo(a, b) = g.cov(ob[a], ob[b]);
  }
  for (Eigen::Index a = 0; a < nh; ++a) {
    mh(a) = g.mean(hid[a]);
    for (Eigen::Index b = 0; b < no; ++b) sho(a, b) = g.cov(hid[a], ob[b]);
    for (Eigen::Index b = 0; b < nh; ++b) shh(a, b) = g.cov(hid[a], hid[b]);
  }
  auto llt = gauss_detail::robust_cholesky(soo, obs_names);
  Vec resid = x - mo;
  Conditioned out;
  out.log_density = gauss_detail::log_density_chol(llt, resid);
  for (int h : hid) out.dist.scope.push_back(g.scope[h]);
  if (nh > 0) {
    // K = S_ho S_oo^{-1}
    Mat kt = llt.solve(sho.transpose());
    out.dist.mean = mh + kt.transpose() * resid;
    out.dist.cov = shh - sho * kt;
    symmetrize(out.dist.cov);
  } else {
    out.dist.mean.resize(0);
    out.dist.cov.resize(0, 0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// moment matching

/// Streaming moment-matched collapse. Components are folded in one at a
/// time with a centered update, so the mixture never has to be stored.
class MomentAccumulator {
 public:
  MomentAccumulator() = default;

  void add(double log_w, const Vec& mean, const Mat& cov) {
    if (log_w == kNegInf) return;
    if (log_total_ == kNegInf) {
      log_total_ = log_w;
      mean_ = mean;
      cov_ = cov;
      return;
    }
    double new_total = log_add(log_total_, log_w);
    double a = std::exp(log_w - new_total);
    Vec d = mean - mean_;
    mean_ += a * d;
    cov_ = (1.0 - a) * cov_ + a * cov + (a * (1.0 - a)) * (d * d.transpose());
    symmetrize(cov_);
    log_total_ = new_total;
  }

  void merge(const MomentAccumulator& other) {
    if (other.log_total_ == kNegInf) return;
    add(other.log_total_, other.mean_, other.cov_);
  }

  bool empty() const { return log_total_ == kNegInf; }
  double log_total() const { return log_total_; }
  const Vec& mean() const { return mean_; }
  const Mat& cov() const { return cov_; }

 private:
  double log_total_ = kNegInf;
  Vec mean_;
  Mat cov_;
};

/// Single Gaussian with the mixture's first and second moments.
inline GaussianDist collapse(const GaussianMixture& m) {
  std::vector<double> lw;
  for (const auto& c : m.components) lw.push_back(c.log_weight);
  if (lw.empty() || log_sum_exp(lw) == kNegInf)
    throw EmptyMixtureError("collapse: mixture has no component with positive weight");
  auto w = log_normalize(lw);
  const auto& scope = m.components.front().dist.scope;
  for (const auto& c : m.components)
    if (c.dist.scope != scope) throw InputError("collapse: components have different scopes");
  if (m.components.size() == 1) return m.components.front().dist;
  const auto d = static_cast<Eigen::Index>(scope.size());
  Vec mean = Vec::Zero(d);
  for (std::size_t i = 0; i < w.size(); ++i) mean += std::exp(w[i]) * m.components[i].dist.mean;
  Mat cov = Mat::Zero(d, d);
  for (std::size_t i = 0; i < w.size(); ++i) {
    Vec dm = m.components[i].dist.mean - mean;
    cov += std::exp(w[i]) * (m.components[i].dist.cov + dm * dm.transpose());
  }
  symmetrize(cov);
  return GaussianDist{scope, mean, cov};
}

// ---------------------------------------------------------------------------
// hypothesis joint

/// Joint Gaussian over continuous nodes for one discrete instantiation.
/// `assignment` is indexed by node id; only the discrete parents of the
/// included continuous nodes are read (-1 marks "unassigned"). `include`
/// optionally restricts the scope to an ancestrally closed node set; the
/// scope is in topological order.
inline GaussianDist joint_for_hypothesis(const Model& m, const std::vector<int>& assignment,
                                         const std::vector<bool>* include = nullptr) {
  std::vector<int> nodes;
  for (int v : m.continuous_topo())
    if (!include || (*include)[v]) nodes.push_back(v);
  const auto d = static_cast<Eigen::Index>(nodes.size());
  std::vector<int> pos(m.size(), -1);
  for (Eigen::Index k = 0; k < d; ++k) pos[nodes[k]] = static_cast<int>(k);

  GaussianDist g;
  g.mean = Vec::Zero(d);
  g.cov = Mat::Zero(d, d);
  g.scope.reserve(nodes.size());
  std::vector<int> pidx;
  for (Eigen::Index k = 0; k < d; ++k) {
    const int v = nodes[k];
    const auto& node = m.node(v);
    g.scope.push_back(node.name);
    for (int p : node.dparents)
      if (assignment[p] < 0)
        throw InputError("hypothesis does not assign '" + m.name(p) + "', parent of '" + node.name + "'");
    const LinearGaussian& lg = node.clg[m.parent_row(v, assignment)];
    pidx.clear();
    for (int p : node.cparents) {
      if (pos[p] < 0) throw InputError("scope of '" + node.name + "' is not ancestrally closed");
      pidx.push_back(pos[p]);
    }
    double mu = lg.intercept;
    for (std::size_t j = 0; j < pidx.size(); ++j) mu += lg.coeffs[j] * g.mean(pidx[j]);
    g.mean(k) = mu;
    // Cov(X, Z) = a^T Cov(parents, Z) for earlier Z
    for (Eigen::Index z = 0; z < k; ++z) {
      double c = 0.0;
      for (std::size_t j = 0; j < pidx.size(); ++j) c += lg.coeffs[j] * g.cov(pidx[j], z);
      g.cov(k, z) = c;
      g.cov(z, k) = c;
    }
    double var = lg.variance;
    for (std::size_t j = 0; j < pidx.size(); ++j) var += lg.coeffs[j] * g.cov(k, pidx[j]);
    g.cov(k, k) = var;
  }
  return g;
}

/// Name-keyed convenience form.
inline GaussianDist joint_for_hypothesis(const Model& m, const std::map<std::string, std::string>& delta) {
  std::vector<int> a(m.size(), -1);
  for (const auto& [name, state] : delta) {
    int id = m.id(name);
    if (!m.is_discrete(id)) throw InputError("'" + name + "' is not discrete");
    a[id] = m.state_index(id, state);
  }
  return joint_for_hypothesis(m, a);
}

}  // namespace clg
