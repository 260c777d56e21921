#pragma once

// Benchmark network generators: subset-sum reductions and the N-tank
// fault-diagnosis two-slice network.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "clg/errors.hpp"
#include "clg/io.hpp"
#include "clg/model.hpp"
#include "clg/two_slice.hpp"

namespace clg {

// ---------------------------------------------------------------- subset sum

struct SubsetSumInstance {
  std::vector<long long> s;
  long long L = 1;
  double C = 2.0;
  double eps = 0.0;        // <= 0 selects eps = sigma
  double prior_zero = 0.5;  // P(A_i = 0)

  int n() const { return static_cast<int>(s.size()); }
  long long total() const { return std::accumulate(s.begin(), s.end(), 0LL); }
  double sigma2() const { return 1.0 / (2.0 * C * n() * (n() + 1)); }
  double sigma() const { return std::sqrt(sigma2()); }
  double epsilon() const { return eps > 0 ? eps : sigma(); }

  void check() const {
    if (s.empty()) throw InputError("subset-sum instance: need at least one element");
    for (auto v : s)
      if (v < 0) throw InputError("subset-sum instance: elements must be nonnegative");
    if (L <= 0) throw InputError("subset-sum instance: L must be positive");
    if (!(C >= 2.0)) throw InputError("subset-sum instance: C must be at least 2");
    if (!(prior_zero > 0.0 && prior_zero < 1.0)) throw InputError("subset-sum instance: prior_zero must lie in (0,1)");
  }
};

/// Sum of the elements selected by a 0/1 assignment.
inline long long subset_sum(const std::vector<long long>& s, const std::vector<int>& a) {
  long long t = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (a[i]) t += s[i];
  return t;
}

/// Dynamic-programming decision: does some subset of s sum to L?
inline bool has_subset_sum(const std::vector<long long>& s, long long L) {
  if (L < 0) return false;
  std::vector<char> reach(static_cast<std::size_t>(L) + 1, 0);
  reach[0] = 1;
  for (auto v : s)
    for (long long t = L; t >= v; --t)
      if (reach[t - v]) reach[t] = 1;
  return reach[L] != 0;
}

inline std::vector<std::string> indexed(const std::string& prefix, int from, int to) {
  std::vector<std::string> out;
  for (int i = from; i <= to; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

namespace bench_detail {

inline Node binary(const std::string& name, double p0) {
  return Node::make_discrete(name, {"0", "1"}, {}, {{p0, 1.0 - p0}});
}

inline Node y_node(const SubsetSumInstance& in, const std::string& xn, double var1) {
  double far = static_cast<double>(in.L) - std::sqrt(2.0 * in.n());
  return Node::make_continuous("Y", {"B"}, {xn},
                               {ClgEntry{{"0"}, far, {0.0}, 1.0}, ClgEntry{{"1"}, 0.0, {1.0}, var1}});
}

}  // namespace bench_detail

/// Chain reduction: X_i = X_{i-1} + s_i A_i + noise, Y switches on B between
/// a far-away constant and X_n.
inline Network gen_theorem1(const SubsetSumInstance& in) {
  in.check();
  const int n = in.n();
  const double v = in.sigma2();
  Network net;
  for (int i = 1; i <= n; ++i) net.nodes.push_back(bench_detail::binary("A" + std::to_string(i), in.prior_zero));
  net.nodes.push_back(bench_detail::binary("B", 0.5));
  for (int i = 1; i <= n; ++i) {
    std::string a = "A" + std::to_string(i), x = "X" + std::to_string(i);
    double si = static_cast<double>(in.s[i - 1]);
    if (i == 1)
      net.nodes.push_back(Node::make_continuous(x, {a}, {}, {ClgEntry{{"0"}, 0.0, {}, v}, ClgEntry{{"1"}, si, {}, v}}));
    else
      net.nodes.push_back(Node::make_continuous(x, {a}, {"X" + std::to_string(i - 1)},
                                                {ClgEntry{{"0"}, 0.0, {1.0}, v}, ClgEntry{{"1"}, si, {1.0}, v}}));
  }
  net.nodes.push_back(bench_detail::y_node(in, "X" + std::to_string(n), v));
  return net;
}

struct Theorem2Params {
  double sigma2, sigma1_2, sigma2_2, M;
};

/// literal=true uses sigma1^2 = eps/(n M). The default, eps sigma^3/(n M^2),
/// keeps each step's posterior mean bias below eps/n and makes the X prior
/// weak enough (sigma2^2 ~ n M^2) that Z = 0 barely reweights the A's.
inline Theorem2Params theorem2_params(const SubsetSumInstance& in, bool literal = false) {
  in.check();
  Theorem2Params p{};
  p.sigma2 = in.sigma2();
  p.M = static_cast<double>(in.total());
  if (p.M <= 0) throw InputError("degenerate subset-sum instance: all elements are zero");
  const double base = in.epsilon() / (in.n() * p.M);
  p.sigma1_2 = literal ? base : base * p.sigma2 * std::sqrt(p.sigma2) / p.M;
  p.sigma2_2 = p.sigma2 * (1.0 + p.sigma2 / p.sigma1_2);
  return p;
}

/// Reduction in which every continuous node has at most one discrete
/// ancestor: independent X_i, with Z_i = X_i - X_{i-1} - s_i A_i observed at 0.
inline Network gen_theorem2(const SubsetSumInstance& in, bool literal = false) {
  auto p = theorem2_params(in, literal);
  const int n = in.n();
  Network net;
  for (int i = 1; i <= n; ++i) net.nodes.push_back(bench_detail::binary("A" + std::to_string(i), in.prior_zero));
  net.nodes.push_back(bench_detail::binary("B", 0.5));
  net.nodes.push_back(Node::make_continuous("X0", {}, {}, {ClgEntry{{}, 0.0, {}, p.sigma2}}));
  for (int i = 1; i <= n; ++i)
    net.nodes.push_back(Node::make_continuous("X" + std::to_string(i), {}, {}, {ClgEntry{{}, p.M, {}, p.sigma2_2}}));
  for (int i = 1; i <= n; ++i) {
    double si = static_cast<double>(in.s[i - 1]);
    net.nodes.push_back(Node::make_continuous(
        "Z" + std::to_string(i), {"A" + std::to_string(i)}, {"X" + std::to_string(i), "X" + std::to_string(i - 1)},
        {ClgEntry{{"0"}, 0.0, {1.0, -1.0}, p.sigma1_2}, ClgEntry{{"1"}, -si, {1.0, -1.0}, p.sigma1_2}}));
  }
  net.nodes.push_back(bench_detail::y_node(in, "X" + std::to_string(n), p.sigma2));
  return net;
}

/// Evidence Z_1..Z_n = 0 for the second reduction.
inline Evidence theorem2_z_evidence(int n) {
  Evidence ev;
  for (int i = 1; i <= n; ++i) ev.continuous["Z" + std::to_string(i)] = 0.0;
  return ev;
}

/// Random instance with n elements in [0, max_s] and a positive total;
/// L uniform on [1, total].
template <class Rng>
SubsetSumInstance random_instance(Rng& rng, int n, long long max_s, double C = 2.0) {
  SubsetSumInstance in;
  in.C = C;
  std::uniform_int_distribution<long long> d(0, max_s);
  do {
    in.s.assign(n, 0);
    for (auto& v : in.s) v = d(rng);
  } while (in.total() == 0);
  in.L = std::uniform_int_distribution<long long>(1, in.total())(rng);
  return in;
}

inline json instance_to_json(const SubsetSumInstance& in) {
  json j{{"s", in.s}, {"L", in.L}, {"C", in.C}};
  if (in.eps > 0) j["eps"] = in.eps;
  if (in.prior_zero != 0.5) j["prior_zero"] = in.prior_zero;
  return j;
}

inline SubsetSumInstance instance_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("instance: expected an object");
  SubsetSumInstance in;
  const auto& s = io_detail::field(j, "s", "instance");
  if (!s.is_array()) throw ParseError("instance.s: expected an array of integers");
  for (const auto& v : s) {
    if (!v.is_number_integer()) throw ParseError("instance.s: expected an array of integers");
    in.s.push_back(v.get<long long>());
  }
  const auto& L = io_detail::field(j, "L", "instance");
  if (!L.is_number_integer()) throw ParseError("instance.L: expected an integer");
  in.L = L.get<long long>();
  if (j.contains("C")) in.C = io_detail::number(j["C"], "instance.C");
  if (j.contains("eps")) in.eps = io_detail::number(j["eps"], "instance.eps");
  if (j.contains("prior_zero")) in.prior_zero = io_detail::number(j["prior_zero"], "instance.prior_zero");
  in.check();
  return in;
}

// ---------------------------------------------------------------- tanks

/// N tanks in series, tank i feeding tank i+1 and the last tank draining to
/// the outside. All numeric defaults are invented.
struct TankParams {
  int num_tanks = 5;
  double inflow = 10.0;                  // into tank 1
  std::vector<double> conductance;       // nominal, one per pipe; empty = all 1
  std::vector<double> capacity;          // per tank; empty = all 1
  double dt = 0.2;
  double process_var = 1e-4;
  double measurement_var = 1e-2;
  double failed_sensor_var = 100.0;
  double variance_floor = 1e-6;
  double prior_pressure_var = 1e-2;
  double prior_conductance_var = 1e-4;
  double burst_prior = 1e-3;
  double drift_prior = 1e-3;
  double sensor_prior = 1e-3;
  double burst_factor = 10.0;
  double drift_rate = 0.05;
  std::vector<std::string> measured;     // pipe labels; empty = every pipe

  int num_pipes() const { return num_tanks; }
  std::string pipe(int k) const {  // k = 1..num_tanks
    return std::to_string(k) + (k == num_tanks ? std::string("o") : std::to_string(k + 1));
  }
  std::vector<std::string> pipes() const {
    std::vector<std::string> out;
    for (int k = 1; k <= num_tanks; ++k) out.push_back(pipe(k));
    return out;
  }
  std::vector<std::string> measured_pipes() const { return measured.empty() ? pipes() : measured; }
  double c_nom(int k) const { return conductance.empty() ? 1.0 : conductance[k - 1]; }
  double area(int i) const { return capacity.empty() ? 1.0 : capacity[i - 1]; }
  double dp_nom(int k) const { return inflow / c_nom(k); }
  /// Steady-state pressures with every pipe at its nominal conductance.
  std::vector<double> nominal_pressures() const {
    std::vector<double> p(num_tanks + 1, 0.0);
    for (int i = num_tanks; i >= 1; --i) p[i - 1] = p[i] + dp_nom(i);
    p.pop_back();
    return p;
  }

  void check() const {
    if (num_tanks < 2) throw StructuralError("tank system: need at least two tanks");
    if (!conductance.empty() && static_cast<int>(conductance.size()) != num_tanks)
      throw StructuralError("tank system: one nominal conductance per pipe required");
    if (!capacity.empty() && static_cast<int>(capacity.size()) != num_tanks)
      throw StructuralError("tank system: one capacity per tank required");
    for (double c : conductance)
      if (!(c > 0)) throw InputError("tank system: conductances must be positive");
    for (double a : capacity)
      if (!(a > 0)) throw InputError("tank system: capacities must be positive");
    if (!(dt > 0)) throw InputError("tank system: dt must be positive");
    if (!(variance_floor > 0)) throw InputError("tank system: variance floor must be positive");
    for (double v : {process_var, measurement_var, failed_sensor_var, prior_pressure_var, prior_conductance_var})
      if (!(v >= variance_floor)) throw InputError("tank system: variances must be at least the variance floor");
    for (double p : {burst_prior, drift_prior, sensor_prior})
      if (!(p > 0 && p < 0.5)) throw InputError("tank system: fault priors must lie in (0, 0.5)");
    if (!(burst_prior + drift_prior < 1)) throw InputError("tank system: burst and drift priors exceed 1");
    if (!(burst_factor > 0) || !(drift_rate >= 0 && drift_rate < 1))
      throw InputError("tank system: burst factor must be positive and drift rate in [0,1)");
    auto all = pipes();
    for (const auto& m : measured)
      if (std::find(all.begin(), all.end(), m) == all.end())
        throw StructuralError("tank system: measured pipe '" + m + "' does not exist");
  }
};

inline const std::vector<std::string>& pipe_modes() {
  static const std::vector<std::string> m{"ok", "drift", "burst"};
  return m;
}
inline const std::vector<std::string>& sensor_modes() {
  static const std::vector<std::string> m{"ok", "failed"};
  return m;
}

/// Two-slice tank network. Interface: pressures P_i, conductances C_p, pipe
/// modes Pipe_p and sensor modes Sensor_p; per slice: flows F_p = C_p dP_nom +
/// c_nom (P_i - P_j - dP_nom) (first-order expansion of conductance times
/// pressure drop) and measurements M_p.
inline TwoSliceNet gen_tanks(const TankParams& tp) {
  tp.check();
  const int N = tp.num_tanks;
  const auto pn = tp.nominal_pressures();
  const auto meas = tp.measured_pipes();
  auto nm = [](const std::string& b, int t) { return slice_name(b, t); };
  auto P = [&](int i, int t) { return nm("P" + std::to_string(i), t); };
  auto C = [&](int k, int t) { return nm("C" + tp.pipe(k), t); };
  auto mode = [&](int k, int t) { return nm("Pipe" + tp.pipe(k), t); };
  const double fl = tp.variance_floor;
  const double b = tp.burst_prior, d = tp.drift_prior, f = tp.sensor_prior;

  TwoSliceNet out;
  auto& nodes = out.net.nodes;
  for (int t = 1; t <= 2; ++t) {
    for (int k = 1; k <= N; ++k) {
      if (t == 1)
        nodes.push_back(Node::make_discrete(mode(k, 1), pipe_modes(), {}, {{1 - d - b, d, b}}));
      else
        nodes.push_back(Node::make_discrete(mode(k, 2), pipe_modes(), {mode(k, 1)},
                                            {{1 - d - b, d, b}, {0, 1 - b, b}, {0, 0, 1}}));
    }
    for (const auto& p : meas) {
      std::string s1 = nm("Sensor" + p, 1);
      if (t == 1)
        nodes.push_back(Node::make_discrete(s1, sensor_modes(), {}, {{1 - f, f}}));
      else
        nodes.push_back(Node::make_discrete(nm("Sensor" + p, 2), sensor_modes(), {s1}, {{1 - f, f}, {0, 1}}));
    }
    for (int k = 1; k <= N; ++k) {
      const double c = tp.c_nom(k), burst = tp.burst_factor * c;
      if (t == 1) {
        const double v = tp.prior_conductance_var;
        nodes.push_back(Node::make_continuous(C(k, 1), {mode(k, 1)}, {},
                                              {ClgEntry{{"ok"}, c, {}, v}, ClgEntry{{"drift"}, c, {}, v},
                                               ClgEntry{{"burst"}, burst, {}, v}}));
      } else {
        const double v = tp.process_var;
        nodes.push_back(Node::make_continuous(C(k, 2), {mode(k, 2)}, {C(k, 1)},
                                              {ClgEntry{{"ok"}, 0.0, {1.0}, v},
                                               ClgEntry{{"drift"}, 0.0, {1.0 - tp.drift_rate}, v},
                                               ClgEntry{{"burst"}, burst, {0.0}, v}}));
      }
    }
    for (int i = 1; i <= N; ++i) {
      if (t == 1) {
        nodes.push_back(Node::make_continuous(P(i, 1), {}, {}, {ClgEntry{{}, pn[i - 1], {}, tp.prior_pressure_var}}));
        continue;
      }
      // P_i' = P_i + (dt/A_i) (F_in - F_out), flows expanded as above.
      const double k = tp.dt / tp.area(i);
      std::vector<std::string> ps;
      std::vector<double> co;
      double icpt = 0.0, self = 1.0;
      if (i == 1) {
        icpt += k * tp.inflow;
      } else {
        const double c = tp.c_nom(i - 1), dp = tp.dp_nom(i - 1);
        ps.push_back(P(i - 1, 1)), co.push_back(k * c);
        ps.push_back(C(i - 1, 1)), co.push_back(k * dp);
        self -= k * c;
        icpt -= k * c * dp;
      }
      const double c = tp.c_nom(i), dp = tp.dp_nom(i);
      self -= k * c;
      if (i < N) ps.push_back(P(i + 1, 1)), co.push_back(k * c);
      ps.push_back(C(i, 1)), co.push_back(-k * dp);
      icpt += k * c * dp;
      ps.insert(ps.begin(), P(i, 1));
      co.insert(co.begin(), self);
      nodes.push_back(Node::make_continuous(P(i, 2), {}, ps, {ClgEntry{{}, icpt, co, tp.process_var}}));
    }
    for (int k = 1; k <= N; ++k) {
      const double c = tp.c_nom(k), dp = tp.dp_nom(k);
      std::vector<std::string> ps{C(k, t), P(k, t)};
      std::vector<double> co{dp, c};
      if (k < N) ps.push_back(P(k + 1, t)), co.push_back(-c);
      nodes.push_back(Node::make_continuous(nm("F" + tp.pipe(k), t), {}, ps, {ClgEntry{{}, -c * dp, co, fl}}));
    }
    for (const auto& p : meas)
      nodes.push_back(Node::make_continuous(nm("M" + p, t), {nm("Sensor" + p, t)}, {nm("F" + p, t)},
                                            {ClgEntry{{"ok"}, 0.0, {1.0}, tp.measurement_var},
                                             ClgEntry{{"failed"}, 0.0, {0.0}, tp.failed_sensor_var}}));
  }
  for (int i = 1; i <= N; ++i) out.interface.push_back("P" + std::to_string(i));
  for (int k = 1; k <= N; ++k) out.interface.push_back("C" + tp.pipe(k));
  for (int k = 1; k <= N; ++k) out.interface.push_back("Pipe" + tp.pipe(k));
  for (const auto& p : meas) out.interface.push_back("Sensor" + p);
  return out;
}

inline json tank_params_to_json(const TankParams& tp) {
  json j{{"num_tanks", tp.num_tanks},
         {"inflow", tp.inflow},
         {"dt", tp.dt},
         {"process_var", tp.process_var},
         {"measurement_var", tp.measurement_var},
         {"failed_sensor_var", tp.failed_sensor_var},
         {"variance_floor", tp.variance_floor},
         {"prior_pressure_var", tp.prior_pressure_var},
         {"prior_conductance_var", tp.prior_conductance_var},
         {"burst_prior", tp.burst_prior},
         {"drift_prior", tp.drift_prior},
         {"sensor_prior", tp.sensor_prior},
         {"burst_factor", tp.burst_factor},
         {"drift_rate", tp.drift_rate}};
  if (!tp.conductance.empty()) j["conductance"] = tp.conductance;
  if (!tp.capacity.empty()) j["capacity"] = tp.capacity;
  if (!tp.measured.empty()) j["measured"] = tp.measured;
  return j;
}

inline TankParams tank_params_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("tank parameters: expected an object");
  TankParams tp;
  if (j.contains("num_tanks")) {
    if (!j["num_tanks"].is_number_integer()) throw ParseError("tank parameters.num_tanks: expected an integer");
    tp.num_tanks = j["num_tanks"].get<int>();
  }
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = io_detail::number(j[key], std::string("tank parameters.") + key);
  };
  num("inflow", tp.inflow);
  num("dt", tp.dt);
  num("process_var", tp.process_var);
  num("measurement_var", tp.measurement_var);
  num("failed_sensor_var", tp.failed_sensor_var);
  num("variance_floor", tp.variance_floor);
  num("prior_pressure_var", tp.prior_pressure_var);
  num("prior_conductance_var", tp.prior_conductance_var);
  num("burst_prior", tp.burst_prior);
  num("drift_prior", tp.drift_prior);
  num("sensor_prior", tp.sensor_prior);
  num("burst_factor", tp.burst_factor);
  num("drift_rate", tp.drift_rate);
  if (j.contains("fault_prior")) {
    double p = io_detail::number(j["fault_prior"], "tank parameters.fault_prior");
    tp.burst_prior = tp.drift_prior = tp.sensor_prior = p;
  }
  if (j.contains("conductance")) tp.conductance = io_detail::numbers(j["conductance"], "tank parameters.conductance");
  if (j.contains("capacity")) tp.capacity = io_detail::numbers(j["capacity"], "tank parameters.capacity");
  if (j.contains("measured")) tp.measured = io_detail::strings(j["measured"], "tank parameters.measured");
  tp.check();
  return tp;
}

}  // namespace clg
