#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "clg/clg.hpp"

using namespace clg;

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level log_level() {
  static const Level lvl = [] {
    const char* env = std::getenv("CLG_LOG");
    if (!env) return Level::warn;
    std::string s(env);
    if (s == "error") return Level::error;
    if (s == "warn") return Level::warn;
    if (s == "info") return Level::info;
    if (s == "debug") return Level::debug;
    std::cerr << "[warn] CLG_LOG='" << s << "' not recognized; using warn\n";
    return Level::warn;
  }();
  return lvl;
}

void log(Level l, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (l <= log_level()) std::cerr << "[" << names[static_cast<int>(l)] << "] " << msg << "\n";
}

struct Global {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  unsigned threads = 1;
};

std::uint64_t resolve_seed(const Global& g, std::optional<std::uint64_t> fallback) {
  if (g.seed) return *g.seed;
  if (fallback) return *fallback;
  std::cerr << "seed: 0 (default)\n";
  return 0;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text << std::flush;
  else
    write_file(path, text);
}

json csv_cell(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) return v;
  return s;
}

/// Header plus rows rendered as an array of objects.
json csv_to_json(const std::string& csv) {
  std::vector<std::vector<std::string>> lines;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    auto nl = csv.find('\n', pos);
    std::string line = csv.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? csv.size() : nl + 1;
    std::vector<std::string> cells;
    std::size_t a = 0;
    for (;;) {
      auto c = line.find(',', a);
      cells.push_back(line.substr(a, c == std::string::npos ? std::string::npos : c - a));
      if (c == std::string::npos) break;
      a = c + 1;
    }
    lines.push_back(std::move(cells));
  }
  json out = json::array();
  for (std::size_t r = 1; r < lines.size(); ++r) {
    json o = json::object();
    for (std::size_t i = 0; i < lines[0].size() && i < lines[r].size(); ++i) o[lines[0][i]] = csv_cell(lines[r][i]);
    out.push_back(o);
  }
  return out;
}

std::string render(const Global& g, const std::string& csv) { return g.format == "json" ? csv_to_json(csv).dump(1) + "\n" : csv; }

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string kind;
  std::string params;
  int tanks = 0;
  int n = 10;
  bool literal = false;
  std::string query_out;
};

int cmd_gen(const Global& g, const GenArgs& a) {
  if (a.kind == "tanks") {
    TankParams tp = a.params.empty() ? TankParams{} : tank_params_from_json(parse_json(read_file(a.params)));
    if (a.tanks > 0) tp.num_tanks = a.tanks;
    auto tbn = gen_tanks(tp);
    check_two_slice(tbn);
    emit(g.out, serialize_two_slice(tbn) + "\n");
    log(Level::info, "wrote " + std::to_string(tbn.net.nodes.size()) + " two-slice nodes");
    return 0;
  }
  SubsetSumInstance in;
  if (!a.params.empty()) {
    in = instance_from_json(parse_json(read_file(a.params)));
  } else {
    if (a.n < 1) throw InputError("gen: --n must be at least 1");
    in = valid_instance(resolve_seed(g, std::nullopt), a.n, 20, 2.0);
  }
  in.check();
  Network net = a.kind == "theorem1" ? gen_theorem1(in) : gen_theorem2(in, a.literal);
  auto rep = validate(net);
  if (!rep.ok()) throw StructuralError("generated network does not validate:\n" + rep.to_string());
  emit(g.out, serialize_network(net) + "\n");
  log(Level::info, "instance " + instance_to_json(in).dump());
  if (!a.query_out.empty()) {
    json q{{"q_discrete", {"B"}}, {"algorithm", "exact"}};
    Evidence ev;
    if (a.kind == "theorem2") ev = theorem2_z_evidence(in.n());
    ev.continuous["Y"] = static_cast<double>(in.L);
    q["evidence"] = evidence_to_json(ev);
    write_file(a.query_out, q.dump(1) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string network, query;
  std::string algorithm;
  std::size_t budget = 0;
  bool curve = false;
};

std::string result_csv(const QueryResult& r) {
  std::string s;
  for (const auto& q : r.q_discrete) s += q + ",";
  s += "probability,covered,hypotheses";
  for (const auto& q : r.q_continuous) s += ",mean_" + q + ",var_" + q;
  s += "\n";
  for (const auto& e : r.entries) {
    for (const auto& l : e.assignment) s += l + ",";
    s += format_real(e.probability) + "," + (e.covered ? "1" : "0") + "," + std::to_string(e.hypotheses);
    for (std::size_t i = 0; i < r.q_continuous.size(); ++i) {
      if (e.collapsed)
        s += "," + format_real(e.collapsed->mean(i)) + "," + format_real(e.collapsed->cov(i, i));
      else
        s += ",,";
    }
    s += "\n";
  }
  return s;
}

int cmd_infer(const Global& g, const InferArgs& a) {
  Model m(parse_network(read_file(a.network)));
  auto qf = query_from_json(parse_json(read_file(a.query)));
  if (!a.algorithm.empty()) qf.algorithm = algorithm_from_string(a.algorithm);
  if (a.budget > 0) qf.budget = a.budget;
  const bool stochastic = qf.algorithm == Algorithm::lw || qf.algorithm == Algorithm::gibbs;
  std::uint64_t seed = stochastic ? resolve_seed(g, qf.has_seed ? std::optional(qf.seed) : std::nullopt) : 0;
  PreparedQuery pq(m, qf.query, qf.options);
  std::string curve;
  if (a.curve) {
    curve = "generated";
    for (std::size_t row = 0; row < pq.q_rows(); ++row) {
      auto st = pq.q_states(row);
      std::string label;
      for (std::size_t i = 0; i < st.size(); ++i) label += (i ? ";" : "") + m.name(pq.qd()[i]) + "=" + m.node(pq.qd()[i]).states[st[i]];
      curve += "," + (label.empty() ? std::string("total") : label);
    }
    curve += "\n";
    qf.options.progress = [&](std::size_t n, const HypothesisAccumulator& acc) {
      curve += std::to_string(n);
      for (std::size_t row = 0; row < pq.q_rows(); ++row) curve += "," + format_real(acc.probability(row));
      curve += "\n";
    };
  }
  std::mt19937_64 rng(seed);
  QueryResult r;
  switch (qf.algorithm) {
    case Algorithm::exact: r = answer_exact(pq, qf.options); break;
    case Algorithm::enumeration: r = answer_enum(pq, qf.budget, qf.options); break;
    case Algorithm::lw: r = answer_lw(pq, qf.budget, rng, qf.options); break;
    case Algorithm::gibbs: r = answer_gibbs(pq, qf.budget, rng, qf.options); break;
  }
  log(Level::info, to_string(r.algorithm) + ": " + std::to_string(r.diagnostics.generated) + " hypotheses generated");
  if (a.curve)
    emit(g.out, render(g, curve));
  else if (g.format == "csv")
    emit(g.out, result_csv(r));
  else
    emit(g.out, result_to_json(r).dump(1) + "\n");
  return 0;
}

// ---------------------------------------------------------------- track

struct TrackArgs {
  std::string tbn, scenario;
  std::string method = "enum";
  std::size_t budget = 32;
  std::size_t hypotheses = 24;
  std::size_t max_components = 1;
  std::vector<std::string> vars;
  std::string kf_out;
};

std::string kf_path(const std::string& out) {
  auto dot = out.rfind('.');
  auto slash = out.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return out + ".kf";
  return out.substr(0, dot) + ".kf" + out.substr(dot);
}

int cmd_track(const Global& g, const TrackArgs& a) {
  auto tbn = parse_two_slice(read_file(a.tbn));
  auto sc = scenario_from_json(parse_json(read_file(a.scenario)));
  DbnTracker tr(tbn);
  sc.check(tr);
  TrackOptions opt;
  opt.method = algorithm_from_string(a.method);
  opt.budget = a.budget;
  opt.hypotheses = a.hypotheses;
  opt.max_components = a.max_components;
  opt.threads = g.threads;
  opt.seed = resolve_seed(g, sc.seed);
  std::mt19937_64 rng(opt.seed);
  auto truth = simulate(tr, sc, rng);
  auto vars = a.vars.empty() ? tr.continuous_interface() : a.vars;
  auto run = run_tracking(tr, truth.observations, opt);
  int kf_lost = 0;
  auto kf = omniscient_kf(tr, truth, &kf_lost);
  if (kf_lost) log(Level::warn, "omniscient filter: scenario modes impossible under the model at step " + std::to_string(kf_lost));
  const std::string out = g.out.empty() ? "track.csv" : g.out;
  emit(out, render(g, tracking_csv(run, truth, vars)));
  emit(a.kf_out.empty() ? kf_path(out) : a.kf_out, render(g, kf_csv(kf, truth, vars)));
  if (run.lost) {
    std::cerr << "tracking lost at step " << run.lost_step << ": " << *run.lost << "\n";
    return 3;
  }
  if (!run.steps.empty()) log(Level::info, "final top mode " + run.steps.back().top_mode);
  return 0;
}

// ---------------------------------------------------------------- experiment

struct ExperimentArgs {
  std::string id;
  std::string config;
  std::size_t seeds = 0;
  std::string summary_out;
};

int cmd_experiment(const Global& g, const ExperimentArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) {
    cfg = experiment_from_json(parse_json(read_file(a.config)));
    if (!a.id.empty() && a.id != cfg.id)
      throw InputError("experiment '" + a.id + "' does not match config experiment '" + cfg.id + "'");
  } else {
    if (a.id.empty()) throw InputError("experiment: give an experiment id or --config");
    cfg = default_experiment(a.id);
  }
  const std::size_t count = a.seeds > 0 ? a.seeds : cfg.seeds.size();
  if (g.seed)
    cfg.seeds = seed_range(*g.seed, count);
  else if (a.seeds > 0)
    cfg.seeds = seed_range(cfg.seeds.empty() ? 0 : cfg.seeds.front(), count);
  if (!g.seed && a.config.empty())
    std::cerr << "seeds: " << cfg.seeds.front() << ".." << cfg.seeds.back() << " (default)\n";
  if (g.threads > 1) cfg.threads = g.threads;
  if (!g.out.empty()) cfg.out = g.out;
  cfg.check();
  auto rep = run_experiment(cfg);
  emit(cfg.out, g.format == "json" ? rep.to_json().dump(1) + "\n" : rep.csv());
  if (!a.summary_out.empty()) write_file(a.summary_out, rep.summary.dump(1) + "\n");
  json brief = rep.summary;
  brief.erase("per_seed");
  log(Level::info, cfg.id + " " + brief.dump());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid Bayesian network inference and tracking"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output file (stdout when omitted)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1u, 1024u));

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Generate a benchmark network");
  gen->add_option("kind", ga.kind, "theorem1, theorem2 or tanks")->required()->check(CLI::IsMember({"theorem1", "theorem2", "tanks"}));
  gen->add_option("params", ga.params, "Instance or tank parameter file")->check(CLI::ExistingFile);
  gen->add_option("--tanks", ga.tanks, "Number of tanks")->check(CLI::Range(2, 1000));
  gen->add_option("--n", ga.n, "Items in a random subset-sum instance");
  gen->add_flag("--literal", ga.literal, "Use the literal variance settings for theorem2");
  gen->add_option("--query-out", ga.query_out, "Also write the matching query file");

  InferArgs ia;
  auto* inf = app.add_subcommand("infer", "Answer a query");
  inf->add_option("network", ia.network)->required()->check(CLI::ExistingFile);
  inf->add_option("query", ia.query)->required()->check(CLI::ExistingFile);
  inf->add_option("--algorithm", ia.algorithm)->check(CLI::IsMember({"exact", "enum", "lw", "gibbs"}));
  inf->add_option("--budget", ia.budget, "K, samples or steps")->check(CLI::PositiveNumber);
  inf->add_flag("--curve", ia.curve, "Emit the anytime estimate after every hypothesis");

  TrackArgs ta;
  auto* trk = app.add_subcommand("track", "Simulate a scenario and track it");
  trk->add_option("tbn", ta.tbn)->required()->check(CLI::ExistingFile);
  trk->add_option("scenario", ta.scenario)->required()->check(CLI::ExistingFile);
  trk->add_option("--method", ta.method)->check(CLI::IsMember({"exact", "enum", "lw", "gibbs"}));
  trk->add_option("--budget", ta.budget, "Belief entries kept (0 = unlimited)");
  trk->add_option("--hypotheses", ta.hypotheses, "Hypotheses per component")->check(CLI::PositiveNumber);
  trk->add_option("--max-components", ta.max_components, "Gaussians per entry (0 = unlimited)");
  trk->add_option("--vars", ta.vars, "Continuous variables in the CSVs");
  trk->add_option("--kf-out", ta.kf_out, "Omniscient filter CSV");

  ExperimentArgs ea;
  auto* exr = app.add_subcommand("experiment", "Run a seed-swept experiment");
  exr->add_option("id", ea.id)->check(CLI::IsMember(experiment_ids()));
  exr->add_option("--config", ea.config)->check(CLI::ExistingFile);
  exr->add_option("--seeds", ea.seeds, "Number of seeds")->check(CLI::PositiveNumber);
  exr->add_option("--summary-out", ea.summary_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen(g, ga);
    if (*inf) return cmd_infer(g, ia);
    if (*trk) return cmd_track(g, ta);
    return cmd_experiment(g, ea);
  } catch (const InferenceError& e) {
    std::cerr << "inference error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
