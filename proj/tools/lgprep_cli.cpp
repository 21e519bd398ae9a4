// Command-line front end: encode, map, heff, td, optimize, simulate, the two
// scans, the full pipeline (`run`) and figure reproduction.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lgprep/lgprep.hpp"
#include "problem.hpp"

#ifndef LGPREP_BUNDLED_PROBLEM
#define LGPREP_BUNDLED_PROBLEM "problems/paper-n4.json"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lgprep;
using namespace lgprep::cli;

namespace {

// One exit code per pipeline stage.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigStage = 2,
  kEncodeStage = 3,
  kMapStage = 4,
  kEffectiveStage = 5,
  kFreezeStage = 6,
  kOptimizeStage = 7,
  kSimulateStage = 8,
  kScanStage = 9,
  kOutputStage = 10,
};

struct StageFailure {
  int code;
  std::string stage;
  std::string message;
};

template <typename Fn>
auto in_stage(int code, const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure{code, name, e.what()};
  }
}

struct Options {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  double T = 100.0;
  double t0Fraction = 0.1;
  std::string level = "exact";
  std::size_t jobs = 1;
  std::size_t steps = 4000;
  std::size_t samples = 300;
  std::string bounds = "0.1,20";
  std::string C;
  double tFraction = 0.5;
  std::string targets;
  // robustness scan
  double eMin = 0.6;
  double eMax = 1.4;
  std::size_t ePoints = 9;
  std::string constraints;
  // ergodicity scan
  double cMin = 0.1;
  double cMax = 4.0;
  double cStep = 0.1;
  std::size_t tdSteps = 30;
  std::size_t divisions = 20;
  bool noPoints = false;
  std::string figure;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ParseError, "not a number: '" + item + "'");
    }
  }
  return v;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return rows;
}

// Everything that influences results; the hash goes into every output header.
struct Context {
  Options opts;
  Problem problem;
  LogicalModel logical;
  VerificationReport report;
  LhzModel model;
  Schedule schedule;
  std::string configHash;

  json meta(const std::string& command) const {
    return {{"version", kVersion}, {"command", command},  {"config_hash", configHash}, {"seed", opts.seed},
            {"T", opts.T},         {"t0_fraction", opts.t0Fraction}, {"steps", opts.steps}};
  }

  std::string csv_header(const std::string& command) const {
    std::ostringstream os;
    os << "# lgprep " << kVersion << " command=" << command << "\n";
    os << "# config_hash=" << configHash << " seed=" << opts.seed << " T=" << fmt(opts.T)
       << " t0_fraction=" << fmt(opts.t0Fraction) << " steps=" << opts.steps << "\n";
    os << "# created=" << utc_timestamp() << "\n";
    return os.str();
  }
};

std::string compute_hash(const Options& o, const Problem& p) {
  json j = {{"problem", p.raw}, {"seed", o.seed},     {"T", o.T},           {"t0", o.t0Fraction},
            {"level", o.level}, {"steps", o.steps},   {"bounds", o.bounds}, {"C", o.C},
            {"targets", o.targets}, {"e", {o.eMin, o.eMax, o.ePoints}}, {"constraints", o.constraints},
            {"c", {o.cMin, o.cMax, o.cStep}}, {"td_steps", o.tdSteps}, {"divisions", o.divisions}};
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

Context prepare(const Options& opts, bool allowBundled) {
  Context ctx;
  ctx.opts = opts;
  in_stage(kConfigStage, "config", [&] {
    std::string path = opts.config;
    if (path.empty()) {
      if (!allowBundled) throw Error(ErrorKind::ParseError, "--config is required");
      path = LGPREP_BUNDLED_PROBLEM;
    }
    ctx.problem = load_problem(path);
    if (!(opts.T > 0.0)) throw Error(ErrorKind::OutOfRange, "T must be positive");
    if (!(opts.t0Fraction > 0.0 && opts.t0Fraction < 1.0)) throw Error(ErrorKind::OutOfRange, "t0 fraction outside (0, 1)");
    if (opts.steps == 0) throw Error(ErrorKind::OutOfRange, "step count must be positive");
    ctx.schedule = Schedule::linear(opts.T);
    ctx.configHash = compute_hash(opts, ctx.problem);
    return 0;
  });
  in_stage(kEncodeStage, "encode", [&] {
    ctx.logical = ctx.problem.logical();
    ctx.report = verify_degenerate_ground(ctx.logical, ctx.problem.strings);
    return 0;
  });
  in_stage(kMapStage, "map", [&] {
    ctx.model = map_to_lhz(ctx.logical, ctx.problem.strings, ctx.report);
    return 0;
  });
  return ctx;
}

std::vector<double> strengths(const Context& ctx) {
  return in_stage(kConfigStage, "config", [&] {
    if (ctx.opts.C.empty()) return ctx.model.strengths();
    auto c = parse_list(ctx.opts.C);
    if (c.size() != ctx.model.num_constraints()) {
      throw Error(ErrorKind::ShapeMismatch, "--C needs " + std::to_string(ctx.model.num_constraints()) + " values");
    }
    return c;
  });
}

TargetSpec targets(const Context& ctx) {
  return in_stage(kConfigStage, "config", [&] { return ctx.problem.target_spec(ctx.opts.targets); });
}

ControlConfig control_config(const Context& ctx) {
  return in_stage(kConfigStage, "config", [&] {
    ControlConfig cfg;
    const auto b = parse_list(ctx.opts.bounds);
    if (b.size() != 2 || !(b[0] > 0.0 && b[0] < b[1])) throw Error(ErrorKind::ParseError, "--bounds expects lo,hi with 0 < lo < hi");
    cfg.lower = b[0];
    cfg.upper = b[1];
    cfg.seed = ctx.opts.seed;
    cfg.jobs = ctx.opts.jobs;
    cfg.t0Fraction = ctx.opts.t0Fraction;
    cfg.propagation.steps = ctx.opts.steps;
    return cfg;
  });
}

PropagationOptions propagation(const Context& ctx, bool trajectory) {
  PropagationOptions p;
  p.steps = ctx.opts.steps;
  p.samples = trajectory ? ctx.opts.samples : 0;
  return p;
}

void ensure_dir(const std::string& dir) {
  in_stage(kOutputStage, "output", [&] {
    fs::create_directories(dir);
    return 0;
  });
}

void write_file(const fs::path& path, const std::string& text) {
  in_stage(kOutputStage, "output", [&] {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path.string());
    out << text;
    return 0;
  });
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::string trajectory_csv(const Context& ctx, const std::string& command, const PreparationResult& r) {
  std::ostringstream os;
  os << ctx.csv_header(command);
  os << "t_over_T";
  for (std::size_t n = 1; n <= ctx.model.groundStrings.size(); ++n) os << ",P" << n;
  os << ",leakage\n";
  for (const auto& s : r.trajectory) {
    os << fmt(s.tOverT);
    for (Eigen::Index n = 0; n < s.populations.size(); ++n) os << "," << fmt(s.populations(n));
    os << "," << fmt(s.leakage) << "\n";
  }
  return os.str();
}

json result_json(const ControlResult& r) {
  return {{"stage", to_string(r.stage)}, {"C", r.C},         {"cost", r.costValue},
          {"td", r.td},                  {"achieved", to_json(r.achieved)}, {"leakage", r.leakage},
          {"evaluations", r.evaluations}, {"best_start", r.bestStart}};
}

// ---- subcommands ---------------------------------------------------------

int cmd_encode(const Options& o) {
  auto ctx = prepare(o, true);
  json j = {{"meta", ctx.meta("encode")},
            {"N", ctx.logical.N},
            {"couplings", to_json(ctx.logical.couplings)},
            {"field", ctx.logical.field},
            {"is_valid", ctx.report.isValid},
            {"valid_up_to_z2", ctx.report.validUpToZ2},
            {"ground_energy", ctx.report.groundEnergy}};
  json mins = json::array();
  for (const auto& m : ctx.report.minimizers) mins.push_back(m.to_string());
  j["minimizers"] = mins;
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_map(const Options& o) {
  auto ctx = prepare(o, true);
  const auto& m = ctx.model;
  json qubits = json::array();
  for (std::size_t k = 0; k < m.K; ++k) {
    qubits.push_back({{"index", k + 1}, {"pair", {m.pairs[k].first + 1, m.pairs[k].second + 1}},
                      {"field", m.localFields(static_cast<Eigen::Index>(k))}});
  }
  json cons = json::array();
  for (const auto& c : m.constraints) {
    std::vector<std::size_t> members;
    for (auto k : c.members) members.push_back(k + 1);
    cons.push_back({{"members", members}, {"strength", c.strength}});
  }
  json strings = json::array();
  for (std::size_t n = 0; n < m.groundStrings.size(); ++n) {
    strings.push_back({{"logical", ctx.problem.strings[n].to_string()}, {"physical", m.groundStrings[n].to_string()}});
  }
  json ham = json::array();
  for (const auto& a : m.groundStrings) {
    std::vector<std::size_t> row;
    for (const auto& b : m.groundStrings) row.push_back(hamming(a, b));
    ham.push_back(row);
  }
  json j = {{"meta", ctx.meta("map")}, {"K", m.K},           {"qubits", qubits},
            {"constraints", cons},     {"ground_strings", strings}, {"hamming", ham}};
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_heff(const Options& o) {
  auto ctx = prepare(o, true);
  const auto C = strengths(ctx);
  const auto heff = in_stage(kEffectiveStage, "heff", [&] { return build_effective(ctx.model.with_strengths(C)); });
  const auto H = in_stage(kEffectiveStage, "heff", [&] { return evaluate(heff, o.tFraction * o.T, ctx.schedule); });
  Eigen::MatrixXd h = heff.h.cast<double>();
  Eigen::MatrixXd counts = heff.pathCounts.cast<double>();
  json j = {{"meta", ctx.meta("heff")}, {"C", C},  {"e0", heff.e0},          {"e", to_json(heff.e)},
            {"g", to_json(heff.g)},     {"h", to_json(h)}, {"path_counts", to_json(counts)},
            {"t_over_T", o.tFraction},  {"matrix", to_json(H)}};
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_td(const Options& o) {
  auto ctx = prepare(o, true);
  const auto C = strengths(ctx);
  const auto est = in_stage(kFreezeStage, "td", [&] {
    return estimate_td(build_effective(ctx.model.with_strengths(C)), ctx.schedule);
  });
  json pairs = json::array();
  for (const auto& [nm, t] : est.tdPerPair) {
    pairs.push_back({{"n", nm.first + 1}, {"m", nm.second + 1}, {"td", t}, {"td_over_T", t / o.T}});
  }
  json j = {{"meta", ctx.meta("td")}, {"C", C},         {"pairs", pairs},          {"td", est.td},
            {"td_over_T", est.td / o.T}, {"critical_pair", {est.criticalPair.first + 1, est.criticalPair.second + 1}},
            {"v", est.vAtTd},          {"delta", est.deltaAtTd}};
  std::cout << j.dump(2) << "\n";
  return kOk;
}

std::vector<ControlResult> optimize_chain(const Context& ctx, Stage level, const TargetSpec& tg) {
  const auto cfg = control_config(ctx);
  return in_stage(kOptimizeStage, "optimize", [&] {
    std::vector<ControlResult> chain;
    chain.push_back(optimize_static(ctx.model, tg, ctx.schedule, cfg));
    if (level != Stage::Static) chain.push_back(optimize_iterative(ctx.model, tg, chain.back().C, ctx.schedule, cfg));
    if (level == Stage::Exact) chain.push_back(optimize_exact(ctx.model, tg, chain.back().C, ctx.schedule, cfg));
    return chain;
  });
}

Stage level_of(const Options& o) {
  return in_stage(kConfigStage, "config", [&] { return parse_stage(o.level); });
}

int cmd_optimize(const Options& o) {
  auto ctx = prepare(o, true);
  const auto tg = targets(ctx);
  const auto chain = optimize_chain(ctx, level_of(o), tg);
  json stages = json::array();
  for (const auto& r : chain) stages.push_back(result_json(r));
  json j = {{"meta", ctx.meta("optimize")}, {"targets", to_json(tg.probabilities)}, {"stages", stages},
            {"result", result_json(chain.back())}};
  std::cout << j.dump(2) << "\n";
  return kOk;
}

json simulate_into(const Context& ctx, const std::vector<double>& C, const fs::path& dir, const std::string& command,
                   const TargetSpec* tg) {
  const auto full = in_stage(kSimulateStage, "simulate",
                             [&] { return propagate_full(ctx.model, C, ctx.schedule, propagation(ctx, true)); });
  write_file(dir / "trajectory.csv", trajectory_csv(ctx, command, full));
  json j = {{"C", C}, {"probabilities", to_json(full.finalProbabilities)}, {"leakage", full.leakage},
            {"norm_drift", full.normDrift}, {"steps", full.stepsUsed}};
  // The effective model has no meaning where its coefficients are singular;
  // the full run above still stands in that case.
  try {
    const auto eff = propagate_effective(build_effective(ctx.model.with_strengths(C)), ctx.schedule,
                                         ctx.opts.t0Fraction * ctx.opts.T, propagation(ctx, true));
    write_file(dir / "trajectory_effective.csv", trajectory_csv(ctx, command + "-effective", eff));
    j["effective_probabilities"] = to_json(eff.finalProbabilities);
  } catch (const Error& e) {
    j["effective_error"] = e.what();
  }
  if (tg) {
    j["targets"] = to_json(tg->probabilities);
    j["cost"] = cost(full.finalProbabilities, *tg);
    j["max_deviation"] = (full.finalProbabilities - tg->probabilities).cwiseAbs().maxCoeff();
  }
  return j;
}

int cmd_simulate(const Options& o) {
  auto ctx = prepare(o, true);
  const auto C = strengths(ctx);
  ensure_dir(o.out);
  json j = simulate_into(ctx, C, o.out, "simulate", nullptr);
  j["meta"] = ctx.meta("simulate");
  write_json(fs::path(o.out) / "simulate.json", j);
  std::cout << j.dump(2) << "\n";
  return kOk;
}

// The full pipeline. Static level stops before any dynamics.
json run_pipeline(const Context& ctx, const fs::path& dir, const std::string& command) {
  ensure_dir(dir.string());
  const auto tg = targets(ctx);
  const Stage level = level_of(ctx.opts);
  const auto chain = optimize_chain(ctx, level, tg);
  const auto& best = chain.back();
  json stages = json::array();
  for (const auto& r : chain) stages.push_back(result_json(r));
  json summary = {{"meta", ctx.meta(command)}, {"level", to_string(level)}, {"targets", to_json(tg.probabilities)},
                  {"stages", stages},          {"C", best.C},             {"td", best.td}, {"td_over_T", best.td / ctx.opts.T}};
  if (level == Stage::Static) {
    summary["b_at_td"] = to_json(best.achieved);
    summary["cost"] = best.costValue;
    summary["warning"] = "static level: no dynamical verification ran";
  } else {
    const auto sim = simulate_into(ctx, best.C, dir, command, &tg);
    summary["simulation"] = sim;
    summary["achieved"] = sim["probabilities"];
    summary["cost"] = sim["cost"];
    summary["leakage"] = sim["leakage"];
  }
  write_json(dir / "summary.json", summary);
  return summary;
}

void print_table(const json& s) {
  std::cout << "level " << s["level"].get<std::string>() << "\n";
  std::cout << "C    ";
  for (double c : s["C"]) std::cout << " " << fmt(c);
  std::cout << "\ntd/T  " << fmt(s["td_over_T"].get<double>()) << "\n";
  const auto& t = s["targets"];
  const json& a = s.contains("achieved") ? s["achieved"] : s["b_at_td"];
  std::cout << "n  target      achieved\n";
  for (std::size_t n = 0; n < t.size(); ++n) {
    char line[96];
    std::snprintf(line, sizeof line, "%zu  %-10.6f  %-10.6f\n", n + 1, t[n].get<double>(), a[n].get<double>());
    std::cout << line;
  }
  std::cout << "cost  " << fmt(s["cost"].get<double>()) << "\n";
  if (s.contains("leakage")) std::cout << "leakage  " << fmt(s["leakage"].get<double>()) << "\n";
  if (s.contains("warning")) std::cout << "warning: " << s["warning"].get<std::string>() << "\n";
}

int cmd_run(const Options& o) {
  auto ctx = prepare(o, false);
  const auto s = run_pipeline(ctx, o.out, "run");
  print_table(s);
  return kOk;
}

// Rows already on disk from an earlier run with the same configuration hash.
std::set<std::size_t> finished_constraints(const fs::path& path, const std::string& hash, std::size_t ePoints,
                                           std::vector<std::string>& keptRows) {
  std::set<std::size_t> done;
  std::ifstream in(path);
  if (!in) return done;
  std::string line;
  bool sameConfig = false;
  std::map<std::size_t, std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.rfind("# config_hash=" + hash, 0) == 0) sameConfig = true;
    if (line.empty() || line[0] == '#' || line.rfind("constraint_index", 0) == 0) continue;
    const auto comma = line.find(',');
    rows[std::stoul(line.substr(0, comma))].push_back(line);
  }
  if (!sameConfig) return {};
  for (auto& [p, r] : rows) {
    if (r.size() == ePoints) {
      done.insert(p);
      for (auto& l : r) keptRows.push_back(l);
    }
  }
  return done;
}

json robustness_into(const Context& ctx, const std::vector<double>& baseline, const fs::path& dir) {
  const auto eGrid = linear_grid(ctx.opts.eMin, ctx.opts.eMax, ctx.opts.ePoints);
  std::vector<std::size_t> constraints;
  in_stage(kConfigStage, "config", [&] {
    if (ctx.opts.constraints.empty()) {
      for (std::size_t p = 0; p < ctx.model.num_constraints(); ++p) constraints.push_back(p);
    } else {
      for (double v : parse_list(ctx.opts.constraints)) {
        if (v < 1 || v > static_cast<double>(ctx.model.num_constraints())) throw Error(ErrorKind::OutOfRange, "constraint index out of range");
        constraints.push_back(static_cast<std::size_t>(v) - 1);
      }
    }
    return 0;
  });
  const fs::path csv = dir / "robustness.csv";
  std::vector<std::string> kept;
  const auto done = finished_constraints(csv, ctx.configHash, eGrid.size(), kept);

  std::map<std::size_t, std::vector<std::string>> lines;
  for (const auto& l : kept) lines[std::stoul(l.substr(0, l.find(',')))].push_back(l);
  json perConstraint = json::array();
  ScanOptions so;
  so.jobs = ctx.opts.jobs;
  so.propagation = propagation(ctx, false);
  for (auto p : constraints) {
    if (done.count(p + 1)) continue;
    std::vector<std::size_t> one{p};
    const auto scan = in_stage(kScanStage, "scan-robustness",
                               [&] { return scan_robustness(ctx.model, baseline, eGrid, ctx.schedule, one, so); });
    double maxJump = 0.0;
    const RobustnessRow* prev = nullptr;
    for (const auto& row : scan.rows) {
      std::string l = std::to_string(p + 1) + "," + fmt(row.e);
      for (std::size_t n = 0; n < ctx.model.groundStrings.size(); ++n) {
        l += "," + (row.probabilities ? fmt((*row.probabilities)(static_cast<Eigen::Index>(n))) : std::string("nan"));
      }
      lines[p + 1].push_back(l);
      if (prev && prev->probabilities && row.probabilities) {
        maxJump = std::max(maxJump, (*row.probabilities - *prev->probabilities).cwiseAbs().maxCoeff());
      }
      prev = &row;
    }
    perConstraint.push_back({{"constraint", p + 1}, {"independent", static_cast<bool>(scan.independent[0])},
                             {"missing", scan.missing}, {"max_adjacent_jump", maxJump}});
  }
  std::ostringstream os;
  os << ctx.csv_header("scan-robustness");
  os << "constraint_index,e";
  for (std::size_t n = 1; n <= ctx.model.groundStrings.size(); ++n) os << ",p" << n;
  os << "\n";
  for (const auto& [p, ls] : lines) {
    for (const auto& l : ls) os << l << "\n";
  }
  write_file(csv, os.str());
  return {{"baseline_C", baseline}, {"e_grid", eGrid}, {"resumed_constraints", std::vector<std::size_t>(done.begin(), done.end())},
          {"constraints", perConstraint}, {"csv", csv.string()}};
}

std::vector<double> robustness_baseline(const Context& ctx) {
  if (!ctx.opts.C.empty()) return strengths(ctx);
  // Baseline from the exact-dynamics optimum for the selected targets.
  return optimize_chain(ctx, Stage::Exact, targets(ctx)).back().C;
}

int cmd_scan_robustness(const Options& o) {
  auto ctx = prepare(o, true);
  ensure_dir(o.out);
  auto j = robustness_into(ctx, robustness_baseline(ctx), o.out);
  j["meta"] = ctx.meta("scan-robustness");
  write_json(fs::path(o.out) / "robustness.json", j);
  std::cout << j.dump(2) << "\n";
  return kOk;
}

json ergodicity_into(const Context& ctx, const fs::path& dir) {
  const auto grid = in_stage(kConfigStage, "config", [&] { return stepped_grid(ctx.opts.cMin, ctx.opts.cMax, ctx.opts.cStep); });
  const auto fractions = default_freeze_fractions(ctx.opts.tdSteps);
  ErgodicityOptions eo;
  eo.jobs = ctx.opts.jobs;
  eo.keepPoints = !ctx.opts.noPoints;
  eo.divisions = ctx.opts.divisions;
  const auto scan = in_stage(kScanStage, "scan-ergodicity",
                             [&] { return scan_ergodicity(ctx.model, grid, fractions, ctx.schedule, eo); });
  if (eo.keepPoints) {
    in_stage(kOutputStage, "output", [&] {
      std::ofstream out(dir / "ergodicity_points.csv");
      out << ctx.csv_header("scan-ergodicity");
      for (std::size_t p = 1; p <= ctx.model.num_constraints(); ++p) out << "c" << p << ",";
      out << "t_over_T";
      for (std::size_t n = 1; n <= ctx.model.groundStrings.size(); ++n) out << ",p" << n;
      out << "\n";
      for (const auto& pt : scan.points) {
        for (double c : pt.C) out << fmt(c) << ",";
        out << fmt(pt.tOverT);
        for (Eigen::Index n = 0; n < pt.p.size(); ++n) out << "," << fmt(pt.p(n));
        out << "\n";
      }
      return 0;
    });
  }
  json j = {{"c_grid", {ctx.opts.cMin, ctx.opts.cMax, ctx.opts.cStep}}, {"freeze_fractions", fractions},
            {"evaluated", scan.evaluated}, {"skipped_singular", scan.skipped}};
  if (scan.histogram) {
    const auto& h = *scan.histogram;
    std::ostringstream os;
    os << ctx.csv_header("scan-ergodicity");
    os << "bin,p1_a,p2_a,p1_b,p2_b,p1_c,p2_c,count\n";
    for (std::size_t b = 0; b < h.bins(); ++b) {
      const auto c = h.corners(b);
      os << b;
      for (const auto& v : c) os << "," << fmt(v[0]) << "," << fmt(v[1]);
      os << "," << h.counts()[b] << "\n";
    }
    write_file(dir / "ergodicity_histogram.csv", os.str());
    j["bins"] = h.bins();
    j["coverage"] = h.coverage();
  }
  return j;
}

int cmd_scan_ergodicity(const Options& o) {
  auto ctx = prepare(o, true);
  ensure_dir(o.out);
  auto j = ergodicity_into(ctx, o.out);
  j["meta"] = ctx.meta("scan-ergodicity");
  write_json(fs::path(o.out) / "ergodicity.json", j);
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_reproduce(const Options& base) {
  Options o = base;
  const fs::path dir = fs::path(o.out) / o.figure;
  if (o.figure == "fig2c" || o.figure == "fig2d") {
    if (o.targets.empty()) o.targets = o.figure == "fig2c" ? "uniform" : "biased";
    auto ctx = prepare(o, true);
    const auto s = run_pipeline(ctx, dir, "reproduce-" + o.figure);
    print_table(s);
  } else if (o.figure == "fig3") {
    if (o.targets.empty()) o.targets = "uniform";
    auto ctx = prepare(o, true);
    ensure_dir(dir.string());
    auto j = robustness_into(ctx, robustness_baseline(ctx), dir);
    j["meta"] = ctx.meta("reproduce-fig3");
    write_json(dir / "robustness.json", j);
    std::cout << j.dump(2) << "\n";
  } else {
    auto ctx = prepare(o, true);
    ensure_dir(dir.string());
    auto j = ergodicity_into(ctx, dir);
    j["meta"] = ctx.meta("reproduce-fig4");
    write_json(dir / "ergodicity.json", j);
    std::cout << j.dump(2) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Programmable superpositions of bit strings on a parity-encoded annealer"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "problem file (JSON)");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--seed", o.seed, "optimizer seed");
  app.add_option("--T", o.T, "run time T");
  app.add_option("--t0-fraction", o.t0Fraction, "start of effective propagation, as a fraction of T");
  app.add_option("--level", o.level, "optimization level")->check(CLI::IsMember({"static", "iterative", "exact"}));
  app.add_option("--jobs", o.jobs, "worker threads for restarts and scans")->check(CLI::PositiveNumber);
  app.add_option("--steps", o.steps, "time steps of the full propagation");
  app.add_option("--samples", o.samples, "trajectory samples");
  app.add_option("--bounds", o.bounds, "box for C as lo,hi");
  app.add_option("--C", o.C, "constraint strengths c1,c2,...");
  app.add_option("--t", o.tFraction, "evaluation time as a fraction of T (heff)");
  app.add_option("--targets", o.targets, "named target set from the problem file");
  app.add_option("--e-min", o.eMin, "robustness scan: smallest error factor");
  app.add_option("--e-max", o.eMax, "robustness scan: largest error factor");
  app.add_option("--e-points", o.ePoints, "robustness scan: grid points per constraint");
  app.add_option("--constraints", o.constraints, "robustness scan: 1-based constraint indices");
  app.add_option("--c-min", o.cMin, "ergodicity scan: smallest C");
  app.add_option("--c-max", o.cMax, "ergodicity scan: largest C");
  app.add_option("--c-step", o.cStep, "ergodicity scan: C step");
  app.add_option("--td-steps", o.tdSteps, "ergodicity scan: freeze times per run time");
  app.add_option("--divisions", o.divisions, "ergodicity scan: histogram divisions per side");
  app.add_flag("--no-points", o.noPoints, "ergodicity scan: skip the raw point CSV");

  int (*selected)(const Options&) = nullptr;
  auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&selected, fn] { selected = fn; });
    return sub;
  };
  add("encode", "verify that the bit strings are the degenerate ground states", cmd_encode);
  add("map", "show the parity-encoded model", cmd_map);
  add("heff", "effective Hamiltonian coefficients and matrix at --t", cmd_heff);
  add("td", "freeze-in time per level pair", cmd_td);
  add("optimize", "optimize constraint strengths up to --level", cmd_optimize);
  add("simulate", "full dynamics for --C; writes trajectory CSVs", cmd_simulate);
  add("scan-robustness", "final probabilities under scaled constraint strengths", cmd_scan_robustness);
  add("scan-ergodicity", "reachable probability simplex from H_eff ground states", cmd_scan_ergodicity);
  add("run", "full pipeline: encode, map, optimize, simulate", cmd_run);
  auto* rep = add("reproduce", "regenerate the data behind a figure", cmd_reproduce);
  rep->add_option("figure", o.figure, "fig2c, fig2d, fig3 or fig4")->required()->check(CLI::IsMember({"fig2c", "fig2d", "fig3", "fig4"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  try {
    return selected(o);
  } catch (const StageFailure& f) {
    std::cerr << "error [" << f.stage << "]: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
