#include "krf/commands.hpp"

#include "krf/evolve.hpp"
#include "krf/suite.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace krf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool divides(double whole, double part) {
  const double k = whole / part;
  return std::abs(k - std::round(k)) <= 1e-9 * std::max(1.0, k);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, 0, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_cell(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += "\"\"";
    else q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

struct VerdictCounts {
  std::map<std::string, int> by_verdict;
  std::vector<std::string> failed;
};

VerdictCounts count(const std::vector<LemmaReport>& reports) {
  VerdictCounts c;
  for (const auto& r : reports) {
    ++c.by_verdict[to_string(r.verdict)];
    if (r.violated()) c.failed.push_back(r.id);
  }
  return c;
}

void print_reports(std::ostream& out, const std::vector<LemmaReport>& reports) {
  for (const auto& r : reports) {
    out << "  " << std::left << std::setw(28) << r.id << ' ' << to_string(r.verdict);
    if (!r.notes.empty()) out << "  (" << r.notes.front() << ')';
    out << '\n';
  }
}

fs::path resolve_out(const ExperimentConfig& cfg, const std::optional<fs::path>& out_dir,
                     const char* leaf = nullptr) {
  if (out_dir) return *out_dir;
  fs::path p = output_root() / cfg.output;
  return leaf ? p / leaf : p;
}

std::vector<LemmaReport> reports_from(const json& run) {
  std::vector<LemmaReport> out;
  for (const auto& j : run.at("reports")) {
    LemmaReport r;
    r.id = j.at("id").get<std::string>();
    const std::string v = j.at("verdict").get<std::string>();
    for (Verdict cand : {Verdict::Pass, Verdict::Fail, Verdict::Inconclusive, Verdict::Degenerate,
                         Verdict::HypothesisViolated})
      if (to_string(cand) == v) r.verdict = cand;
    r.notes = j.at("notes").get<std::vector<std::string>>();
    out.push_back(std::move(r));
  }
  return out;
}

// Config text with one value substituted per axis.
std::string substitute(const json& base, const std::vector<SweepAxis>& axes,
                       const std::vector<std::size_t>& pick) {
  json j = base;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    std::string ptr = "/" + axes[a].path;
    std::replace(ptr.begin(), ptr.end(), '.', '/');
    const std::string& token = axes[a].values[pick[a]];
    json v = json::parse(token, nullptr, false);
    if (v.is_discarded()) v = token;
    const json::json_pointer jp(ptr);
    // Array indices in the path address existing entries only.
    j[jp] = v;
  }
  return j.dump(2);
}

const std::vector<std::string>& sweep_metrics() {
  static const std::vector<std::string> m = {
      "summary.t_end",         "summary.mabuchi",        "summary.calabi",
      "summary.I_R",           "summary.rate_u_tilde",   "summary.rate_R",
      "summary.t_hit_R_1e-6",  "summary.final_c0_R_minus_n",
      "ratio_grad.C_emp",      "ratio_grad.asymptote",   "ratio_lap.C_emp",
      "ratio_lap.asymptote",   "ratio_smooth.C_emp",     "ratio_smooth.asymptote",
      "log_sobolev.C_emp",     "pssw_small.K_emp",       "evolution_residuals.sigma"};
  return m;
}

std::map<std::string, double> values_of(const Trace& trace, const std::vector<LemmaReport>& reports) {
  std::map<std::string, double> v = flatten(reports);
  for (const auto& [k, x] : summarize(trace)) v["summary." + k] = x;
  return v;
}

}  // namespace

fs::path output_root() {
  const char* env = std::getenv("KRF_OUTPUT_ROOT");
  if (env && *env) return fs::path(env);
  return fs::current_path();
}

Execution execute(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const MetricProfile initial = initial_profile(cfg);
  Trace trace = evolve(initial, cfg.policy, cfg.t_max, initial_companions(cfg, initial.g()), cfg.hash);
  std::vector<LemmaReport> reports = run_suite(trace, cfg.verification);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(trace), std::move(reports), wall};
}

SweepAxis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("grid axis '" + spec + "' must look like path=v1,v2");
  SweepAxis axis;
  axis.path = spec.substr(0, eq);
  std::string cur;
  int depth = 0;
  for (char c : spec.substr(eq + 1)) {
    if (c == '[' || c == '{') ++depth;
    if (c == ']' || c == '}') --depth;
    if (c == ',' && depth == 0) {
      axis.values.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty() || !axis.values.empty()) axis.values.push_back(cur);
  for (const auto& v : axis.values)
    if (v.empty()) throw std::invalid_argument("grid axis '" + spec + "' has an empty value");
  return axis;
}

StepPolicy refine_policy(const ExperimentConfig& base, int N, int level) {
  StepPolicy p = base.policy;
  p.stencil_halfwidth = base.policy.stencil_halfwidth / std::pow(2.0, level);
  if (p.rule == DtRule::Fixed) {
    ExperimentConfig c = base;
    c.N = N;
    const MetricProfile init = initial_profile(c);
    const double bound =
        0.8 * std::min(cfl_dt(init, p.safety), cfl_dt(round_profile(init.grid), p.safety));
    for (int m = 0; m < 20; ++m) {
      p.dt = base.policy.dt / std::pow(2.0, m);
      if (p.dt <= bound && divides(p.stencil_halfwidth, p.dt) && divides(p.cadence, p.dt)) break;
    }
  }
  p.validate();
  return p;
}

int cmd_run(const std::string& config_path, const std::optional<fs::path>& out_dir, const CommandIo& io) {
  ExperimentConfig cfg;
  std::optional<Execution> ex;
  try {
    cfg = load_config(config_path);
    ex.emplace(execute(cfg));
  } catch (const ConfigError& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidProfile& e) {
    io.err << "error: " << config_path << ": initial data rejected: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    io.err << "error: " << config_path << ": " << e.what() << '\n';
    return kExitUsage;
  }
  const fs::path dir = resolve_out(cfg, out_dir);
  try {
    write_run(dir, cfg, ex->trace, ex->reports, ex->wall_seconds);
  } catch (const ArtifactError& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  io.out << "run " << dir.string() << ": " << (ex->trace.complete() ? "complete" : "aborted")
         << ", t_end = " << ex->trace.t_end() << ", " << ex->trace.records().size() << " records, "
         << ex->wall_seconds << " s\n";
  print_reports(io.out, ex->reports);
  if (!ex->trace.complete()) {
    io.err << "warning: run aborted: " << ex->trace.abort_reason() << '\n';
    return kExitAbort;
  }
  return kExitOk;
}

int cmd_verify(const fs::path& dir, const CommandIo& io) {
  std::optional<LoadedRun> run;
  try {
    run.emplace(load_run(dir));
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const std::vector<LemmaReport> reports = run_suite(run->trace, run->config.verification);
  const VerdictCounts c = count(reports);
  json j;
  j["schema_version"] = kRunSchemaVersion;
  j["config_hash"] = run->config.hash;
  j["status"] = run->trace.complete() ? "complete" : "aborted";
  j["counts"] = c.by_verdict;
  j["violations"] = c.failed;
  j["warnings"] = json::array();
  if (!run->trace.complete()) j["warnings"].push_back("trace is partial: " + run->trace.abort_reason());
  for (const auto& r : reports)
    if (r.verdict == Verdict::Inconclusive) j["warnings"].push_back(r.id + " inconclusive");
  j["reports"] = json::array();
  for (const auto& r : reports) j["reports"].push_back(r.to_json());
  try {
    write_json(dir / "verify.json", j);
  } catch (const ArtifactError& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  io.out << "verify " << dir.string() << ":\n";
  print_reports(io.out, reports);
  for (const auto& w : j["warnings"]) io.err << "warning: " << w.get<std::string>() << '\n';
  if (!c.failed.empty()) {
    io.err << "violations:";
    for (const auto& id : c.failed) io.err << ' ' << id;
    io.err << '\n';
    return kExitViolation;
  }
  return kExitOk;
}

int cmd_sweep(const std::string& template_path, const std::vector<std::string>& grid, unsigned jobs,
              const std::optional<fs::path>& out_dir, const CommandIo& io) {
  ExperimentConfig base;
  json base_json;
  std::vector<SweepAxis> axes;
  try {
    const std::string text = read_text(template_path);
    base = parse_config(text, template_path);
    base_json = json::parse(text);
    for (const auto& g : grid) axes.push_back(parse_axis(g));
  } catch (const ConfigError& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  // Cartesian product; no axes or an empty axis gives no runs.
  std::vector<std::vector<std::size_t>> picks;
  bool empty = axes.empty();
  for (const auto& a : axes) empty = empty || a.values.empty();
  if (!empty) {
    std::vector<std::size_t> pick(axes.size(), 0);
    while (true) {
      picks.push_back(pick);
      std::size_t a = axes.size();
      while (a > 0) {
        --a;
        if (++pick[a] < axes[a].values.size()) break;
        pick[a] = 0;
        if (a == 0) goto done;
      }
    }
  done:;
  }

  const fs::path dir = resolve_out(base, out_dir, "sweep");
  struct Row {
    std::string status = "pending";
    std::string message;
    std::map<std::string, double> values;
    int failed = 0;
  };
  std::vector<Row> rows(picks.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < picks.size(); k = next++) {
      Row& row = rows[k];
      char name[32];
      std::snprintf(name, sizeof name, "run_%04zu", k);
      try {
        const std::string text = substitute(base_json, axes, picks[k]);
        ExperimentConfig cfg = parse_config(text, template_path + "[" + std::to_string(k) + "]");
        const Execution ex = execute(cfg);
        write_run(dir / name, cfg, ex.trace, ex.reports, ex.wall_seconds);
        row.values = values_of(ex.trace, ex.reports);
        row.failed = static_cast<int>(count(ex.reports).failed.size());
        row.status = ex.trace.complete() ? "complete" : "aborted";
        if (!ex.trace.complete()) row.message = ex.trace.abort_reason();
      } catch (const std::exception& e) {
        row.status = "error";
        row.message = e.what();
      }
      std::lock_guard<std::mutex> lock(log_mutex);
      io.out << "sweep " << name << ": " << row.status << '\n';
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs ? jobs : std::thread::hardware_concurrency(),
                                                      static_cast<unsigned>(std::max<std::size_t>(1, picks.size()))));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream out(dir / "summary.csv", std::ios::binary);
  if (!out) {
    io.err << "error: cannot write " << (dir / "summary.csv").string() << '\n';
    return kExitUsage;
  }
  out << "run";
  for (const auto& a : axes) out << ',' << csv_cell(a.path);
  out << ",status,failed_checks";
  for (const auto& m : sweep_metrics()) out << ',' << m;
  out << ",message\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out << k;
    for (std::size_t a = 0; a < axes.size(); ++a) out << ',' << csv_cell(axes[a].values[picks[k][a]]);
    out << ',' << rows[k].status << ',' << rows[k].failed;
    for (const auto& m : sweep_metrics()) {
      const auto it = rows[k].values.find(m);
      out << ',' << (it == rows[k].values.end() ? std::string() : g17(it->second));
    }
    out << ',' << csv_cell(rows[k].message) << '\n';
  }
  io.out << "sweep: " << rows.size() << " runs, summary at " << (dir / "summary.csv").string() << '\n';
  return kExitOk;
}

int cmd_refine(const std::string& config_path, const std::vector<int>& levels,
               const std::optional<fs::path>& out_dir, const CommandIo& io) {
  if (levels.size() < 2) {
    io.err << "error: refine needs at least two levels\n";
    return kExitUsage;
  }
  ExperimentConfig base;
  try {
    base = load_config(config_path);
  } catch (const ConfigError& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const fs::path dir = resolve_out(base, out_dir, "refine");

  json jl = json::array();
  std::vector<std::map<std::string, double>> values;
  std::vector<double> widths;
  int code = kExitOk;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    ExperimentConfig cfg = base;
    cfg.N = levels[k];
    try {
      cfg.policy = refine_policy(base, cfg.N, static_cast<int>(k));
    } catch (const std::exception& e) {
      io.err << "error: level " << k << " (N = " << cfg.N << "): " << e.what() << '\n';
      return kExitUsage;
    }
    std::optional<Execution> ex;
    try {
      ex.emplace(execute(cfg));
    } catch (const std::exception& e) {
      io.err << "error: level " << k << " (N = " << cfg.N << "): " << e.what() << '\n';
      return kExitUsage;
    }
    const fs::path ldir = dir / ("level_" + std::to_string(k) + "_N" + std::to_string(cfg.N));
    write_run(ldir, cfg, ex->trace, ex->reports, ex->wall_seconds);
    if (!ex->trace.complete()) code = kExitAbort;
    values.push_back(values_of(ex->trace, ex->reports));
    widths.push_back(cfg.policy.stencil_halfwidth);
    json verdicts;
    for (const auto& r : ex->reports) verdicts[r.id] = to_string(r.verdict);
    jl.push_back({{"N", cfg.N},
                  {"dt", cfg.policy.dt},
                  {"stencil_halfwidth", cfg.policy.stencil_halfwidth},
                  {"status", ex->trace.complete() ? "complete" : "aborted"},
                  {"dir", ldir.filename().string()},
                  {"verdicts", verdicts},
                  {"values", values.back()}});
    io.out << "refine level " << k << ": N = " << cfg.N << ", dt = " << cfg.policy.dt
           << ", stencil = " << cfg.policy.stencil_halfwidth << ", "
           << (ex->trace.complete() ? "complete" : "aborted") << '\n';
  }

  // Relative deltas between consecutive levels; convergence orders from the
  // residuals (against the stencil width) and, with three levels or more,
  // from successive differences of the constants.
  json deltas = json::array();
  json orders;
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    json d;
    for (const auto& [key, a] : values[k]) {
      const auto it = values[k + 1].find(key);
      if (it == values[k + 1].end() || !std::isfinite(a) || !std::isfinite(it->second)) continue;
      const double scale = std::max(std::abs(a), std::abs(it->second));
      d[key] = scale > 0.0 ? std::abs(a - it->second) / scale : 0.0;
      const bool residual = key.find(".residual.") != std::string::npos;
      if (residual && a > 0.0 && it->second > 0.0)
        orders[key + "@" + std::to_string(k)] = std::log(a / it->second) / std::log(widths[k] / widths[k + 1]);
    }
    deltas.push_back({{"from", k}, {"to", k + 1}, {"values", d}});
  }
  for (std::size_t k = 0; k + 2 < values.size(); ++k) {
    for (const auto& [key, a] : values[k]) {
      if (key.find(".residual.") != std::string::npos) continue;
      const auto b = values[k + 1].find(key);
      const auto c = values[k + 2].find(key);
      if (b == values[k + 1].end() || c == values[k + 2].end()) continue;
      const double d1 = std::abs(b->second - a), d2 = std::abs(c->second - b->second);
      if (d1 > 0.0 && d2 > 0.0 && std::isfinite(d1) && std::isfinite(d2))
        orders[key + "@" + std::to_string(k)] = std::log(d1 / d2) / std::log(2.0);
    }
  }
  json j = {{"schema_version", kRunSchemaVersion},
            {"config_hash", base.hash},
            {"levels", jl},
            {"deltas", deltas},
            {"orders", orders}};
  std::error_code ec;
  fs::create_directories(dir, ec);
  try {
    write_json(dir / "refine.json", j);
  } catch (const ArtifactError& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  io.out << "refine: " << levels.size() << " levels, report at " << (dir / "refine.json").string() << '\n';
  return code;
}

int cmd_report(const fs::path& dir, const CommandIo& io) {
  json run;
  try {
    run = read_json(dir / "run.json");
  } catch (const ArtifactError& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    io.out << "run " << dir.string() << '\n'
           << "  status       " << run.at("status").get<std::string>() << '\n'
           << "  config hash  " << run.at("config_hash").get<std::string>() << '\n';
    const json& init = run.at("config").at("initial");
    io.out << "  initial      " << init.dump() << '\n'
           << "  grid N       " << run.at("config").at("grid").at("N") << '\n';
    for (const auto& [k, v] : run.at("summary").items()) {
      io.out << "  " << std::left << std::setw(24) << k << ' ';
      if (v.is_number()) io.out << g17(v.get<double>());
      else io.out << v.dump();
      io.out << '\n';
    }
    io.out << "checks (run):\n";
    const auto reports = reports_from(run);
    print_reports(io.out, reports);
    if (fs::exists(dir / "verify.json")) {
      const json v = read_json(dir / "verify.json");
      io.out << "checks (verify):\n";
      print_reports(io.out, reports_from(v));
    }
  } catch (const std::exception& e) {
    io.err << "error: " << dir.string() << ": malformed run.json: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace krf
