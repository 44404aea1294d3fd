#include "krf/artifacts.hpp"

#include "krf/suite.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <utility>

namespace krf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Column = std::pair<const char*, RecordField>;

// First twelve entries are the trace.csv schema; the rest complete the record.
const std::vector<Column>& record_columns() {
  static const std::vector<Column> cols = {
      {"t", &ObservableRecord::t},
      {"l2_u_tilde", &ObservableRecord::l2_u_tilde},
      {"l2_grad_u_tilde", &ObservableRecord::l2_grad_u_tilde},
      {"l2_lap_u_tilde", &ObservableRecord::l2_lap_u_tilde},
      {"c0_u_tilde", &ObservableRecord::c0_u_tilde},
      {"c0_grad_u_tilde", &ObservableRecord::c0_grad_u_tilde},
      {"c0_lap_u_tilde", &ObservableRecord::c0_lap_u_tilde},
      {"c0_R_minus_n", &ObservableRecord::c0_r_minus_n},
      {"a", &ObservableRecord::a},
      {"b", &ObservableRecord::b},
      {"min_R", &ObservableRecord::min_r},
      {"c0_profile_dist", &ObservableRecord::c0_profile_dist},
      {"l2_u", &ObservableRecord::l2_u},
      {"l2_lap_u", &ObservableRecord::l2_lap_u},
      {"l2_R_minus_n", &ObservableRecord::l2_r_minus_n},
      {"c0_u", &ObservableRecord::c0_u},
      {"l1_u_tilde", &ObservableRecord::l1_u_tilde},
  };
  return cols;
}

constexpr std::size_t kTraceColumns = 12;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  return out;
}

void write_csv(const fs::path& path, const Trace& trace, std::size_t ncols) {
  std::ofstream out = open_out(path);
  const auto& cols = record_columns();
  for (std::size_t c = 0; c < ncols; ++c) out << (c ? "," : "") << cols[c].first;
  out << '\n';
  char buf[32];
  for (const auto& r : trace.records()) {
    for (std::size_t c = 0; c < ncols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", r.*cols[c].second);
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

json field_json(const Field& f) { return std::vector<double>(f.data(), f.data() + f.size()); }

Field field_from(const json& j, std::size_t n, const std::string& what) {
  if (!j.is_array() || j.size() != n) throw ArtifactError(what + ": expected " + std::to_string(n) + " values");
  Field f(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) f[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return f;
}

json sample_json(const FieldSample& s) {
  json j = {{"t", s.t}, {"phi", field_json(s.phi)}, {"companions", json::array()}};
  for (const auto& c : s.companions) j["companions"].push_back(field_json(c));
  return j;
}

FieldSample sample_from(const json& j, std::size_t n) {
  FieldSample s;
  s.t = j.at("t").get<double>();
  s.phi = field_from(j.at("phi"), n, "phi");
  for (const auto& c : j.at("companions")) s.companions.push_back(field_from(c, n, "companion"));
  return s;
}

json meta_json(const TraceMetadata& m, const Trace& trace) {
  return {{"config_hash", m.config_hash},
          {"dt_rule", m.dt_rule},
          {"dt", m.dt},
          {"cadence", m.cadence},
          {"checkpoint_cadence", m.checkpoint_cadence},
          {"stencil_halfwidth", m.stencil_halfwidth},
          {"t_max", m.t_max},
          {"filter", m.filter},
          {"repin", m.repin},
          {"companion_labels", m.companion_labels},
          {"complete", trace.complete()},
          {"abort_reason", trace.abort_reason()}};
}

std::vector<double> split_doubles(const std::string& line, const fs::path& path, std::size_t lineno) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str()) throw ArtifactError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (std::size_t c = 0; c < kTraceColumns; ++c) n.push_back(record_columns()[c].first);
    return n;
  }();
  return names;
}

void write_trace_csv(const fs::path& path, const Trace& trace) { write_csv(path, trace, kTraceColumns); }

void write_records_csv(const fs::path& path, const Trace& trace) {
  write_csv(path, trace, record_columns().size());
}

void write_checkpoints(const fs::path& path, const Trace& trace) {
  const Grid& g = *trace.grid();
  json j;
  j["schema_version"] = kRunSchemaVersion;
  j["grid"] = {{"N", g.N()}, {"filter", g.filter().has_value()}, {"nodes", field_json(g.nodes())}};
  j["companion_labels"] = trace.meta().companion_labels;
  j["checkpoints"] = json::array();
  for (const auto& cp : trace.checkpoints()) {
    json c = {{"center", sample_json(cp.center)}};
    c["before"] = cp.before ? sample_json(*cp.before) : json(nullptr);
    c["after"] = cp.after ? sample_json(*cp.after) : json(nullptr);
    j["checkpoints"].push_back(std::move(c));
  }
  write_json(path, j);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing artifact " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

json run_json(const ExperimentConfig& cfg, const Trace& trace, const std::vector<LemmaReport>& reports) {
  json j;
  j["schema_version"] = kRunSchemaVersion;
  j["trace_schema_version"] = kTraceSchemaVersion;
  j["trace_columns"] = trace_columns();
  j["config"] = to_json(cfg);
  j["config_hash"] = cfg.hash;
  j["status"] = trace.complete() ? "complete" : "aborted";
  j["trace"] = meta_json(trace.meta(), trace);
  j["summary"] = summarize(trace);
  const LengthReport len = path_lengths(trace);
  j["lengths"] = {{"window", {len.window.begin, len.window.end}},
                  {"quadrature", len.quadrature},
                  {"mabuchi", len.mabuchi},
                  {"mabuchi_u", len.mabuchi_u},
                  {"calabi", len.calabi},
                  {"mabuchi_tail", len.mabuchi_tail},
                  {"calabi_tail", len.calabi_tail},
                  {"mabuchi_refinement_delta", len.mabuchi_refinement_delta},
                  {"calabi_refinement_delta", len.calabi_refinement_delta},
                  {"partial", len.partial}};
  j["reports"] = json::array();
  for (const auto& r : reports) j["reports"].push_back(r.to_json());
  return j;
}

void write_run(const fs::path& dir, const ExperimentConfig& cfg, const Trace& trace,
               const std::vector<LemmaReport>& reports, double wall_seconds) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ArtifactError("cannot create " + dir.string() + ": " + ec.message());
  write_trace_csv(dir / "trace.csv", trace);
  write_records_csv(dir / "records.csv", trace);
  write_checkpoints(dir / "checkpoints.json", trace);
  write_json(dir / "run.json", run_json(cfg, trace, reports));
  write_json(dir / "timing.json", {{"wall_seconds", wall_seconds}});
}

LoadedRun load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ArtifactError("not a run directory: " + dir.string());
  json run = read_json(dir / "run.json");
  const json cps = read_json(dir / "checkpoints.json");
  try {
    ExperimentConfig cfg = parse_config(run.at("config").dump(), (dir / "run.json").string());
    cfg.hash = run.at("config_hash").get<std::string>();

    const json& g = cps.at("grid");
    const int n = g.at("N").get<int>();
    const GridPtr grid = build_grid(n, g.at("filter").get<bool>() ? std::optional<FilterSpec>(FilterSpec{})
                                                                  : std::nullopt);
    const Field nodes = field_from(g.at("nodes"), grid->size(), "grid nodes");
    if ((nodes - grid->nodes()).cwiseAbs().maxCoeff() > 0.0)
      throw ArtifactError("stored grid nodes differ from the rebuilt grid");

    const json& m = run.at("trace");
    TraceMetadata meta;
    meta.config_hash = m.at("config_hash").get<std::string>();
    meta.dt_rule = m.at("dt_rule").get<std::string>();
    meta.dt = m.at("dt").get<double>();
    meta.cadence = m.at("cadence").get<double>();
    meta.checkpoint_cadence = m.at("checkpoint_cadence").get<double>();
    meta.stencil_halfwidth = m.at("stencil_halfwidth").get<double>();
    meta.t_max = m.at("t_max").get<double>();
    meta.filter = m.at("filter").get<bool>();
    meta.repin = m.at("repin").get<bool>();
    meta.companion_labels = m.at("companion_labels").get<std::vector<std::string>>();
    Trace trace(grid, meta);

    const fs::path rpath = dir / "records.csv";
    std::ifstream in(rpath, std::ios::binary);
    if (!in) throw ArtifactError("missing artifact " + rpath.string());
    std::string line;
    std::getline(in, line);
    std::size_t lineno = 1;
    const std::size_t ncols = record_columns().size();
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto v = split_doubles(line, rpath, lineno);
      if (v.size() != ncols) throw ArtifactError(rpath.string() + ":" + std::to_string(lineno) + ": wrong column count");
      ObservableRecord r;
      for (std::size_t c = 0; c < ncols; ++c) r.*record_columns()[c].second = v[c];
      trace.append(r);
    }

    for (const auto& c : cps.at("checkpoints")) {
      Checkpoint cp;
      cp.center = sample_from(c.at("center"), grid->size());
      if (!c.at("before").is_null()) cp.before = sample_from(c.at("before"), grid->size());
      if (!c.at("after").is_null()) cp.after = sample_from(c.at("after"), grid->size());
      trace.append(std::move(cp));
    }
    if (m.at("complete").get<bool>()) trace.mark_complete();
    else trace.mark_aborted(m.at("abort_reason").get<std::string>());
    return {std::move(cfg), std::move(trace), std::move(run)};
  } catch (const json::exception& e) {
    throw ArtifactError(dir.string() + ": malformed artifact: " + e.what());
  } catch (const std::logic_error& e) {
    throw ArtifactError(dir.string() + ": inconsistent artifact: " + e.what());
  }
}

}  // namespace krf
