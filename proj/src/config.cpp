#include "krf/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace krf {

namespace {

using nlohmann::json;

// Line and column of every value in a JSON document, keyed by JSON pointer.
// The text has already been accepted by the parser, so the scanner can be lax.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : s_(text) {
    skip_ws();
    value("");
  }

  /// Position of the key naming ptr, for errors about the key itself.
  std::pair<int, int> locate_key(const std::string& ptr) const {
    const auto it = keys_.find(ptr);
    return it != keys_.end() ? it->second : locate(ptr);
  }

  std::pair<int, int> locate(std::string ptr) const {
    while (true) {
      const auto it = pos_.find(ptr);
      if (it != pos_.end()) return it->second;
      if (ptr.empty()) return {1, 1};
      ptr = ptr.substr(0, ptr.rfind('/'));
    }
  }

 private:
  void advance() {
    if (i_ < s_.size() && s_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }
  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) advance();
  }
  std::string string() {
    std::string out;
    advance();  // opening quote
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\') {
        advance();
        out += s_[i_] == '/' ? '/' : s_[i_];
      } else {
        out += s_[i_];
      }
      advance();
    }
    advance();
    return out;
  }
  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }
  void value(const std::string& ptr) {
    pos_[ptr] = {line_, col_};
    const char c = peek();
    if (c == '{') {
      advance();
      skip_ws();
      while (peek() == '"') {
        const std::pair<int, int> at{line_, col_};
        const std::string key = string();
        keys_[ptr + "/" + escape(key)] = at;
        skip_ws();
        advance();  // ':'
        skip_ws();
        value(ptr + "/" + escape(key));
        skip_ws();
        if (peek() == ',') {
          advance();
          skip_ws();
        }
      }
      advance();  // '}'
    } else if (c == '[') {
      advance();
      skip_ws();
      int k = 0;
      while (peek() != ']' && i_ < s_.size()) {
        value(ptr + "/" + std::to_string(k++));
        skip_ws();
        if (peek() == ',') {
          advance();
          skip_ws();
        }
      }
      advance();
    } else if (c == '"') {
      string();
    } else {
      while (i_ < s_.size() && !std::strchr(",]} \t\r\n", s_[i_])) advance();
    }
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
  std::map<std::string, std::pair<int, int>> pos_;
  std::map<std::string, std::pair<int, int>> keys_;
};

struct Context {
  std::string origin;
  LineIndex index;
};

class Reader {
 public:
  Reader(const json& j, std::string ptr, const Context& ctx) : j_(j), ptr_(std::move(ptr)), ctx_(ctx) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg, bool at_key = false) const {
    const std::string p = key.empty() ? ptr_ : ptr_ + "/" + key;
    const auto [line, col] = at_key ? ctx_.index.locate_key(p) : ctx_.index.locate(p);
    std::string dotted = p.empty() ? "<root>" : p.substr(1);
    for (auto& ch : dotted)
      if (ch == '/') ch = '.';
    throw ConfigError(ctx_.origin, line, col, dotted + ": " + msg);
  }

  void require_object() const {
    if (!j_.is_object()) fail("", "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : j_.items()) {
      bool ok = false;
      for (const char* a : keys) ok = ok || k == a;
      if (!ok) fail(k, "unknown key", true);
    }
  }

  const json* find(const std::string& key) const {
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::optional<double> number(const std::string& key) const {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) fail(key, "expected a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) fail(key, "expected a finite number");
    return d;
  }

  double positive(const std::string& key, double fallback) const {
    const auto v = number(key);
    if (v && !(*v > 0.0)) fail(key, "must be positive");
    return v.value_or(fallback);
  }

  std::optional<long long> integer(const std::string& key) const {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer() && !v->is_number_unsigned()) fail(key, "expected an integer");
    return v->get<long long>();
  }

  std::optional<bool> boolean(const std::string& key) const {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) fail(key, "expected true or false");
    return v->get<bool>();
  }

  std::optional<std::string> string(const std::string& key) const {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const std::string& key) const {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) fail(key + "/" + std::to_string(i), "expected a number");
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }

  std::optional<Reader> child(const std::string& key) const {
    const json* v = find(key);
    if (!v) return std::nullopt;
    Reader r(*v, ptr_ + "/" + key, ctx_);
    r.require_object();
    return r;
  }

  const json& raw() const { return j_; }
  const std::string& ptr() const { return ptr_; }
  const Context& ctx() const { return ctx_; }

 private:
  const json& j_;
  std::string ptr_;
  const Context& ctx_;
};

void read_grid(const Reader& r, ExperimentConfig& c) {
  r.allow({"N", "filter"});
  if (const auto n = r.integer("N")) {
    if (*n < 8 || *n > 1024) r.fail("N", "must lie in [8, 1024]");
    c.N = static_cast<int>(*n);
  }
  c.grid_filter = r.boolean("filter").value_or(c.grid_filter);
}

void read_step(const Reader& r, ExperimentConfig& c) {
  r.allow({"dt_rule", "dt", "safety", "filter", "repin", "cadence", "checkpoint_cadence",
           "stencil_halfwidth"});
  StepPolicy& p = c.policy;
  if (const auto rule = r.string("dt_rule")) {
    if (*rule == "fixed") p.rule = DtRule::Fixed;
    else if (*rule == "cfl") p.rule = DtRule::Cfl;
    else r.fail("dt_rule", "expected \"fixed\" or \"cfl\"");
  }
  p.dt = r.positive("dt", p.dt);
  p.safety = r.positive("safety", p.safety);
  p.filter = r.boolean("filter").value_or(p.filter);
  p.repin = r.boolean("repin").value_or(p.repin);
  p.cadence = r.positive("cadence", p.cadence);
  p.checkpoint_cadence = r.positive("checkpoint_cadence", p.checkpoint_cadence);
  p.stencil_halfwidth = r.positive("stencil_halfwidth", p.stencil_halfwidth);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    r.fail("", e.what());
  }
}

void read_initial(const Reader& r, ExperimentConfig& c) {
  r.allow({"family", "beta", "coefficients", "modes", "amplitude", "parity", "seed"});
  InitialData& d = c.initial;
  d.family = r.string("family").value_or(d.family);
  if (d.family != "round" && d.family != "beta" && d.family != "chebyshev")
    r.fail("family", "expected \"round\", \"beta\" or \"chebyshev\"");
  d.beta = r.number("beta").value_or(d.beta);
  d.coefficients = r.numbers("coefficients").value_or(d.coefficients);
  if (const auto m = r.integer("modes")) {
    if (*m < 1 || *m > 64) r.fail("modes", "must lie in [1, 64]");
    d.modes = static_cast<int>(*m);
  }
  if (const auto a = r.number("amplitude")) {
    if (*a < 0.0) r.fail("amplitude", "must be non-negative");
    d.amplitude = *a;
  }
  d.parity = r.string("parity").value_or(d.parity);
  if (d.parity != "any" && d.parity != "even" && d.parity != "odd")
    r.fail("parity", "expected \"any\", \"even\" or \"odd\"");
  if (const json* s = r.find("seed")) {
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0))
      r.fail("seed", "expected a non-negative integer");
    d.seed = s->get<std::uint64_t>();
  }
  if (d.family == "chebyshev" && d.coefficients.empty() && !d.seed)
    r.fail("", "sampled chebyshev coefficients need a seed");
}

void read_companions(const Reader& parent, ExperimentConfig& c) {
  const json* arr = parent.find("companions");
  if (!arr) return;
  if (!arr->is_array()) parent.fail("companions", "expected an array");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    Reader r((*arr)[i], parent.ptr() + "/companions/" + std::to_string(i), parent.ctx());
    r.require_object();
    r.allow({"label", "kind", "slope", "center", "width"});
    CompanionSpec s;
    s.kind = r.string("kind").value_or(s.kind);
    if (s.kind != "constant" && s.kind != "linear" && s.kind != "bump")
      r.fail("kind", "expected \"constant\", \"linear\" or \"bump\"");
    s.label = r.string("label").value_or(s.kind);
    s.slope = r.number("slope").value_or(s.slope);
    if (s.kind == "linear" && std::abs(s.slope) > 1.0)
      r.fail("slope", "1 + slope x must stay non-negative: |slope| <= 1");
    s.center = r.number("center").value_or(s.center);
    s.width = r.positive("width", s.width);
    if (!labels.insert(s.label).second) r.fail("label", "duplicate companion label");
    c.companions.push_back(s);
  }
}

void read_verification(const Reader& r, ExperimentConfig& c) {
  r.allow({"checks", "supersolution_T", "moser_T", "residual_tol", "round_tol",
           "residual_t_begin", "supersolution_tol", "refinement_tol", "denominator_floor",
           "numerator_floor", "D_grad", "D_lap", "D_smooth", "delta_small", "eps_max", "eps_grid",
           "logsobolev_tol", "min_r_tol", "moser_margin", "window_end", "split_time"});
  SuiteConfig& s = c.verification;
  VerificationConfig& v = s.lemmas;
  if (const json* checks = r.find("checks")) {
    if (!checks->is_array()) r.fail("checks", "expected an array of check ids");
    for (std::size_t i = 0; i < checks->size(); ++i) {
      const json& id = (*checks)[i];
      const auto& known = known_checks();
      if (!id.is_string() || std::find(known.begin(), known.end(), id.get<std::string>()) == known.end())
        r.fail("checks/" + std::to_string(i), "unknown check id");
      s.checks.insert(id.get<std::string>());
    }
  }
  s.supersolution_T = r.numbers("supersolution_T").value_or(s.supersolution_T);
  s.moser_T = r.number("moser_T").value_or(s.moser_T);
  v.residual_tol = r.number("residual_tol").value_or(v.residual_tol);
  v.round_tol = r.number("round_tol").value_or(v.round_tol);
  v.residual_t_begin = r.number("residual_t_begin").value_or(v.residual_t_begin);
  v.supersolution_tol = r.number("supersolution_tol").value_or(v.supersolution_tol);
  v.refinement_tol = r.number("refinement_tol").value_or(v.refinement_tol);
  v.denominator_floor = r.number("denominator_floor").value_or(v.denominator_floor);
  v.numerator_floor = r.number("numerator_floor").value_or(v.numerator_floor);
  if (const auto d = r.number("D_grad")) v.d_grad = *d;
  if (const auto d = r.number("D_lap")) v.d_lap = *d;
  if (const auto d = r.number("D_smooth")) v.d_smooth = *d;
  v.delta_small = r.number("delta_small").value_or(v.delta_small);
  v.eps_max = r.number("eps_max").value_or(v.eps_max);
  v.eps_grid = r.numbers("eps_grid").value_or(v.eps_grid);
  v.logsobolev_tol = r.number("logsobolev_tol").value_or(v.logsobolev_tol);
  v.min_r_tol = r.number("min_r_tol").value_or(v.min_r_tol);
  v.moser_margin = r.number("moser_margin").value_or(v.moser_margin);
  v.window_end = r.number("window_end").value_or(v.window_end);
  v.split_time = r.number("split_time").value_or(v.split_time);
  try {
    v.validate();
  } catch (const std::invalid_argument& e) {
    r.fail("", e.what());
  }
}

}  // namespace

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> ids = {
      "evolution_residuals", "lyapunov",     "ratio_grad",    "ratio_lap",
      "ratio_smooth",        "log_sobolev",  "heat_kernel",   "supersolution",
      "moser",               "min_scalar_monotone", "pssw_small", "theorem_chain"};
  return ids;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset -> line and column.
    int line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    const auto colon = msg.find(": ", msg.find("parse error"));
    throw ConfigError(origin, line, col, "invalid JSON" + (colon == std::string::npos ? "" : msg.substr(colon)));
  }
  const Context ctx{origin, LineIndex(text)};
  Reader root(j, "", ctx);
  root.require_object();
  root.allow({"schema_version", "grid", "step", "initial", "t_max", "companions", "verification",
              "output"});
  if (const auto v = root.integer("schema_version"); v && *v != kConfigSchemaVersion)
    root.fail("schema_version", "unsupported schema version " + std::to_string(*v));

  ExperimentConfig c;
  if (const auto g = root.child("grid")) read_grid(*g, c);
  if (const auto s = root.child("step")) read_step(*s, c);
  if (const auto i = root.child("initial")) read_initial(*i, c);
  if (const auto t = root.number("t_max")) {
    if (*t < 0.0) root.fail("t_max", "must be non-negative");
    c.t_max = *t;
  }
  read_companions(root, c);
  if (const auto v = root.child("verification")) read_verification(*v, c);
  c.output = root.string("output").value_or(c.output);
  if (c.output.empty()) root.fail("output", "must not be empty");
  c.hash = fnv1a_hex(text);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, 0, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

nlohmann::json to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["grid"] = {{"N", c.N}, {"filter", c.grid_filter}};
  const StepPolicy& p = c.policy;
  j["step"] = {{"dt_rule", p.rule == DtRule::Fixed ? "fixed" : "cfl"},
               {"dt", p.dt},
               {"safety", p.safety},
               {"filter", p.filter},
               {"repin", p.repin},
               {"cadence", p.cadence},
               {"checkpoint_cadence", p.checkpoint_cadence},
               {"stencil_halfwidth", p.stencil_halfwidth}};
  const InitialData& d = c.initial;
  json init = {{"family", d.family}};
  if (d.family == "beta") init["beta"] = d.beta;
  if (d.family == "chebyshev") {
    if (!d.coefficients.empty()) {
      init["coefficients"] = d.coefficients;
    } else {
      init["modes"] = d.modes;
      init["amplitude"] = d.amplitude;
      init["parity"] = d.parity;
    }
    if (d.seed) init["seed"] = *d.seed;
  }
  j["initial"] = init;
  j["t_max"] = c.t_max;
  j["companions"] = json::array();
  for (const auto& s : c.companions) {
    json cj = {{"label", s.label}, {"kind", s.kind}};
    if (s.kind == "linear") cj["slope"] = s.slope;
    if (s.kind == "bump") {
      cj["center"] = s.center;
      cj["width"] = s.width;
    }
    j["companions"].push_back(cj);
  }
  const VerificationConfig& v = c.verification.lemmas;
  json vj = {{"supersolution_T", c.verification.supersolution_T},
             {"moser_T", c.verification.moser_T},
             {"residual_tol", v.residual_tol},
             {"round_tol", v.round_tol},
             {"residual_t_begin", v.residual_t_begin},
             {"supersolution_tol", v.supersolution_tol},
             {"refinement_tol", v.refinement_tol},
             {"denominator_floor", v.denominator_floor},
             {"numerator_floor", v.numerator_floor},
             {"delta_small", v.delta_small},
             {"eps_max", v.eps_max},
             {"logsobolev_tol", v.logsobolev_tol},
             {"min_r_tol", v.min_r_tol},
             {"moser_margin", v.moser_margin},
             {"window_end", v.window_end},
             {"split_time", v.split_time}};
  if (!c.verification.checks.empty()) vj["checks"] = c.verification.checks;
  if (v.d_grad) vj["D_grad"] = *v.d_grad;
  if (v.d_lap) vj["D_lap"] = *v.d_lap;
  if (v.d_smooth) vj["D_smooth"] = *v.d_smooth;
  if (!v.eps_grid.empty()) vj["eps_grid"] = v.eps_grid;
  j["verification"] = vj;
  j["output"] = c.output;
  return j;
}

MetricProfile initial_profile(const ExperimentConfig& c) {
  const auto filter = c.grid_filter ? std::optional<FilterSpec>(FilterSpec{}) : std::nullopt;
  const GridPtr g = build_grid(c.N, filter);
  const InitialData& d = c.initial;
  MetricProfile p = [&] {
    if (d.family == "round") return round_profile(g);
    if (d.family == "beta") return beta_profile(g, d.beta);
    if (!d.coefficients.empty()) return chebyshev_profile(g, d.coefficients);
    std::mt19937_64 rng(*d.seed);
    std::uniform_real_distribution<double> u(-d.amplitude, d.amplitude);
    std::vector<double> coeffs(static_cast<std::size_t>(d.modes) + 1, 0.0);
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      const double v = u(rng);  // drawn for every k so parity does not shift the stream
      const bool keep = d.parity == "any" || (d.parity == "even") == (k % 2 == 0);
      coeffs[k] = keep ? v : 0.0;
    }
    return chebyshev_profile(g, coeffs);
  }();
  require_valid(p);
  return p;
}

std::vector<CompanionField> initial_companions(const ExperimentConfig& c, const Grid& g) {
  std::vector<CompanionField> out;
  for (const auto& s : c.companions) {
    Field f;
    if (s.kind == "constant") f = Field::Ones(g.size());
    else if (s.kind == "linear") f = (g.nodes().array() * s.slope + 1.0).matrix();
    else f = sample(g, [&s](double x) { return std::exp(-std::pow((x - s.center) / s.width, 2)); });
    out.push_back({s.label, f});
  }
  return out;
}

}  // namespace krf
