#include "pdfmidas/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace pdfmidas {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw SchemaError(where + ": bad number '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& where) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw SchemaError(where + ": bad integer '" + s + "'");
  return v;
}

const char* kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Midas: return "midas";
    case ModelKind::Umidas: return "umidas";
    case ModelKind::Ave: return "ave";
  }
  return "?";
}

ModelKind kind_from(const std::string& name, const std::string& where) {
  if (name == "midas") return ModelKind::Midas;
  if (name == "umidas") return ModelKind::Umidas;
  if (name == "ave") return ModelKind::Ave;
  throw SchemaError(where + ": unknown model kind '" + name + "' (midas, umidas or ave)");
}

const char* family_name(WeightFamily family) {
  return family == WeightFamily::Almon ? "almon" : "unrestricted";
}

WeightFamily family_from(const std::string& name, const std::string& where) {
  if (name == "almon") return WeightFamily::Almon;
  if (name == "unrestricted") return WeightFamily::Unrestricted;
  throw SchemaError(where + ": unknown weight family '" + name + "' (almon or unrestricted)");
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

SamplePanel read_panel_csv(const fs::path& path) {
  const std::vector<std::string> lines = split(slurp(path), '\n');
  if (lines.empty() || trim(lines[0]) != "series_id,time_num,time_den,value")
    throw SchemaError(path.string() + ": expected header series_id,time_num,time_den,value");

  std::map<std::string, std::map<TimeIndex, std::vector<double>>> acc;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    const auto fields = split(line, ',');
    if (fields.size() != 4) throw SchemaError(where + ": expected 4 fields");
    TimeIndex t(0);
    try {
      t = TimeIndex(parse_int(fields[1], where), parse_int(fields[2], where));
    } catch (const std::invalid_argument& e) {
      throw SchemaError(where + ": " + e.what());
    }
    acc[fields[0]][t].push_back(parse_double(fields[3], where));
  }

  SamplePanel panel;
  for (auto& [id, by_time] : acc)
    for (auto& [t, values] : by_time) panel[id].emplace(t, to_eigen(values));
  return panel;
}

void write_panel_csv(const fs::path& path, const SamplePanel& panel) {
  std::string out = "series_id,time_num,time_den,value\n";
  for (const auto& [id, by_time] : panel)
    for (const auto& [t, values] : by_time)
      for (Eigen::Index j = 0; j < values.size(); ++j)
        out += id + "," + std::to_string(t.num()) + "," + std::to_string(t.den()) + "," +
               format_double(values(j)) + "\n";
  atomic_write(path, out);
}

fs::path sidecar_path(fs::path csv_path) {
  csv_path.replace_extension(".json");
  return csv_path;
}

CurveTable read_curves_csv(const fs::path& csv_path) {
  const fs::path side = sidecar_path(csv_path);
  json meta;
  try {
    meta = json::parse(slurp(side));
  } catch (const json::exception& e) {
    throw SchemaError(side.string() + ": " + e.what());
  }
  Grid grid(0.0, 1.0, 2);
  try {
    grid = Grid(meta.at("lo").get<double>(), meta.at("hi").get<double>(),
                meta.at("n_points").get<int>());
  } catch (const json::exception& e) {
    throw SchemaError(side.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(side.string() + ": " + e.what());
  }

  std::string header = "series_id,time_num,time_den";
  for (int j = 1; j <= grid.n_points; ++j) header += ",s_" + std::to_string(j);

  const std::vector<std::string> lines = split(slurp(csv_path), '\n');
  if (lines.empty() || trim(lines[0]) != header)
    throw SchemaError(csv_path.string() + ": header does not match the sidecar grid (" +
                      std::to_string(grid.n_points) + " ordinate columns expected)");

  CurveTable table{grid, {}};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    const std::string where = csv_path.string() + ":" + std::to_string(i + 1);
    const auto fields = split(line, ',');
    if (fields.size() != static_cast<std::size_t>(grid.n_points) + 3)
      throw SchemaError(where + ": expected " + std::to_string(grid.n_points + 3) + " fields");
    TimeIndex t(0);
    try {
      t = TimeIndex(parse_int(fields[1], where), parse_int(fields[2], where));
    } catch (const std::invalid_argument& e) {
      throw SchemaError(where + ": " + e.what());
    }
    Eigen::VectorXd values(grid.n_points);
    for (int j = 0; j < grid.n_points; ++j)
      values(j) = parse_double(fields[static_cast<std::size_t>(j) + 3], where);
    if (!table.rows[fields[0]].emplace(t, std::move(values)).second)
      throw SchemaError(where + ": duplicate row for series '" + fields[0] + "' at t = " + t.str());
  }
  return table;
}

void write_curves_csv(const fs::path& csv_path, const CurveTable& table) {
  json meta;
  meta["lo"] = table.grid.lo;
  meta["hi"] = table.grid.hi;
  meta["n_points"] = table.grid.n_points;
  atomic_write(sidecar_path(csv_path), meta.dump(2) + "\n");

  std::string out = "series_id,time_num,time_den";
  for (int j = 1; j <= table.grid.n_points; ++j) out += ",s_" + std::to_string(j);
  out += "\n";
  for (const auto& [id, by_time] : table.rows)
    for (const auto& [t, values] : by_time) {
      if (values.size() != table.grid.n_points)
        throw Error("curve table: row size does not match the grid");
      out += id + "," + std::to_string(t.num()) + "," + std::to_string(t.den());
      for (Eigen::Index j = 0; j < values.size(); ++j) out += "," + format_double(values(j));
      out += "\n";
    }
  atomic_write(csv_path, out);
}

void write_model_json(const fs::path& path, const FittedModel& model,
                      const std::map<std::string, std::string>& run_info) {
  json j;
  j["kind"] = kind_name(model.spec.kind);
  j["grid"] = {{"lo", model.grid.lo}, {"hi", model.grid.hi}, {"n_points", model.grid.n_points}};

  j["regressors"] = json::array();
  for (const auto& r : model.spec.regressors)
    j["regressors"].push_back({{"series_id", r.series_id},
                               {"m", r.m},
                               {"p", r.p},
                               {"q", r.q},
                               {"h", r.h.str()},
                               {"family", family_name(r.family)}});

  json coef;
  coef["a"] = to_std(model.coef.a);
  coef["theta"] = json::array();
  for (const auto& t : model.coef.theta) coef["theta"].push_back(to_std(t));
  coef["c"] = json::array();
  for (const auto& c : model.coef.c) coef["c"].push_back(to_std(c));
  j["coefficients"] = std::move(coef);

  j["diagnostics"] = {{"objective", model.diagnostics.objective},
                      {"outer_iterations", model.diagnostics.outer_iterations},
                      {"converged", model.diagnostics.converged},
                      {"singular_design", model.diagnostics.singular_design},
                      {"line_search_stall", model.diagnostics.line_search_stall},
                      {"objective_trace", model.diagnostics.objective_trace}};

  j["run"] = run_info;
  atomic_write(path, j.dump(2) + "\n");
}

FittedModel read_model_json(const fs::path& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }

  try {
    ModelSpec spec;
    spec.kind = kind_from(j.at("kind").get<std::string>(), path.string());
    for (const auto& r : j.at("regressors")) {
      RegressorSpec reg;
      reg.series_id = r.at("series_id").get<std::string>();
      reg.m = r.at("m").get<int>();
      reg.p = r.at("p").get<int>();
      reg.q = r.at("q").get<int>();
      reg.h = TimeIndex::parse(r.at("h").get<std::string>());
      reg.family = family_from(r.at("family").get<std::string>(), path.string());
      spec.regressors.push_back(std::move(reg));
    }

    const auto& g = j.at("grid");
    const Grid grid(g.at("lo").get<double>(), g.at("hi").get<double>(),
                    g.at("n_points").get<int>());

    Coefficients coef;
    const auto& cj = j.at("coefficients");
    coef.a = to_eigen(cj.at("a").get<std::vector<double>>());
    for (const auto& t : cj.at("theta")) coef.theta.push_back(to_eigen(t.get<std::vector<double>>()));
    for (const auto& c : cj.at("c")) coef.c.push_back(to_eigen(c.get<std::vector<double>>()));

    FitDiagnostics diag;
    const auto& dj = j.at("diagnostics");
    // non-finite objectives (an averaging model records none) dump as null
    diag.objective = dj.at("objective").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                  : dj.at("objective").get<double>();
    diag.outer_iterations = dj.at("outer_iterations").get<int>();
    diag.converged = dj.at("converged").get<bool>();
    diag.singular_design = dj.at("singular_design").get<bool>();
    diag.line_search_stall = dj.at("line_search_stall").get<bool>();
    diag.objective_trace = dj.at("objective_trace").get<std::vector<double>>();

    spec.validate();
    check_coefficients(spec, coef);
    return FittedModel{std::move(spec), grid, std::move(coef), std::move(diag)};
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

// --- run config -------------------------------------------------------

namespace {

struct TomlValue {
  enum class Kind { Bool, Int, Float, Str, List };
  Kind kind = Kind::Int;
  bool b = false;
  long long i = 0;
  double f = 0.0;
  std::string s;
  std::vector<double> list;
  int line = 0;
  mutable bool used = false;
};

struct TomlTable {
  std::map<std::string, TomlValue> values;
  std::map<std::string, TomlTable> children;
  int line = 0;
  mutable bool used = false;
};

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (const char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

TomlValue parse_value(const std::string& raw, int line, const std::string& where) {
  TomlValue v;
  v.line = line;
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    v.kind = TomlValue::Kind::Str;
    v.s = raw.substr(1, raw.size() - 2);
    if (v.s.find('"') != std::string::npos) throw SchemaError(where + ": bad string " + raw);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = TomlValue::Kind::Bool;
    v.b = raw == "true";
    return v;
  }
  if (raw.size() >= 2 && raw.front() == '[' && raw.back() == ']') {
    v.kind = TomlValue::Kind::List;
    const std::string inner = trim(raw.substr(1, raw.size() - 2));
    if (!inner.empty())
      for (const auto& part : split(inner, ','))
        v.list.push_back(parse_double(trim(part), where));
    return v;
  }
  {
    long long i = 0;
    const auto* end = raw.data() + raw.size();
    const auto [ptr, ec] = std::from_chars(raw.data(), end, i);
    if (ec == std::errc() && ptr == end) {
      v.kind = TomlValue::Kind::Int;
      v.i = i;
      return v;
    }
  }
  {
    double f = 0.0;
    const auto* end = raw.data() + raw.size();
    const auto [ptr, ec] = std::from_chars(raw.data(), end, f);
    if (ec == std::errc() && ptr == end) {
      v.kind = TomlValue::Kind::Float;
      v.f = f;
      return v;
    }
  }
  throw SchemaError(where + ": cannot parse value '" + raw + "'");
}

TomlTable parse_toml(const std::string& text, const std::string& file) {
  TomlTable root;
  TomlTable* current = &root;
  const std::vector<std::string> lines = split(text, '\n');
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string where = file + ":" + std::to_string(n + 1);
    const std::string line = trim(strip_comment(lines[n]));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw SchemaError(where + ": unterminated section header");
      const std::string path = trim(line.substr(1, line.size() - 2));
      TomlTable* node = &root;
      for (const auto& part : split(path, '.')) {
        const std::string key = trim(part);
        if (!valid_key(key)) throw SchemaError(where + ": bad section name '" + path + "'");
        node = &node->children[key];
        if (node->line == 0) node->line = static_cast<int>(n + 1);
      }
      current = node;
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw SchemaError(where + ": bad key '" + key + "'");
    if (current->values.count(key) || current->children.count(key))
      throw SchemaError(where + ": duplicate key '" + key + "'");
    current->values.emplace(key,
                            parse_value(trim(line.substr(eq + 1)), static_cast<int>(n + 1), where));
  }
  return root;
}

//! Typed access into a parsed table; marks everything it touches so that
//! leftovers can be reported as unknown keys.
class TableReader {
public:
  TableReader(const TomlTable& table, std::string path) : table_(&table), path_(std::move(path)) {
    table_->used = true;
  }

  const std::string& path() const { return path_; }

  const TomlValue* find(const std::string& key) const {
    const auto it = table_->values.find(key);
    if (it == table_->values.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw SchemaError("config: " + path_ + "." + key + " " + message);
  }

  long long get_int(const std::string& key, long long fallback) const {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (v->kind != TomlValue::Kind::Int) fail(key, "must be an integer");
    return v->i;
  }

  double get_double(const std::string& key, double fallback) const {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (v->kind == TomlValue::Kind::Int) return static_cast<double>(v->i);
    if (v->kind != TomlValue::Kind::Float) fail(key, "must be a number");
    return v->f;
  }

  double require_double(const std::string& key) const {
    if (find(key) == nullptr) fail(key, "is required");
    return get_double(key, 0.0);
  }

  long long require_int(const std::string& key) const {
    if (find(key) == nullptr) fail(key, "is required");
    return get_int(key, 0);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (v->kind != TomlValue::Kind::Bool) fail(key, "must be true or false");
    return v->b;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (v->kind != TomlValue::Kind::Str) fail(key, "must be a quoted string");
    return v->s;
  }

  std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (v->kind != TomlValue::Kind::List) fail(key, "must be a [..] list of numbers");
    return v->list;
  }

  TimeIndex get_time(const std::string& key, TimeIndex fallback) const {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (v->kind == TomlValue::Kind::Int) return TimeIndex(v->i);
    if (v->kind == TomlValue::Kind::Str) {
      try {
        return TimeIndex::parse(v->s);
      } catch (const std::invalid_argument&) {
      }
    }
    fail(key, "must be an integer or a \"num/den\" string");
  }

  const TomlTable* child(const std::string& key) const {
    const auto it = table_->children.find(key);
    return it == table_->children.end() ? nullptr : &it->second;
  }

private:
  const TomlTable* table_;
  std::string path_;
};

void report_unused(const TomlTable& table, const std::string& path) {
  for (const auto& [key, value] : table.values)
    if (!value.used)
      throw SchemaError("config: unknown key '" + (path.empty() ? key : path + "." + key) +
                        "' (line " + std::to_string(value.line) + ")");
  for (const auto& [key, child] : table.children) {
    const std::string child_path = path.empty() ? key : path + "." + key;
    if (!child.used)
      throw SchemaError("config: unknown section '" + child_path + "' (line " +
                        std::to_string(child.line) + ")");
    report_unused(child, child_path);
  }
}

}  // namespace

RunConfig load_config(const fs::path& path) {
  const TomlTable root = parse_toml(slurp(path), path.string());
  RunConfig cfg;

  if (const auto it = root.children.find("grid"); it != root.children.end()) {
    const TableReader t(it->second, "grid");
    try {
      cfg.grid = Grid(t.require_double("lo"), t.require_double("hi"),
                      static_cast<int>(t.require_int("n_points")));
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string("config: [grid] ") + e.what());
    }
  }

  if (const auto it = root.children.find("model"); it != root.children.end()) {
    const TableReader t(it->second, "model");
    ModelSpec spec;
    spec.kind = kind_from(t.get_string("kind", "midas"), "config: model.kind");
    if (const TomlTable* regs = t.child("regressor"); regs != nullptr) {
      regs->used = true;
      for (const auto& [id, sub] : regs->children) {
        const TableReader r(sub, "model.regressor." + id);
        RegressorSpec reg;
        reg.series_id = id;
        reg.m = static_cast<int>(r.get_int("m", 1));
        reg.p = static_cast<int>(r.get_int("p", 1));
        reg.q = static_cast<int>(r.get_int("q", 1));
        reg.h = r.get_time("h", TimeIndex(0));
        reg.family = family_from(r.get_string("family", "almon"),
                                 "config: model.regressor." + id + ".family");
        spec.regressors.push_back(std::move(reg));
      }
    }
    cfg.model = std::move(spec);
  }

  if (const auto it = root.children.find("fit"); it != root.children.end()) {
    const TableReader t(it->second, "fit");
    cfg.fit.max_outer_iterations = static_cast<int>(t.get_int("max_outer_iterations", 50));
    cfg.fit.tol = t.get_double("tol", 1e-8);
    cfg.fit.bfgs_max_iterations = static_cast<int>(t.get_int("bfgs_max_iterations", 200));
    cfg.fit.bfgs_grad_tol = t.get_double("bfgs_grad_tol", 1e-7);
    cfg.fit.restarts = static_cast<int>(t.get_int("restarts", 3));
    cfg.fit.restart_radius = t.get_double("restart_radius", 0.5);
    cfg.fit.seed = static_cast<std::uint64_t>(t.get_int("seed", 0));
  }

  if (const auto it = root.children.find("bootstrap"); it != root.children.end()) {
    const TableReader t(it->second, "bootstrap");
    cfg.bootstrap.n_replicates = static_cast<int>(t.get_int("n_replicates", 1000));
    cfg.bootstrap.seed = static_cast<std::uint64_t>(t.get_int("seed", 0));
    cfg.bootstrap.two_sided = t.get_bool("two_sided", false);
    cfg.bootstrap.max_failure_share = t.get_double("max_failure_share", 0.05);
  }
  cfg.bootstrap.fit = cfg.fit;

  if (const auto it = root.children.find("select"); it != root.children.end()) {
    const TableReader t(it->second, "select");
    SelectRange range;
    range.p_min = static_cast<int>(t.require_int("p_min"));
    range.p_max = static_cast<int>(t.require_int("p_max"));
    cfg.select = range;
  }

  if (const auto it = root.children.find("sim"); it != root.children.end()) {
    const TableReader t(it->second, "sim");
    SimDesign design;
    design.periods = static_cast<int>(t.get_int("periods", 100));
    design.samples_per_density = static_cast<int>(t.get_int("samples_per_density", 100));
    design.replications = static_cast<int>(t.get_int("replications", 100));
    design.horizon = t.get_time("horizon", TimeIndex(1, 3));
    design.grid_points = static_cast<int>(t.get_int("grid_points", 30));
    design.grid_pad_sd = t.get_double("grid_pad_sd", 4.0);
    design.seed = static_cast<std::uint64_t>(t.get_int("seed", 0));

    std::vector<double> weights;
    if (const TomlTable* regs = t.child("regressor"); regs != nullptr) {
      regs->used = true;
      for (const auto& [id, sub] : regs->children) {
        const TableReader r(sub, "sim.regressor." + id);
        SimRegressorLaw law;
        law.id = id;
        law.m = static_cast<int>(r.get_int("m", 3));
        law.p = static_cast<int>(r.get_int("p", 12));
        law.theta = to_eigen(r.get_list("theta", {}));
        law.drift = r.get_double("drift", 0.01);
        law.variance = r.get_double("variance", 1.0);
        weights.push_back(r.get_double("a", 1.0));
        design.regressors.push_back(std::move(law));
      }
    }
    design.a = to_eigen(weights);
    try {
      design.validate();
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string("config: [sim] ") + e.what());
    }
    cfg.sim = std::move(design);
  }

  report_unused(root, "");
  return cfg;
}

}  // namespace pdfmidas
