// SPDX-License-Identifier: Apache-2.0

#include "certrom/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace certrom {

using nlohmann::json;

namespace {

json to_json(const RunConfig& c) {
  const auto& g = c.geometry;
  const auto& u = c.uncertainty;
  const auto& o = c.optimization;
  const auto& s = c.study;
  return json{
      {"geometry",
       {{"width", g.width},
        {"frame_height", g.frame_height},
        {"layer_height", g.layer_height},
        {"reference", g.reference},
        {"mesh_level", g.mesh_level},
        {"magnetization", g.magnetization}}},
      {"uncertainty", {{"nominal", u.nominal}, {"scale", u.scale}, {"k", u.k}, {"grid_points", u.grid_points}}},
      {"optimization",
       {{"mode", o.mode},
        {"backend", o.backend},
        {"rho", o.rho},
        {"tol", o.tol},
        {"max_outer", o.max_outer},
        {"start", o.start},
        {"phi_check", o.phi_check},
        {"sqp_max_iter", o.sqp_max_iter},
        {"sqp_kkt_tol", o.sqp_kkt_tol},
        {"taus", o.taus}}},
      {"study",
       {{"train_p1", s.train_p1},
        {"train_p2", s.train_p2},
        {"train_p3", s.train_p3},
        {"ells", s.ells},
        {"random_tests", s.random_tests},
        {"phi", s.phi}}},
      {"solve", {{"p", c.solve.p}, {"phi", c.solve.phi}}},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
  };
}

// Reads the keys of `j` into fields; every key must be known.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidInput("config: '" + where_ + "' must be an object");
  }
  template <class T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidInput("config: bad value for '" + where_ + key + "': " + e.what());
    }
  }
  const json& child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return j_.contains(key) ? j_.at(key) : empty;
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw InvalidInput("config: unknown key '" + where_ + k + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  const auto& g = geometry;
  if (g.mesh_level < 0 || g.mesh_level > 6) throw InvalidInput("config: mesh_level must be in 0..6");
  if (!(g.width > 0 && g.frame_height > 0 && g.layer_height > 0)) throw InvalidInput("config: nonpositive geometry size");
  if (!(uncertainty.scale > 0)) throw InvalidInput("config: uncertainty scale must be positive");
  parse_norm_index(uncertainty.k);
  if (uncertainty.grid_points < 2) throw InvalidInput("config: grid_points must be at least 2");
  parse_design_mode(optimization.mode);
  if (optimization.backend != "full" && optimization.backend != "rom") {
    throw InvalidInput("config: backend must be full or rom");
  }
  if (!(optimization.rho > 0)) throw InvalidInput("config: rho must be positive");
  if (!(optimization.tol > 0)) throw InvalidInput("config: tol must be positive");
  if (optimization.max_outer < 1) throw InvalidInput("config: max_outer must be at least 1");
  if (optimization.taus.empty()) throw InvalidInput("config: taus must not be empty");
  if (study.train_p1.empty() || study.train_p2.empty() || study.train_p3.empty()) {
    throw InvalidInput("config: empty training axis");
  }
  if (study.random_tests < 0) throw InvalidInput("config: random_tests must be nonnegative");
}

std::string to_json_string(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  RunConfig c;
  Reader top(j, "");
  {
    Reader r(top.child("geometry"), "geometry.");
    auto& g = c.geometry;
    r.get("width", g.width);
    r.get("frame_height", g.frame_height);
    r.get("layer_height", g.layer_height);
    r.get("reference", g.reference);
    r.get("mesh_level", g.mesh_level);
    r.get("magnetization", g.magnetization);
    r.finish();
  }
  {
    Reader r(top.child("uncertainty"), "uncertainty.");
    auto& u = c.uncertainty;
    r.get("nominal", u.nominal);
    r.get("scale", u.scale);
    r.get("k", u.k);
    r.get("grid_points", u.grid_points);
    r.finish();
  }
  {
    Reader r(top.child("optimization"), "optimization.");
    auto& o = c.optimization;
    r.get("mode", o.mode);
    r.get("backend", o.backend);
    r.get("rho", o.rho);
    r.get("tol", o.tol);
    r.get("max_outer", o.max_outer);
    r.get("start", o.start);
    r.get("phi_check", o.phi_check);
    r.get("sqp_max_iter", o.sqp_max_iter);
    r.get("sqp_kkt_tol", o.sqp_kkt_tol);
    r.get("taus", o.taus);
    r.finish();
  }
  {
    Reader r(top.child("study"), "study.");
    auto& s = c.study;
    r.get("train_p1", s.train_p1);
    r.get("train_p2", s.train_p2);
    r.get("train_p3", s.train_p3);
    r.get("ells", s.ells);
    r.get("random_tests", s.random_tests);
    r.get("phi", s.phi);
    r.finish();
  }
  {
    Reader r(top.child("solve"), "solve.");
    r.get("p", c.solve.p);
    r.get("phi", c.solve.phi);
    r.finish();
  }
  top.get("output_dir", c.output_dir);
  top.get("seed", c.seed);
  top.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_hash(const RunConfig& c) {
  // Where the files go does not change what they contain.
  json j = to_json(c);
  j.erase("output_dir");
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int subdivisions_for_level(int level) {
  if (level < 0 || level > 6) throw InvalidInput("mesh level must be in 0..6");
  return 3 << level;
}

BenchmarkConfig benchmark_config(const GeometryConfig& g) {
  BenchmarkConfig b;
  b.width = g.width;
  b.frame_height = g.frame_height;
  b.layer_height = g.layer_height;
  b.reference = g.reference;
  b.subdivisions = subdivisions_for_level(g.mesh_level);
  b.magnetization = g.magnetization;
  return b;
}

DesignProblem design_problem(const RunConfig& c, double target) {
  DesignProblem d;
  d.mode = parse_design_mode(c.optimization.mode);
  d.rho = c.optimization.rho;
  d.target = target;
  d.phi_check = c.optimization.phi_check;
  d.set = UncertaintySet{Vector::Constant(1, c.uncertainty.nominal), Vector::Constant(1, c.uncertainty.scale),
                         parse_norm_index(c.uncertainty.k)};
  return d;
}

DesignOptions design_options(const RunConfig& c) {
  DesignOptions o;
  o.sqp.max_iter = c.optimization.sqp_max_iter;
  o.sqp.kkt_tol = c.optimization.sqp_kkt_tol;
  o.mpec.sqp = o.sqp;
  o.mpec.taus = c.optimization.taus;
  return o;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

CsvTable::CsvTable(std::string title, std::vector<std::string> columns, std::vector<std::string> units)
    : title_(std::move(title)), columns_(std::move(columns)), units_(std::move(units)) {
  if (units_.size() != columns_.size()) throw InvalidInput("csv: one unit per column required");
}

void CsvTable::add_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  for (double v : values) cells.push_back(format_number(v));
  add_row(cells);
}

void CsvTable::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size()) throw InvalidInput("csv: row has wrong number of cells");
  rows_.push_back(cells);
}

std::string CsvTable::str(const std::string& hash) const {
  std::ostringstream os;
  auto join = [&](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << "\n";
  };
  os << "# " << title_ << "\n# config_hash: " << hash << "\n# units: ";
  join(units_);
  join(columns_);
  for (const auto& r : rows_) join(r);
  return os.str();
}

void CsvTable::write(const std::filesystem::path& path, const std::string& hash) const {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << str(hash);
}

}  // namespace certrom
