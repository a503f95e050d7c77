// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "certrom/commands.hpp"
#include "certrom/config.hpp"

using namespace certrom;
namespace fs = std::filesystem;

namespace {

const Benchmark& bench() {
  static const Benchmark b = [] {
    BenchmarkConfig c;
    c.subdivisions = 6;
    return build_benchmark(c);
  }();
  return b;
}

const StabilityConstants& constants() {
  static const StabilityConstants c = compute_stability_constants(bench().model);
  return c;
}

constexpr std::array<double, 3> kStart{19.0, 7.0, 7.0};

DesignProblem problem(DesignMode mode) {
  DesignProblem d;
  d.mode = mode;
  d.target = design_target(bench().model, kStart);
  if (mode == DesignMode::robust_quadratic) d.set.k = NormIndex::two;
  return d;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("certrom_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string report_value(const std::string& report, const std::string& key) {
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ": ", 0) == 0) return line.substr(key.size() + 2);
  }
  return {};
}

}  // namespace

TEST_CASE("snapshot index sets per mode") {
  const auto& m = bench().model;
  CHECK(snapshot_indices(m, DesignMode::nominal).size() == 4);
  CHECK(snapshot_indices(m, DesignMode::robust_linear).size() == 8);
  CHECK(snapshot_indices(m, DesignMode::robust_quadratic).size() == 12);
  // Nominal snapshots at φ_check share the check solve, robust ones do not.
  CHECK(expected_full_solves(m, DesignMode::nominal, 1, true) == 4 + 1);
  CHECK(expected_full_solves(m, DesignMode::nominal, 3, true) == 4 + 3 + 2 * 3);
  CHECK(expected_full_solves(m, DesignMode::robust_linear, 3, true) == 8 + 3 + 2 * 8);
  CHECK(expected_full_solves(m, DesignMode::robust_quadratic, 2, false) == 12 + 2 + 2 * 12);
  CHECK(parse_design_mode(to_string(DesignMode::robust_quadratic)) == DesignMode::robust_quadratic);
  CHECK_THROWS_AS(parse_design_mode("robust"), InvalidInput);
}

TEST_CASE("grids") {
  auto g = tensor_grid({1, 2}, {3, 4, 5}, {6});
  CHECK(g.size() == 6);
  auto c = box_centres({0, 2, 4}, {0, 2}, {1, 3});
  REQUIRE(c.size() == 2);
  CHECK(c[0] == std::array<double, 3>{1, 1, 2});
  CHECK(c[1] == std::array<double, 3>{3, 1, 2});
}

TEST_CASE("full and reduced outputs agree at a snapshot design") {
  const auto& m = bench().model;
  const auto idx = snapshot_indices(m, DesignMode::robust_quadratic);
  std::vector<double> p(kStart.begin(), kStart.end()), phi{85.0};
  SnapshotSet s;
  FullOrderSolver fs_(m, p);
  s.add_bundle(fs_.solve(phi, idx), idx);
  PodBasis b = project_affine(m, compute_pod(s, m.weight));
  CHECK(b.rank <= 12);
  FullBackend full(m);
  RomBackend rom(m, b);
  auto of = full.outputs(p, phi, idx);
  auto orr = rom.outputs(p, phi, idx);
  for (const auto& a : idx) CHECK(std::abs(of.at(a) - orr.at(a)) <= 1e-8 * std::max(1.0, std::abs(of.at(a))));
  // Asking again for a subset reuses the bundle.
  const long before = full.solves();
  (void)full.outputs(p, phi, {MultiIndex(4, 0), unit_index(4, 0)});
  CHECK(full.solves() == before);
}

TEST_CASE("a single training design is reproduced by its own basis") {
  const auto& m = bench().model;
  const auto idx = design_gradient_indices(m);
  std::vector<double> p{12.0, 4.0, 8.0}, phi{90.0};
  FullOrderSolver fs_(m, p);
  auto fb = fs_.solve(phi, idx);
  SnapshotSet s;
  s.add_bundle(fb, idx);
  PodBasis b = project_affine(m, compute_pod(s, m.weight));
  CHECK(b.size() <= 6);
  Vector u = fb.at(MultiIndex(4, 0));
  Vector ur = solve_reduced_state(m, b, p, phi).lifted;
  CHECK(std::sqrt((u - ur).dot(m.weight * (u - ur))) <= 1e-6 * std::sqrt(u.dot(m.weight * u)));
}

TEST_CASE("design nlp evaluates the target row through the backend") {
  const auto& m = bench().model;
  DesignProblem d = problem(DesignMode::nominal);
  FullBackend full(m);
  UncertainProblem up = design_uncertain_problem(m, d, full);
  CHECK(up.n == 4);
  CHECK(up.phi_dependent[3]);
  Vector x(4);
  x << kStart[0], kStart[1], kStart[2], 0.5;
  UncertainEval e = up.evaluate(x, 0, true);
  CHECK(e.value[0] == doctest::Approx(19.0 * 7.0 + 100.0 * 0.5));
  CHECK(e.value[1] == doctest::Approx(7.0 + 7.0 - 15.0));
  CHECK(e.value[2] == doctest::Approx(3 * 19.0 - 2 * 7.0 - 50.0));
  CHECK(e.value[3] == doctest::Approx(-0.5).epsilon(1e-10));
  const auto last = e.value.size() - 1;
  CHECK(e.value[last] == doctest::Approx(7.0 - 14.0));
}

TEST_CASE("nominal optimization: full and reduced agree") {
  const auto& m = bench().model;
  DesignProblem d = problem(DesignMode::nominal);
  FullBackend full(m);
  DesignSolution sf = optimize_design(m, d, full, kStart);
  REQUIRE(sf.converged);
  CHECK(sf.volume < kStart[0] * kStart[1]);
  CHECK(sf.p[1] + sf.p[2] <= d.height_limit + 1e-8);

  Algorithm1Options o;
  Algorithm1Result r = run_algorithm1(m, d, kStart, constants(), o);
  REQUIRE(r.trace.converged);
  const auto& rows = r.trace.rows;
  REQUIRE(!rows.empty());
  CHECK(rows.front().ell <= 4);
  CHECK(std::abs(rows.back().e0_full - rows.back().e0_rom) <= o.tol);
  CHECK(r.trace.full_solves == expected_full_solves(m, d.mode, static_cast<int>(rows.size()), true));
  CHECK(r.trace.full_solves < full.solves());
  CHECK(std::abs(r.design.volume - sf.volume) <= 1e-3 * sf.volume);
}

TEST_CASE("robust modes: conservative ordering") {
  const auto& m = bench().model;
  std::map<DesignMode, double> volume;
  for (DesignMode mode : {DesignMode::nominal, DesignMode::robust_linear, DesignMode::robust_quadratic}) {
    DesignProblem d = problem(mode);
    Algorithm1Result r = run_algorithm1(m, d, kStart, constants());
    REQUIRE(r.trace.converged);
    CHECK(r.trace.full_solves ==
          expected_full_solves(m, mode, static_cast<int>(r.trace.rows.size()), true));
    volume[mode] = r.design.volume;
  }
  CHECK(volume[DesignMode::nominal] < volume[DesignMode::robust_linear]);
  CHECK(volume[DesignMode::robust_linear] < volume[DesignMode::robust_quadratic]);
}

TEST_CASE("error study has no bound violations") {
  const auto& m = bench().model;
  auto train = tensor_grid({10.0, 20.0}, {2.0, 5.0}, {5.0, 8.0});
  auto test = box_centres({10.0, 15.0, 20.0}, {2.0, 5.0}, {5.0, 8.0});
  ErrorStudy st = run_error_study(m, train, test, {1, 4, 8, 100}, constants());
  CHECK(st.snapshots == 32);
  CHECK(st.rows.back().ell == st.rank);
  for (const auto& row : st.rows) {
    CHECK(row.violations == 0);
    for (std::size_t i = 0; i < row.bound.size(); ++i) {
      CHECK(std::isfinite(row.min_effectivity[i]));
      CHECK(row.min_effectivity[i] >= 1.0);
    }
  }
}

TEST_CASE("config round trip and validation") {
  RunConfig c;
  c.optimization.mode = "robust-quad";
  c.uncertainty.k = "2";
  c.seed = 7;
  const std::string j = to_json_string(c);
  RunConfig back = parse_config(j);
  CHECK(to_json_string(back) == j);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  RunConfig moved = c;
  moved.output_dir = "elsewhere";
  CHECK(config_hash(moved) == config_hash(c));
  moved.seed = 8;
  CHECK(config_hash(moved) != config_hash(c));

  CHECK_THROWS_AS(parse_config(R"({"geometry": {"widht": 40}})"), InvalidInput);
  CHECK_THROWS_AS(parse_config("{not json"), InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"optimization": {"mode": "sideways"}})"), InvalidInput);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), InvalidInput);
  CHECK(parse_config("{}").geometry.mesh_level == 3);
  CHECK(subdivisions_for_level(3) == 24);
}

TEST_CASE("csv format") {
  CsvTable t("demo", {"a", "b"}, {"m", "-"});
  t.add_row({1.0 / 3.0, 2.0});
  const std::string s = t.str("0123456789abcdef");
  CHECK(s == "# demo\n# config_hash: 0123456789abcdef\n# units: m,-\na,b\n0.333333333333333,2\n");
  CHECK(format_number(123456.7890123456789) == "123456.789012346");
  CHECK_THROWS_AS(t.add_row(std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("solve command: exact E0 and mesh convergence") {
  RunConfig c;
  std::map<int, double> e0;
  for (int level : {1, 2, 3}) {
    c.geometry.mesh_level = level;
    fs::path dir = scratch("solve" + std::to_string(level));
    CommandOutput out = cmd_solve(c, dir);
    const std::string v = report_value(read_file(dir / "report.txt"), "E0");
    REQUIRE(!v.empty());
    e0[level] = std::stod(v);

    Benchmark b = build_benchmark(benchmark_config(c.geometry));
    std::vector<double> phi{c.solve.phi};
    const double direct = b.model.output.dot(solve_state(b.model, c.solve.p, phi));
    CHECK(e0[level] == direct);
    CHECK(read_file(dir / "output.csv").find(config_hash(c)) != std::string::npos);
    fs::remove_all(dir);
  }
  const double ratio = (e0[2] - e0[1]) / (e0[3] - e0[2]);
  MESSAGE("E0 refinement ratio " << ratio);
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}

TEST_CASE("repeated runs produce identical files") {
  RunConfig c;
  c.geometry.mesh_level = 1;
  fs::path a = scratch("det_a"), b = scratch("det_b");
  (void)cmd_solve(c, a);
  (void)cmd_solve(c, b);
  for (const char* f : {"output.csv", "solution.csv"}) CHECK(read_file(a / f) == read_file(b / f));
  fs::remove_all(a);
  fs::remove_all(b);
}
