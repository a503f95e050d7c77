// SPDX-License-Identifier: Apache-2.0
//
// Run configuration (JSON) and CSV output helpers.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "certrom/benchmark.hpp"
#include "certrom/design.hpp"

namespace certrom {

struct GeometryConfig {
  double width = 40.0;
  double frame_height = 20.0;
  double layer_height = 4.0;
  std::array<double, 3> reference{19.0, 7.0, 7.0};
  int mesh_level = 3;  // 3·2^level edge subdivisions per piece
  double magnetization = 120.0;
};

struct UncertaintyConfig {
  double nominal = 85.0;  // φ̂ in degrees
  double scale = 5.0;     // D
  std::string k = "inf";
  long grid_points = 2001;  // brute-force worst-case check
};

struct OptimizationConfig {
  std::string mode = "nominal";
  std::string backend = "rom";
  double rho = 100.0;
  double tol = 1e-4;
  int max_outer = 10;
  std::array<double, 3> start{19.0, 7.0, 7.0};
  double phi_check = 90.0;
  int sqp_max_iter = 200;
  double sqp_kkt_tol = 1e-8;
  std::vector<double> taus{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
};

struct StudyConfig {
  std::vector<double> train_p1{1.0, 10.5, 20.0};
  std::vector<double> train_p2{1.0, 3.0, 5.0};
  std::vector<double> train_p3{5.0, 7.0, 10.0};
  std::vector<int> ells{1, 2, 4, 8, 12, 16, 24, 32, 48, 64, 80, 96, 108};
  int random_tests = 0;  // extra uniformly drawn test designs (uses the seed)
  double phi = 90.0;
};

struct SolveConfig {
  std::array<double, 3> p{19.0, 7.0, 7.0};
  double phi = 90.0;
};

struct RunConfig {
  GeometryConfig geometry;
  UncertaintyConfig uncertainty;
  OptimizationConfig optimization;
  StudyConfig study;
  SolveConfig solve;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  void validate() const;
};

std::string to_json_string(const RunConfig& c);
/// Unknown keys are rejected; missing keys keep their defaults.
RunConfig parse_config(const std::string& json_text);
/// Throws InvalidInput naming the path when it cannot be read.
RunConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the canonical JSON without output_dir, as 16 hex digits.
std::string config_hash(const RunConfig& c);

int subdivisions_for_level(int level);
BenchmarkConfig benchmark_config(const GeometryConfig& g);
DesignProblem design_problem(const RunConfig& c, double target);
DesignOptions design_options(const RunConfig& c);

/// CSV with a commented header (title, units, config hash) and numbers
/// written with 15 significant digits.
class CsvTable {
 public:
  CsvTable(std::string title, std::vector<std::string> columns, std::vector<std::string> units);
  void add_row(const std::vector<double>& values);
  void add_row(const std::vector<std::string>& cells);
  [[nodiscard]] std::string str(const std::string& hash) const;
  void write(const std::filesystem::path& path, const std::string& hash) const;

 private:
  std::string title_;
  std::vector<std::string> columns_;
  std::vector<std::string> units_;
  std::vector<std::vector<std::string>> rows_;
};

std::string format_number(double v);

}  // namespace certrom
