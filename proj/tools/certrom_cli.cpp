// SPDX-License-Identifier: Apache-2.0
//
// certrom: command-line front end. Exit codes: 0 ok, 1 usage or input
// error, 2 numerical failure.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "certrom/commands.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string mode;
  std::string backend;
  int mesh_level = -1;
  std::string out;
  long long seed = -1;
};

void add_common(CLI::App* sub, Overrides& o, bool optimize) {
  sub->add_option("--config", o.config, "JSON run configuration");
  sub->add_option("--mesh-level", o.mesh_level, "mesh refinement level (3*2^L subdivisions per piece)")
      ->check(CLI::Range(0, 6));
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--seed", o.seed, "random seed")->check(CLI::NonNegativeNumber);
  if (optimize) {
    sub->add_option("--mode", o.mode, "nominal | robust-lin | robust-quad");
    sub->add_option("--backend", o.backend, "full | rom");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified reduced-order robust shape optimization"};
  app.require_subcommand(1);
  Overrides o;
  auto* solve = app.add_subcommand("solve", "full-order solve at the configured design");
  auto* study = app.add_subcommand("error-study", "reduced-model errors and certified bounds");
  auto* optimize = app.add_subcommand("optimize", "nominal or robust design optimization");
  auto* pod = app.add_subcommand("pod-study", "POD spectrum and error identity");
  add_common(solve, o, false);
  add_common(study, o, false);
  add_common(optimize, o, true);
  add_common(pod, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    certrom::RunConfig cfg = o.config.empty() ? certrom::RunConfig{} : certrom::load_config(o.config);
    if (!o.mode.empty()) cfg.optimization.mode = o.mode;
    if (!o.backend.empty()) cfg.optimization.backend = o.backend;
    if (o.mesh_level >= 0) cfg.geometry.mesh_level = o.mesh_level;
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
    cfg.validate();

    std::filesystem::path out = cfg.output_dir;
    std::filesystem::create_directories(out);
    certrom::CommandOutput res;
    if (*solve) res = certrom::cmd_solve(cfg, out);
    if (*study) res = certrom::cmd_error_study(cfg, out);
    if (*optimize) res = certrom::cmd_optimize(cfg, out);
    if (*pod) res = certrom::cmd_pod_study(cfg, out);
    std::cout << res.report;
    for (const auto& f : res.files) std::cout << "wrote " << f.string() << "\n";
    return 0;
  } catch (const certrom::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}
