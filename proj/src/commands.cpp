// SPDX-License-Identifier: Apache-2.0

#include "certrom/commands.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

namespace certrom {

namespace fs = std::filesystem;

namespace {

class CpuTimer {
 public:
  CpuTimer() : start_(std::clock()) {}
  [[nodiscard]] double seconds() const { return static_cast<double>(std::clock() - start_) / CLOCKS_PER_SEC; }

 private:
  std::clock_t start_;
};

// Round-trip exact decimal form (17 significant digits).
std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_report(CommandOutput& out, const fs::path& dir, const std::string& body, double cpu) {
  std::ostringstream os;
  os << body << "cpu_seconds: " << format_number(cpu) << "\n";
  out.report = os.str();
  fs::path p = dir / "report.txt";
  std::ofstream f(p);
  if (!f) throw InvalidInput("cannot write '" + p.string() + "'");
  f << out.report;
  out.files.push_back(p);
}

void emit(CommandOutput& out, const CsvTable& t, const fs::path& path, const std::string& hash) {
  t.write(path, hash);
  out.files.push_back(path);
}

CsvTable spectrum_table(const std::vector<PodIdentityRow>& rows) {
  CsvTable t("POD spectrum and error identity", {"ell", "eigenvalue", "cumulative_energy", "tail_sum", "projection_error", "relative_gap"},
             {"-", "W-norm^2", "-", "W-norm^2", "W-norm^2", "-"});
  for (const auto& r : rows) {
    double gap = r.tail > 0.0 ? std::abs(r.projection - r.tail) / r.tail : std::abs(r.projection);
    t.add_row({static_cast<double>(r.ell), r.eigenvalue, r.cumulative, r.tail, r.projection, gap});
  }
  return t;
}

}  // namespace

SnapshotSet training_snapshots(const AffineModel& model, const StudyConfig& study) {
  SnapshotSet s;
  const auto idx = design_gradient_indices(model);
  const std::vector<double> ph{study.phi};
  for (const auto& p : tensor_grid(study.train_p1, study.train_p2, study.train_p3)) {
    FullOrderSolver fs(model, p);
    s.add_bundle(fs.solve(ph, idx), idx);
  }
  return s;
}

std::vector<PodIdentityRow> pod_identity(const SnapshotSet& snapshots, const PodBasis& basis) {
  using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const int n = snapshots.size();
  const Eigen::SparseMatrix<long double> w = basis.weight.cast<long double>();
  LMatrix r(basis.psi.rows(), n);
  for (int j = 0; j < n; ++j) {
    r.col(j) = (std::sqrt(snapshots.weights[j]) * snapshots.columns[j]).cast<long double>();
  }
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < basis.eigenvalues.size(); ++i) total += basis.eigenvalues[i];

  std::vector<PodIdentityRow> rows;
  long double head = 0.0L;
  for (int ell = 0; ell <= basis.size(); ++ell) {
    if (ell > 0) {
      Eigen::Matrix<long double, Eigen::Dynamic, 1> psi = basis.psi.col(ell - 1).cast<long double>();
      Eigen::Matrix<long double, Eigen::Dynamic, 1> wpsi = w * psi;
      r -= psi * (wpsi.transpose() * r);
      head += basis.eigenvalues[ell - 1];
    }
    LMatrix wr = w * r;
    PodIdentityRow row;
    row.ell = ell;
    row.eigenvalue = ell > 0 ? basis.eigenvalues[ell - 1] : 0.0;
    row.cumulative = static_cast<double>(head / total);
    long double tail = 0.0L;
    for (Eigen::Index i = ell; i < basis.eigenvalues.size(); ++i) tail += basis.eigenvalues[i];
    row.tail = static_cast<double>(tail);
    row.projection = static_cast<double>(r.cwiseProduct(wr).sum());
    rows.push_back(row);
  }
  return rows;
}

CommandOutput cmd_solve(const RunConfig& config, const fs::path& out) {
  CpuTimer timer;
  CommandOutput res;
  const std::string hash = config_hash(config);
  Benchmark bench = build_benchmark(benchmark_config(config.geometry));
  const auto& model = bench.model;
  std::vector<double> phi{config.solve.phi};
  Vector u = solve_state(model, config.solve.p, phi);
  const double e0 = model.output.dot(u);

  CsvTable out_t("full-order output", {"p1", "p2", "p3", "phi", "E0", "dofs"}, {"length", "length", "length", "deg", "potential", "-"});
  out_t.add_row({config.solve.p[0], config.solve.p[1], config.solve.p[2], config.solve.phi, e0,
                 static_cast<double>(model.dimension())});
  emit(res, out_t, out / "output.csv", hash);

  Vector full = bench.dofs.prolong(u);
  CsvTable sol("solution on the reference mesh", {"node", "x", "y", "u"}, {"-", "length", "length", "potential"});
  for (int i = 0; i < bench.mesh.num_nodes(); ++i) {
    sol.add_row({static_cast<double>(i), bench.mesh.nodes[i].x(), bench.mesh.nodes[i].y(), full[i]});
  }
  emit(res, sol, out / "solution.csv", hash);

  std::ostringstream os;
  os << "verb: solve\nconfig_hash: " << hash << "\ndofs: " << model.dimension() << "\nE0: " << format_exact(e0) << "\n";
  write_report(res, out, os.str(), timer.seconds());
  return res;
}

CommandOutput cmd_pod_study(const RunConfig& config, const fs::path& out) {
  CpuTimer timer;
  CommandOutput res;
  const std::string hash = config_hash(config);
  Benchmark bench = build_benchmark(benchmark_config(config.geometry));
  SnapshotSet snaps = training_snapshots(bench.model, config.study);
  PodBasis basis = compute_pod(snaps, bench.model.weight);
  auto rows = pod_identity(snaps, basis);
  emit(res, spectrum_table(rows), out / "spectrum.csv", hash);

  double worst = 0.0;
  for (const auto& r : rows) {
    if (r.tail > 0.0) worst = std::max(worst, std::abs(r.projection - r.tail) / r.tail);
  }
  std::ostringstream os;
  os << "verb: pod-study\nconfig_hash: " << hash << "\nsnapshots: " << snaps.size() << "\nrank: " << basis.rank
     << "\nmax_relative_identity_gap: " << format_number(worst) << "\n";
  write_report(res, out, os.str(), timer.seconds());
  return res;
}

CommandOutput cmd_error_study(const RunConfig& config, const fs::path& out) {
  CpuTimer timer;
  CommandOutput res;
  const std::string hash = config_hash(config);
  Benchmark bench = build_benchmark(benchmark_config(config.geometry));
  const auto& model = bench.model;
  const auto& st = config.study;
  auto train = tensor_grid(st.train_p1, st.train_p2, st.train_p3);
  auto test = box_centres(st.train_p1, st.train_p2, st.train_p3);
  if (st.random_tests > 0) {
    std::mt19937_64 rng(config.seed);
    auto range = [](const std::vector<double>& v) {
      return std::uniform_real_distribution<double>(*std::min_element(v.begin(), v.end()),
                                                    *std::max_element(v.begin(), v.end()));
    };
    auto d1 = range(st.train_p1), d2 = range(st.train_p2), d3 = range(st.train_p3);
    int added = 0;
    for (int tries = 0; added < st.random_tests && tries < 1000 * st.random_tests; ++tries) {
      std::array<double, 3> p{d1(rng), d2(rng), d3(rng)};
      if (!model.is_admissible(p)) continue;
      test.push_back(p);
      ++added;
    }
  }
  StabilityConstants c = compute_stability_constants(model);
  ErrorStudy study = run_error_study(model, train, test, st.ells, c, st.phi);

  std::vector<std::string> cols{"ell"}, units{"-"};
  for (const char* kind : {"err_", "bound_", "eff_min_"}) {
    for (const auto& l : study.labels) {
      cols.push_back(kind + l);
      units.push_back(std::string(kind) == "eff_min_" ? "-" : "W-norm");
    }
  }
  cols.push_back("violations");
  units.push_back("-");
  CsvTable t("maximum test error and certified bound per basis size", cols, units);
  long violations = 0;
  for (const auto& r : study.rows) {
    std::vector<double> v{static_cast<double>(r.ell)};
    v.insert(v.end(), r.error.begin(), r.error.end());
    v.insert(v.end(), r.bound.begin(), r.bound.end());
    v.insert(v.end(), r.min_effectivity.begin(), r.min_effectivity.end());
    v.push_back(static_cast<double>(r.violations));
    t.add_row(v);
    violations += r.violations;
  }
  emit(res, t, out / "error_study.csv", hash);

  CsvTable sp("POD spectrum of the training set", {"index", "eigenvalue"}, {"-", "W-norm^2"});
  for (Eigen::Index i = 0; i < study.eigenvalues.size(); ++i) {
    sp.add_row({static_cast<double>(i + 1), study.eigenvalues[i]});
  }
  emit(res, sp, out / "spectrum.csv", hash);

  std::ostringstream os;
  os << "verb: error-study\nconfig_hash: " << hash << "\nsnapshots: " << study.snapshots << "\nrank: " << study.rank
     << "\ntest_points: " << test.size() << "\nalpha_ref: " << format_number(c.alpha_ref)
     << "\nbound_violations: " << violations << "\n";
  write_report(res, out, os.str(), timer.seconds());
  return res;
}

CommandOutput cmd_optimize(const RunConfig& config, const fs::path& out) {
  CpuTimer timer;
  CommandOutput res;
  const std::string hash = config_hash(config);
  Benchmark bench = build_benchmark(benchmark_config(config.geometry));
  const auto& model = bench.model;
  const auto& o = config.optimization;
  const double target = design_target(model, o.start, o.phi_check);
  DesignProblem problem = design_problem(config, target);
  DesignOptions dopts = design_options(config);

  DesignSolution sol;
  long full_solves = 0;
  long reduced_solves = 0;
  int outer = 0;
  bool converged = false;
  std::string reason;
  if (o.backend == "full") {
    FullBackend fb(model);
    sol = optimize_design(model, problem, fb, o.start, -1.0, dopts);
    full_solves = fb.solves();
    converged = sol.converged;
    CsvTable h("SQP iterations", {"iter", "objective", "violation", "kkt", "step", "evaluations"},
               {"-", "length^2", "-", "-", "-", "-"});
    for (const auto& it : sol.history) {
      h.add_row({static_cast<double>(it.iter), it.objective, it.violation, it.kkt, it.step,
                 static_cast<double>(it.evaluations)});
    }
    emit(res, h, out / "history.csv", hash);
  } else {
    StabilityConstants c = compute_stability_constants(model);
    Algorithm1Options aopts;
    aopts.tol = o.tol;
    aopts.max_outer = o.max_outer;
    aopts.design = dopts;
    Algorithm1Result r = run_algorithm1(model, problem, o.start, c, aopts);
    sol = r.design;
    full_solves = r.trace.full_solves;
    reduced_solves = r.trace.reduced_solves;
    outer = static_cast<int>(r.trace.rows.size());
    converged = r.trace.converged;
    if (sol.converged && !converged) reason = "outer loop stopped after " + std::to_string(outer) + " iterations";
    CsvTable t("goal-oriented loop", {"iter", "E0_full", "E0_rom", "V", "sqp_iter", "delta_u", "ell", "p1", "p2", "p3", "xi"},
               {"-", "potential", "potential", "length^2", "-", "W-norm", "-", "length", "length", "length", "potential"});
    for (const auto& row : r.trace.rows) {
      t.add_row({static_cast<double>(row.iter), row.e0_full, row.e0_rom, row.volume,
                 static_cast<double>(row.sqp_iterations), row.delta_u, static_cast<double>(row.ell), row.p[0], row.p[1],
                 row.p[2], row.xi});
    }
    emit(res, t, out / "trace.csv", hash);
  }

  if (reason.empty()) reason = sol.status;
  const double e0 = design_target(model, sol.p, o.phi_check);
  GridMaximum worst = worst_case_output(model, problem, sol.p, config.uncertainty.grid_points);
  const double v0 = o.start[0] * o.start[1];
  CsvTable s("optimization summary",
             {"mode", "backend", "V", "V_percent", "p1", "p2", "p3", "xi", "E0", "E0_target", "E0_worst", "phi_worst",
              "grid_resolution", "iterations", "outer_iterations", "full_solves", "reduced_solves", "converged"},
             {"-", "-", "length^2", "%", "length", "length", "length", "potential", "potential", "potential", "potential",
              "deg", "deg", "-", "-", "-", "-", "-"});
  s.add_row(std::vector<std::string>{
      o.mode, o.backend, format_number(sol.volume), format_number(100.0 * sol.volume / v0), format_number(sol.p[0]),
      format_number(sol.p[1]), format_number(sol.p[2]), format_number(sol.xi), format_number(e0), format_number(target),
      format_number(worst.value), format_number(worst.argmax[0]), format_number(worst.resolution),
      std::to_string(sol.iterations), std::to_string(outer), std::to_string(full_solves),
      std::to_string(reduced_solves), converged ? "1" : "0"});
  emit(res, s, out / "summary.csv", hash);

  std::ostringstream os;
  os << "verb: optimize\nconfig_hash: " << hash << "\nmode: " << o.mode << "\nbackend: " << o.backend
     << "\nstatus: " << (converged ? "converged" : "not converged (" + reason + ")") << "\nvolume: "
     << format_number(sol.volume) << "\nE0: " << format_number(e0) << "\nE0_worst: " << format_number(worst.value)
     << "\nE0_target: " << format_number(target) << "\nfull_solves: " << full_solves
     << "\nreduced_solves: " << reduced_solves << "\n";
  write_report(res, out, os.str(), timer.seconds());
  if (!converged) throw NumericalError("optimization did not converge: " + reason);
  return res;
}

}  // namespace certrom
