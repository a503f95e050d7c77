// SPDX-License-Identifier: Apache-2.0
//
// Magnet design problem on the benchmark: minimize the magnet volume p₁p₂
// subject to reaching a target output, nominally or robustly with respect
// to the magnetization angle. The output can be evaluated by the full or
// by a reduced model; the goal-oriented loop enriches the reduced basis at
// the optimizer's iterates until both agree.

#pragma once

#include <limits>
#include <memory>
#include <optional>

#include "certrom/certification.hpp"
#include "certrom/robust.hpp"

namespace certrom {

enum class DesignMode { nominal, robust_linear, robust_quadratic };
std::string to_string(DesignMode m);
DesignMode parse_design_mode(const std::string& s);

/// E₀ and its derivatives at one (p, φ). The last bundle and the
/// factorization are kept, so a gradient request at the point of the
/// previous value request only adds the missing sensitivity solves.
class OutputBackend {
 public:
  virtual ~OutputBackend() = default;
  /// 𝔼ᵀu_α for every α in `indices` (each index over (p, φ)).
  virtual std::map<MultiIndex, double> outputs(std::span<const double> p, std::span<const double> phi,
                                               const std::vector<MultiIndex>& indices) = 0;
  /// Linear solves performed so far.
  [[nodiscard]] virtual long solves() const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

class FullBackend final : public OutputBackend {
 public:
  explicit FullBackend(const AffineModel& model, double tol = 1e-10);
  std::map<MultiIndex, double> outputs(std::span<const double> p, std::span<const double> phi,
                                       const std::vector<MultiIndex>& indices) override;
  [[nodiscard]] long solves() const override;
  [[nodiscard]] std::string name() const override { return "full"; }

 private:
  const AffineModel& model_;
  double tol_;
  std::unique_ptr<FullOrderSolver> solver_;
  std::vector<double> p_;
  std::optional<SensitivityBundle> bundle_;
  long retired_ = 0;
};

class RomBackend final : public OutputBackend {
 public:
  /// `basis` must be projected and outlive the backend.
  RomBackend(const AffineModel& model, const PodBasis& basis);
  std::map<MultiIndex, double> outputs(std::span<const double> p, std::span<const double> phi,
                                       const std::vector<MultiIndex>& indices) override;
  [[nodiscard]] long solves() const override;
  [[nodiscard]] std::string name() const override { return "rom"; }

 private:
  const AffineModel& model_;
  const PodBasis& basis_;
  std::unique_ptr<ReducedSolver> solver_;
  std::vector<double> p_;
  std::optional<SensitivityBundle> bundle_;
  long retired_ = 0;
};

struct DesignProblem {
  DesignMode mode = DesignMode::nominal;
  double rho = 100.0;      // weight of the target slack ξ
  double target = 0.0;     // E₀^d
  double phi_check = 90.0; // angle of the nominal problem and of all output checks
  UncertaintySet set{Vector::Constant(1, 85.0), Vector::Constant(1, 5.0), NormIndex::infinity};
  std::array<double, 3> lower{1.0, 1.0, 5.0};
  std::array<double, 3> upper{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 14.0};
  double height_limit = 15.0;  // p₂ + p₃ ≤ height_limit
  double slope_limit = 50.0;   // 3p₁ − 2p₃ ≤ slope_limit

  /// Angle at which the φ-dependent constraint is expanded.
  [[nodiscard]] double expansion_angle() const { return mode == DesignMode::nominal ? phi_check : set.nominal[0]; }
  void validate() const;
};

/// Full solve at (p0, φ_check): the target used by the benchmark problems.
double design_target(const AffineModel& model, std::span<const double> p0, double phi = 90.0);

/// Variables x = (p₁, p₂, p₃, ξ); functions g₀ = p₁p₂ + ρξ and
/// g₁ = p₂ + p₃ − h, g₂ = 3p₁ − 2p₃ − s, g₃ = E₀^d − E₀ − ξ, then the finite
/// lower bounds, −ξ ≤ 0 and the finite upper bounds. Only g₃ depends on φ.
UncertainProblem design_uncertain_problem(const AffineModel& model, const DesignProblem& problem,
                                          OutputBackend& backend);

/// Nominal problem, linear counterpart (slack form for k = ∞) or the MPEC
/// with relaxation τ, depending on the mode. `backend` must outlive the result.
NlpProblem build_design_nlp(const AffineModel& model, const DesignProblem& problem, OutputBackend& backend,
                            double tau = 0.0);

struct DesignOptions {
  SqpOptions sqp;
  MpecOptions mpec;
};

struct DesignSolution {
  std::array<double, 3> p{};
  double xi = 0.0;
  double volume = 0.0;
  double objective = 0.0;
  double violation = 0.0;
  double kkt = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
  Vector z;  // full decision vector of the solved NLP
  std::vector<SqpIteration> history;  // concatenated over continuation steps
  std::optional<MpecResult> mpec;
};

/// Optimizes from (p0, ξ0); ξ0 < 0 starts from the smallest ξ making the
/// approximated constraint feasible at p0.
DesignSolution optimize_design(const AffineModel& model, const DesignProblem& problem, OutputBackend& backend,
                               std::span<const double> p0, double xi0 = -1.0, const DesignOptions& opts = {});

/// Snapshot indices per mode: state and p-sensitivities, plus ∂_φ (and ∂_φφ)
/// with their p-derivatives in the robust modes.
std::vector<MultiIndex> snapshot_indices(const AffineModel& model, DesignMode mode);

struct LoopRow {
  int iter = 0;
  double e0_full = 0.0;
  double e0_rom = 0.0;
  double volume = 0.0;
  int sqp_iterations = 0;
  double delta_u = 0.0;  // certified state error bound at the new iterate
  int ell = 0;
  std::array<double, 3> p{};
  double xi = 0.0;
  bool sqp_converged = false;
};

struct LoopTrace {
  std::vector<LoopRow> rows;
  long full_solves = 0;
  long reduced_solves = 0;
  bool converged = false;
  std::string status;
};

struct Algorithm1Options {
  double tol = 1e-4;
  int max_outer = 10;
  DesignOptions design;
};

struct Algorithm1Result {
  DesignSolution design;
  LoopTrace trace;
  SnapshotSet snapshots;
  PodBasis basis;
};

/// Goal-oriented loop: enrich at p0, then repeat {POD at full rank,
/// reduced optimization, full and reduced output at the new iterate}
/// until |E₀^ROM − E₀^full| ≤ tol, enriching at each new iterate.
Algorithm1Result run_algorithm1(const AffineModel& model, const DesignProblem& problem, std::span<const double> p0,
                                const StabilityConstants& constants, const Algorithm1Options& opts = {});

/// Full solves expected by the loop for a given number of outer iterations.
long expected_full_solves(const AffineModel& model, DesignMode mode, int outer_iterations, bool converged);

/// Smallest output over the uncertainty set by brute force on a 1-D grid
/// (full solves, one factorization); `value` and `argmax` refer to it.
GridMaximum worst_case_output(const AffineModel& model, const DesignProblem& problem, std::span<const double> p,
                              long grid_points = 2001);

struct ErrorStudyRow {
  int ell = 0;
  std::vector<double> error;  // max over test points of ‖u_α − u^ℓ_α‖_W
  std::vector<double> bound;  // max over test points of Δ_α
  std::vector<double> min_effectivity;
  long violations = 0;        // (point, index) pairs with error > bound
};

struct ErrorStudy {
  std::vector<MultiIndex> indices;
  std::vector<std::string> labels;
  Vector eigenvalues;
  int rank = 0;
  int snapshots = 0;
  std::vector<ErrorStudyRow> rows;
};

/// Snapshots {u, u_p} at every training design (angle φ), nested bases of
/// the sizes in `ells` (clipped to the rank), errors and bounds of u, u_p
/// and u_φφ over the test designs.
ErrorStudy run_error_study(const AffineModel& model, const std::vector<std::array<double, 3>>& train,
                           const std::vector<std::array<double, 3>>& test, const std::vector<int>& ells,
                           const StabilityConstants& constants, double phi = 90.0);

/// Training and test grids of the benchmark study.
std::vector<std::array<double, 3>> tensor_grid(const std::vector<double>& a, const std::vector<double>& b,
                                               const std::vector<double>& c);
/// Centres of the boxes spanned by consecutive grid values.
std::vector<std::array<double, 3>> box_centres(const std::vector<double>& a, const std::vector<double>& b,
                                               const std::vector<double>& c);

/// The first ℓ columns of a basis, projected.
PodBasis truncate_basis(const AffineModel& model, const PodBasis& basis, int ell);

}  // namespace certrom
