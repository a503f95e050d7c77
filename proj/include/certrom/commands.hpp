// SPDX-License-Identifier: Apache-2.0
//
// Experiments behind the command-line verbs. Each writes its CSV tables
// and a plain-text report (the only place CPU time appears) into `out`.

#pragma once

#include <filesystem>

#include "certrom/config.hpp"

namespace certrom {

struct CommandOutput {
  std::vector<std::filesystem::path> files;
  std::string report;
};

/// Full solve at config.solve; solution.csv (node, x, y, u) and output.csv.
CommandOutput cmd_solve(const RunConfig& config, const std::filesystem::path& out);
/// Training-grid snapshots, spectrum.csv and the POD error identity per ℓ.
CommandOutput cmd_pod_study(const RunConfig& config, const std::filesystem::path& out);
/// error_study.csv: max test errors and bounds per ℓ and order.
CommandOutput cmd_error_study(const RunConfig& config, const std::filesystem::path& out);
/// Optimization with the configured mode and backend; summary.csv plus
/// trace.csv (rom) or history.csv (full).
CommandOutput cmd_optimize(const RunConfig& config, const std::filesystem::path& out);

struct PodIdentityRow {
  int ell = 0;
  double eigenvalue = 0.0;  // λ_ℓ (0 for ℓ = 0)
  double cumulative = 0.0;  // Σ_{i≤ℓ} λ_i / Σ λ_i
  double tail = 0.0;        // Σ_{i>ℓ} λ_i
  double projection = 0.0;  // Σ_j β_j ‖u_j − Π_ℓ u_j‖²_W
};

/// Both sides of the POD error identity for ℓ = 0..rank (extended precision).
std::vector<PodIdentityRow> pod_identity(const SnapshotSet& snapshots, const PodBasis& basis);

/// Snapshots {u, u_p} on the configured training grid.
SnapshotSet training_snapshots(const AffineModel& model, const StudyConfig& study);

}  // namespace certrom
