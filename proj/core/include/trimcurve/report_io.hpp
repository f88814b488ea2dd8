#pragma once

// Plain-text result serialization.  All floating point values are written
// with %.17g so round-trips and cross-run byte comparisons are exact.

#include <ostream>
#include <span>
#include <string>

#include "trimcurve/estimators.hpp"
#include "trimcurve/simlab.hpp"
#include "trimcurve/tuning.hpp"

namespace trimcurve {

std::string format_g17(double v);

// curve.csv: one row per (level, estimator) evaluation.
void write_curve_csv(std::ostream& out, std::span<const EstimateReport> reports);

// metrics.csv: aggregated experiment rows.
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

// cells.csv: per-level diagnostics behind the metrics.
void write_cells_csv(std::ostream& out, std::span<const CellRow> cells);

// profile.csv: trimmed-population covariate profile.
void write_profile_csv(std::ostream& out, std::span<const ProfileRow> rows);

// risk_path.csv / entropy_path.csv: tuning sweeps with the pick marked.
void write_risk_csv(std::ostream& out, const BandwidthSelection& sel);
void write_entropy_csv(std::ostream& out, const EpsilonSelection& sel);

// File variants; throw Error when the file cannot be written.
void write_curve_csv_file(const std::string& path, std::span<const EstimateReport> reports);
void write_metrics_csv_file(const std::string& path, std::span<const MetricsRow> rows);
void write_cells_csv_file(const std::string& path, std::span<const CellRow> cells);
void write_profile_csv_file(const std::string& path, std::span<const ProfileRow> rows);
void write_risk_csv_file(const std::string& path, const BandwidthSelection& sel);
void write_entropy_csv_file(const std::string& path, const EpsilonSelection& sel);

} // namespace trimcurve
