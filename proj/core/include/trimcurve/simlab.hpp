#pragma once

// Simulation laboratory: benchmark data-generating processes, brute-force
// truth tables for every estimand the estimators target, and a Monte Carlo
// experiment runner producing RMSE / coverage summaries across synthetic
// nuisance convergence rates.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trimcurve/dataset.hpp"
#include "trimcurve/estimators.hpp"
#include "trimcurve/nuisance.hpp"
#include "trimcurve/smoothing.hpp"

namespace trimcurve {

enum class DgpId {
    Continuous,  // X ~ U(0,1), A|X ~ N(m(X), sigma_a^2), Y|X ~ N(mu(X), sigma_y^2)
    Binary,      // X ~ U(0,1), A|X ~ Bern(m(X)),          Y|X ~ N(mu(X), sigma_y^2)
};

std::string_view dgp_name(DgpId id);
std::optional<DgpId> dgp_from_name(std::string_view name);

// Piecewise benchmark nuisances on x in [0,1] (domain-checked).  dgp_m is
// E[A|X=x] for the continuous design and P(A=1|X=x) for the binary one;
// dgp_mu is E[Y|X=x, A=a], constant in a by construction.
double dgp_m(double x);
double dgp_mu(double x);

struct DgpSpec {
    DgpId id = DgpId::Continuous;
    double sigma_a = 0.2;
    double sigma_y = 0.5;
    std::size_t n = 1000;
};

// Exact propensity density / probability and outcome regression for a spec.
std::shared_ptr<const NuisanceModel> make_true_model(const DgpSpec& spec);

Dataset generate_dataset(const DgpSpec& spec, std::uint64_t seed);

// One treatment level of the brute-force truth table.  Every Monte Carlo
// value carries its own standard error; *_se for ratios comes from the
// delta method.  Quantities at the estimated-threshold targets are defined
// only when the threshold equation has a root inside the search range.
struct TruthEntry {
    double a = 0.0;
    double p_a = 0.0;  // normalized marginal treatment weight at a

    double sate = 0.0, sate_se = 0.0;      // kernel-smoothed mean, no trimming
    double num = 0.0, num_se = 0.0;        // smoothed trimmed numerator at the fixed t
    double den = 0.0, den_se = 0.0;        // smoothed trimmed mass at the fixed t
    double state = 0.0, state_se = 0.0;    // num / den
    double tate = 0.0, tate_se = 0.0;      // hard-indicator trimmed mean at the fixed t

    double t0 = 0.0;                       // root of den(a; t) = 1 - gamma
    bool t0_defined = false;
    double num_t0 = 0.0, num_t0_se = 0.0;
    double state_t0 = 0.0, state_t0_se = 0.0;

    double t0_pi = 0.0;                    // gamma-quantile of pi(a|X)
    double tate_t0pi = 0.0, tate_t0pi_se = 0.0;
};

struct TruthTable {
    DgpSpec dgp;
    double h = 0.1;
    double epsilon = 0.01;
    double t_fixed = 0.1;
    double gamma = 0.2;
    std::size_t mc_n = 100000;
    std::uint64_t seed = 1;
    std::vector<TruthEntry> entries;
};

// Plug-in Monte Carlo evaluation of every estimand with the true nuisances:
// mc_n covariate draws, treatment integrals on `quad`, thresholds found by
// bisection of the oracle trimmed mass over [trim.t_min, trim.t_max], and
// p_a from a ten-fold larger draw of the treatment marginal, normalized over
// a_grid.  The fixed threshold is trim.t.  The binary design ignores `quad`
// and expects every level in a_grid to be 0 or 1.
TruthTable compute_truth(const DgpSpec& spec, const KernelConfig& kernel,
                         const IndicatorConfig& indicator, const TrimSpec& trim,
                         std::span<const double> a_grid, const QuadratureGrid& quad,
                         std::size_t mc_n = 100000, std::uint64_t seed = 1, unsigned threads = 1);

// JSON-file cache keyed by every input above plus a format version.  An
// empty cache_dir disables caching; unreadable or mismatched files are
// recomputed and rewritten.
TruthTable compute_truth_cached(const DgpSpec& spec, const KernelConfig& kernel,
                                const IndicatorConfig& indicator, const TrimSpec& trim,
                                std::span<const double> a_grid, const QuadratureGrid& quad,
                                std::size_t mc_n, std::uint64_t seed, unsigned threads,
                                const std::string& cache_dir);

struct ExperimentConfig {
    DgpSpec dgp;
    std::size_t reps = 200;
    std::vector<double> alphas = {0.1, 0.3, 0.5};  // synthetic nuisance rates n^{-alpha}
    bool true_nuisances = false;                   // bypass the noise wrapper entirely
    std::vector<EstimatorId> estimators;           // empty: resolved from dgp + trim mode
    std::vector<double> a_grid;                    // empty: {0,0.05,...,1} / {1} (binary)
    TrimSpec trim;
    KernelConfig kernel;
    IndicatorConfig indicator;
    double conf = 0.95;
    std::size_t truth_mc_n = 100000;
    std::uint64_t seed = 1;
    unsigned threads = 0;     // 0: hardware concurrency
    std::string cache_dir;    // "": no truth caching
};

struct MetricsRow {
    EstimatorId estimator = EstimatorId::StateDr;
    double alpha = 0.0;
    std::size_t n = 0;
    std::size_t reps = 0;
    double rmse = 0.0;           // sum_a p_a * sqrt(mean_reps (est - target)^2)
    double coverage = 0.0;       // NaN for estimators without an interval
    double mean_ci_width = 0.0;  // NaN likewise
    std::size_t n_failed = 0;    // failed (replication, level) cells
};

// Per-(estimator, alpha, level) diagnostics behind the aggregated rows.
struct CellRow {
    EstimatorId estimator = EstimatorId::StateDr;
    double alpha = 0.0;
    double a = 0.0;
    double target = 0.0;
    double mean_est = 0.0;
    double rmse = 0.0;
    double coverage = 0.0;
    double mean_ci_width = 0.0;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
};

struct ExperimentResult {
    ExperimentConfig config;  // with defaults resolved
    TruthTable truth;
    std::vector<MetricsRow> rows;    // estimator-major, alpha-minor
    std::vector<CellRow> cells;
};

// Runs reps independent replications per alpha: draw a dataset, wrap the true
// nuisances in the synthetic rate-alpha noise, evaluate every estimator over
// the grid, and score against each estimator's own target in the truth table.
// Failures are excluded from the summaries and counted.  Replications use
// per-(alpha, rep) RNG streams, so results do not depend on `threads`.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

} // namespace trimcurve
