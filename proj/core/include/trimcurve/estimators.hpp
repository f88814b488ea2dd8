#pragma once

// One-step estimators for smoothed / trimmed average treatment effect curves,
// their closed-form confidence intervals, threshold estimation, and
// cross-fitting support.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trimcurve/dataset.hpp"
#include "trimcurve/influence.hpp"
#include "trimcurve/nuisance.hpp"
#include "trimcurve/smoothing.hpp"

namespace trimcurve {

enum class EstimatorId {
    SateDr,        // smoothed average effect, doubly robust, no trimming
    PluginTrim,    // trimmed plug-in regression mean (no CI)
    EifPluginTrim, // mean of untrimmed-EIF values over the trimmed subsample
    StateDr,       // smoothed trimmed effect, one-step, fixed threshold
    StateDrEstT,   // smoothed trimmed effect at the estimated threshold
    BinaryState,   // discrete-treatment smoothed trimmed effect (one-step)
};

std::string_view estimator_name(EstimatorId id);
std::optional<EstimatorId> estimator_from_name(std::string_view name);

struct TrimSpec {
    enum class Mode { FixedT, Quantile };
    Mode mode = Mode::FixedT;
    double t = 0.1;       // FixedT threshold
    double gamma = 0.2;   // Quantile: trim the gamma least-overlapped mass
    double t_min = 0.0, t_max = 0.5, t_step = 0.005;  // threshold search grid
};

struct EstimateReport {
    EstimatorId id = EstimatorId::StateDr;
    double a = 0.0;
    double psi_hat = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    double ci_lo = std::numeric_limits<double>::quiet_NaN();
    double ci_hi = std::numeric_limits<double>::quiet_NaN();
    double num = std::numeric_limits<double>::quiet_NaN();
    double den = std::numeric_limits<double>::quiet_NaN();
    double t_used = std::numeric_limits<double>::quiet_NaN();
    double conf_level = 0.95;
    std::size_t n_eval = 0;     // records entering the final empirical mean
    bool se_defined = false;
    bool ci_defined = false;
    bool degenerate = false;    // n_eval == 1, se pinned to 0
    std::string status;         // empty on success, error text otherwise
    std::shared_ptr<const EifValues> eif;
};

struct ThresholdResult {
    enum class Boundary { None, AtMin, AtMax };
    double t_hat = std::numeric_limits<double>::quiet_NaN();
    Boundary boundary = Boundary::None;
    std::vector<double> t_grid;
    std::vector<double> den_path;  // estimated trimmed mass at each grid t
};

// Shared tables for one (data, model, kernel, indicator, grid) tuple; every
// per-(a, t) evaluation is then pure arithmetic.  The referenced data and
// model must outlive the evaluator.
class CurveEvaluator {
public:
    CurveEvaluator(const Dataset& data, const NuisanceModel& model, const KernelConfig& kernel,
                   const IndicatorConfig& indicator, const QuadratureGrid& grid);

    EstimateReport sate_dr(double a, double conf) const;
    EstimateReport state_fixed_t(double a, double t, double conf) const;
    EstimateReport state_estimated_t(double a, const TrimSpec& trim, double conf) const;
    EstimateReport plugin_trim(double a, double t, double conf) const;
    EstimateReport eif_plugin_trim(double a, double t, double conf) const;
    EstimateReport discrete_state(double a, const TrimSpec& trim, double conf) const;

    // Full threshold line search: smallest grid t with den(t) <= 1 - gamma.
    ThresholdResult threshold(double a, const TrimSpec& trim) const;

    // Empirical gamma-quantile of pi(a|X) under the record weights.
    double quantile_threshold(double a, double gamma) const;

    // pi(a|X_u) / mu(X_u, a) for all records at an arbitrary level a.
    std::vector<double> pi_at(double a) const;
    std::vector<double> mu_at(double a) const;

    const NuisanceTable& table() const { return table_; }
    const QuadratureGrid& grid() const { return grid_; }

private:
    // Early-exit search used by the estimator (same result as the full path).
    std::pair<double, ThresholdResult::Boundary> threshold_fast(double a, const TrimSpec& trim) const;
    double den_at(const EifSlice& slice) const;

    const Dataset& data_;
    const NuisanceModel& model_;
    KernelConfig kernel_;
    IndicatorConfig ind_;
    QuadratureGrid grid_;
    NuisanceTable table_;
    double sum_w_ = 0.0;
};

// --- convenience single-shot wrappers ---------------------------------------

EstimateReport estimate_sate_dr(const Dataset& data, const NuisanceModel& model,
                                const KernelConfig& kernel, const QuadratureGrid& grid, double a,
                                double conf = 0.95);
EstimateReport estimate_state_fixed_t(const Dataset& data, const NuisanceModel& model,
                                      const KernelConfig& kernel, const IndicatorConfig& indicator,
                                      const QuadratureGrid& grid, double a, double t,
                                      double conf = 0.95);
EstimateReport estimate_state_estimated_t(const Dataset& data, const NuisanceModel& model,
                                          const KernelConfig& kernel,
                                          const IndicatorConfig& indicator,
                                          const QuadratureGrid& grid, double a,
                                          const TrimSpec& trim, double conf = 0.95);
EstimateReport estimate_plugin_trim(const Dataset& data, const NuisanceModel& model, double a,
                                    double t, double conf = 0.95);
EstimateReport estimate_eif_plugin_trim(const Dataset& data, const NuisanceModel& model,
                                        const KernelConfig& kernel, const QuadratureGrid& grid,
                                        double a, double t, double conf = 0.95);
ThresholdResult estimate_threshold(const Dataset& data, const NuisanceModel& model,
                                   const KernelConfig& kernel, const IndicatorConfig& indicator,
                                   const QuadratureGrid& grid, double a, const TrimSpec& trim);
double quantile_plugin_threshold(const Dataset& data, const NuisanceModel& model, double a,
                                 double gamma);

// --- binary / discrete treatments -------------------------------------------

// Untrimmed doubly robust mean under treatment level 1.
EstimateReport estimate_binary_dr(const Dataset& data, const NuisanceModel& model,
                                  double conf = 0.95);
EstimateReport estimate_binary_plugin_trim(const Dataset& data, const NuisanceModel& model,
                                           double t, double conf = 0.95);
EstimateReport estimate_binary_eif_plugin_trim(const Dataset& data, const NuisanceModel& model,
                                               double t, double conf = 0.95);
// One-step smoothed trimmed mean at level 1 (fixed or estimated threshold).
EstimateReport estimate_binary_state(const Dataset& data, const NuisanceModel& model,
                                     const IndicatorConfig& indicator, const TrimSpec& trim,
                                     double conf = 0.95);
double binary_quantile_threshold(const Dataset& data, const NuisanceModel& model, double gamma);

// --- cross-fitting -----------------------------------------------------------

struct CrossfitPlan {
    std::size_t k = 2;
    std::vector<std::size_t> fold_of;  // fold index per record

    // Seeded shuffle into k near-equal folds.
    static CrossfitPlan make(std::size_t n, std::size_t k, std::uint64_t seed);
};

using FitRecipe = std::function<std::shared_ptr<const NuisanceModel>(const Dataset& train)>;

// Nuisance view routing each record's queries to the model fit on the
// complement of its fold.  Queries without a record row are refused.
std::shared_ptr<const NuisanceModel> make_crossfit_model(const Dataset& data,
                                                         const CrossfitPlan& plan,
                                                         const FitRecipe& recipe);

EstimateReport crossfit_estimate(const Dataset& data, const CrossfitPlan& plan,
                                 const FitRecipe& recipe, EstimatorId id, double a,
                                 const KernelConfig& kernel, const IndicatorConfig& indicator,
                                 const QuadratureGrid& grid, const TrimSpec& trim,
                                 double conf = 0.95);

// --- curve + profile ----------------------------------------------------------

// Evaluates each requested estimator over the grid; per-point errors are
// captured in the report status instead of aborting the sweep.
std::vector<EstimateReport> estimate_curve(const Dataset& data, const NuisanceModel& model,
                                           std::span<const EstimatorId> estimators,
                                           std::span<const double> a_grid,
                                           const KernelConfig& kernel,
                                           const IndicatorConfig& indicator,
                                           const QuadratureGrid& grid, const TrimSpec& trim,
                                           double conf = 0.95, unsigned threads = 1);

struct ProfileRow {
    double a = 0.0;
    std::size_t covariate = 0;
    double mean_all = std::numeric_limits<double>::quiet_NaN();
    double mean_trimmed = std::numeric_limits<double>::quiet_NaN();
    bool all_defined = false;
    bool trimmed_defined = false;
};

// Kernel-weighted covariate means near each a, overall and within the
// smoothed trimmed population (weights K_h(A_i - a) S(pi(a|X_i), t)).
std::vector<ProfileRow> trimmed_population_profile(const Dataset& data,
                                                   const NuisanceModel& model,
                                                   const KernelConfig& kernel,
                                                   const IndicatorConfig& indicator, double t,
                                                   std::size_t covariate,
                                                   std::span<const double> a_grid);

// Two-sided normal critical value for a confidence level in (0,1).
double z_critical(double conf);

} // namespace trimcurve
