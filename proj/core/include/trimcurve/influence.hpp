#pragma once

// Efficient-influence-function evaluation for smoothed trimmed treatment
// effects.  All curve-type forms are UNCENTERED: their empirical mean
// estimates the corresponding functional (numerator / denominator / smoothed
// average curve), which is what the one-step estimators average.
//
// For a treatment level a, threshold t, kernel K_h and smooth indicator S:
//
//   phi_num = K_h(A-a) (Y - mu(X,A)) S(pi(A|X),t) / pi(A|X)
//           + K_h(A-a) mu(X,A) dS/dpi(pi(A|X),t)
//           + Int K_h(a0-a) mu(X,a0) [S(pi(a0|X),t) - dS/dpi(pi(a0|X),t) pi(a0|X)] da0
//
//   phi_den = K_h(A-a) dS/dpi(pi(A|X),t)
//           + Int K_h(a0-a) [S(pi(a0|X),t) - dS/dpi(pi(a0|X),t) pi(a0|X)] da0
//
//   phi_sate = K_h(A-a) (Y - mu(X,A)) / pi(A|X) + Int K_h(a0-a) mu(X,a0) da0
//
// plus d/dt versions (S -> dS/dt, dS/dpi -> d2S/dpi dt) and discrete /
// binary-contrast analogues where the kernel is an exact indicator A == a.
//
// Every integral of one estimation pass uses one shared QuadratureGrid so
// discretization error cancels in algebraic identities.

#include <cstddef>
#include <span>
#include <vector>

#include "trimcurve/dataset.hpp"
#include "trimcurve/nuisance.hpp"
#include "trimcurve/smoothing.hpp"

namespace trimcurve {

// Inverse-propensity terms are refused (NonpositivePropensityError) when the
// kernel weight is active and the propensity sits at or below this floor.
inline constexpr double kPropensityFloor = 1e-12;

struct EifContext {
    const NuisanceModel* model = nullptr;
    KernelConfig kernel;
    IndicatorConfig indicator;
    const QuadratureGrid* grid = nullptr;  // unused by the discrete variants
    double a = 0.0;                        // evaluation treatment level
    double t = 0.0;                        // trimming threshold
};

// --- per-record evaluation -------------------------------------------------

double eif_sate(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);
double eif_num(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);
double eif_den(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);
double eif_num_dt(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);
double eif_den_dt(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);

// Centered influence function of the ratio psi = psi_num/psi_den, evaluated
// directly in its three-term form.  psi_den must be strictly positive.
double eif_ratio(const Record& r, const EifContext& ctx, double psi_den, double psi,
                 std::ptrdiff_t row = -1);

// Discrete-treatment analogues (ctx.a is the treatment level, matched
// exactly; ctx.grid is ignored).
double eif_num_discrete(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);
double eif_den_discrete(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);
double eif_num_discrete_dt(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);
double eif_den_discrete_dt(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);

// Binary average-treatment-effect contrast with the two-sided indicator
// smoothing t < pi(1|X) < 1-t.  Records must have a in {0,1}.
double eif_binary_contrast_num(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);
double eif_binary_contrast_den(const Record& r, const EifContext& ctx, std::ptrdiff_t row = -1);

// --- batch evaluation ------------------------------------------------------

// Nuisance values cached per (record, grid point) plus at the observed
// treatment.  The table depends on neither the evaluation level a nor the
// threshold t, so one table serves a whole curve and threshold search.
struct NuisanceTable {
    std::size_t n = 0;
    std::size_t grid_size = 0;
    bool has_pi = false, has_mu = false;
    std::vector<double> pi_grid, mu_grid;  // [record][grid] row-major
    std::vector<double> pi_obs, mu_obs;    // at the observed treatment
    std::vector<double> a_obs, y_obs, w_obs;

    std::span<const double> pi_row(std::size_t u) const {
        return {pi_grid.data() + u * grid_size, grid_size};
    }
    std::span<const double> mu_row(std::size_t u) const {
        return {mu_grid.data() + u * grid_size, grid_size};
    }
};

NuisanceTable build_nuisance_table(const Dataset& data, const NuisanceModel& model,
                                   const QuadratureGrid& grid, bool need_pi = true,
                                   bool need_mu = true);

// Shared per-(a,t) state: kernel row over the grid and indicator config.
// The per-unit methods are the single arithmetic used everywhere, so batch
// and per-record paths agree bit for bit.
class EifSlice {
public:
    EifSlice(const QuadratureGrid& grid, const KernelConfig& kernel,
             const IndicatorConfig& indicator, double a, double t);

    double sate(const NuisanceTable& tab, std::size_t u) const;
    double num(const NuisanceTable& tab, std::size_t u) const;
    double den(const NuisanceTable& tab, std::size_t u) const;
    double num_dt(const NuisanceTable& tab, std::size_t u) const;
    double den_dt(const NuisanceTable& tab, std::size_t u) const;
    double ratio(const NuisanceTable& tab, std::size_t u, double psi_den, double psi) const;

    double a() const { return a_; }
    double t() const { return t_; }

private:
    double kernel_at_obs(double a_obs) const { return kernel_weight(a_obs - a_, kernel_); }
    void check_propensity(double k_obs, double pi_obs, std::size_t u) const;

    std::vector<double> kw_;  // quadrature weight * kernel, per grid point
    KernelConfig kernel_;
    IndicatorConfig ind_;
    double a_, t_;
};

struct EifRequest {
    bool sate = false;
    bool num_den = false;
    bool derivs = false;
};

struct EifValues {
    std::vector<double> sate, num, den, num_dt, den_dt;
    std::vector<double> weights;
    std::size_t size() const { return weights.size(); }
};

EifValues compute_eif_values(const NuisanceTable& tab, const QuadratureGrid& grid,
                             const KernelConfig& kernel, const IndicatorConfig& indicator,
                             double a, double t, const EifRequest& req);
EifValues compute_eif_values(const Dataset& data, const EifContext& ctx, const EifRequest& req);

} // namespace trimcurve
