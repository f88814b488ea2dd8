#include "trimcurve/influence.hpp"

#include <cmath>

#include "trimcurve/errors.hpp"

namespace trimcurve {

// Internal variant that lets callers control the row ids passed to the model
// (the public builder uses 0..n-1).
static NuisanceTable build_nuisance_table_rows(const Dataset& data, const NuisanceModel& model,
                                               const QuadratureGrid& grid, bool need_pi,
                                               bool need_mu, std::ptrdiff_t row_base);

namespace {

void require_context(const EifContext& ctx, bool needs_grid) {
    if (ctx.model == nullptr) throw Error("EifContext has no model");
    if (needs_grid && ctx.grid == nullptr) throw Error("EifContext has no quadrature grid");
}

// One-record table, so the per-record entry points share the batch arithmetic.
NuisanceTable single_record_table(const Record& r, const EifContext& ctx, std::ptrdiff_t row,
                                  bool need_pi, bool need_mu) {
    Dataset one;
    one.records.push_back(r);
    NuisanceTable tab = build_nuisance_table_rows(one, *ctx.model, *ctx.grid, need_pi, need_mu, row);
    return tab;
}

} // namespace

static NuisanceTable build_nuisance_table_rows(const Dataset& data, const NuisanceModel& model,
                                        const QuadratureGrid& grid, bool need_pi, bool need_mu,
                                        std::ptrdiff_t row_base) {
    NuisanceTable tab;
    tab.n = data.size();
    tab.grid_size = grid.size();
    tab.has_pi = need_pi;
    tab.has_mu = need_mu;
    tab.a_obs.resize(tab.n);
    tab.y_obs.resize(tab.n);
    tab.w_obs.resize(tab.n);
    if (need_pi) {
        tab.pi_grid.resize(tab.n * tab.grid_size);
        tab.pi_obs.resize(tab.n);
    }
    if (need_mu) {
        tab.mu_grid.resize(tab.n * tab.grid_size);
        tab.mu_obs.resize(tab.n);
    }
    for (std::size_t u = 0; u < tab.n; ++u) {
        const Record& r = data.records[u];
        const std::ptrdiff_t row = row_base >= 0 ? row_base : static_cast<std::ptrdiff_t>(u);
        tab.a_obs[u] = r.a;
        tab.y_obs[u] = r.y;
        tab.w_obs[u] = r.w;
        if (need_pi) {
            double* dst = tab.pi_grid.data() + u * tab.grid_size;
            for (std::size_t g = 0; g < tab.grid_size; ++g) dst[g] = model.pi(grid.points[g], r.x, row);
            tab.pi_obs[u] = model.pi(r.a, r.x, row);
        }
        if (need_mu) {
            double* dst = tab.mu_grid.data() + u * tab.grid_size;
            for (std::size_t g = 0; g < tab.grid_size; ++g) dst[g] = model.mu(r.x, grid.points[g], row);
            tab.mu_obs[u] = model.mu(r.x, r.a, row);
        }
    }
    return tab;
}

NuisanceTable build_nuisance_table(const Dataset& data, const NuisanceModel& model,
                                   const QuadratureGrid& grid, bool need_pi, bool need_mu) {
    return build_nuisance_table_rows(data, model, grid, need_pi, need_mu, -1);
}

EifSlice::EifSlice(const QuadratureGrid& grid, const KernelConfig& kernel,
                   const IndicatorConfig& indicator, double a, double t)
    : kernel_(kernel), ind_(indicator), a_(a), t_(t) {
    kw_.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
        kw_[g] = grid.weights[g] * kernel_weight(grid.points[g] - a, kernel);
}

void EifSlice::check_propensity(double k_obs, double pi_obs, std::size_t u) const {
    if (k_obs > 0.0 && !(pi_obs > kPropensityFloor))
        throw NonpositivePropensityError(pi_obs, static_cast<std::ptrdiff_t>(u));
}

double EifSlice::sate(const NuisanceTable& tab, std::size_t u) const {
    const double k_obs = kernel_at_obs(tab.a_obs[u]);
    const auto mu_row = tab.mu_row(u);
    double acc = 0.0;
    for (std::size_t g = 0; g < kw_.size(); ++g) acc += kw_[g] * mu_row[g];
    check_propensity(k_obs, tab.pi_obs[u], u);
    if (k_obs > 0.0) acc += k_obs * (tab.y_obs[u] - tab.mu_obs[u]) / tab.pi_obs[u];
    return acc;
}

double EifSlice::num(const NuisanceTable& tab, std::size_t u) const {
    const double k_obs = kernel_at_obs(tab.a_obs[u]);
    const auto pi_row = tab.pi_row(u);
    const auto mu_row = tab.mu_row(u);
    double acc = 0.0;
    for (std::size_t g = 0; g < kw_.size(); ++g) {
        const double s = smooth_indicator(pi_row[g], t_, ind_);
        const double ds = smooth_indicator_dpi(pi_row[g], t_, ind_);
        acc += kw_[g] * mu_row[g] * (s - ds * pi_row[g]);
    }
    check_propensity(k_obs, tab.pi_obs[u], u);
    if (k_obs > 0.0) {
        const double s_obs = smooth_indicator(tab.pi_obs[u], t_, ind_);
        const double ds_obs = smooth_indicator_dpi(tab.pi_obs[u], t_, ind_);
        acc += k_obs * (tab.y_obs[u] - tab.mu_obs[u]) * s_obs / tab.pi_obs[u];
        acc += k_obs * tab.mu_obs[u] * ds_obs;
    }
    return acc;
}

double EifSlice::den(const NuisanceTable& tab, std::size_t u) const {
    const double k_obs = kernel_at_obs(tab.a_obs[u]);
    const auto pi_row = tab.pi_row(u);
    double acc = 0.0;
    for (std::size_t g = 0; g < kw_.size(); ++g) {
        const double s = smooth_indicator(pi_row[g], t_, ind_);
        const double ds = smooth_indicator_dpi(pi_row[g], t_, ind_);
        acc += kw_[g] * (s - ds * pi_row[g]);
    }
    if (k_obs > 0.0) acc += k_obs * smooth_indicator_dpi(tab.pi_obs[u], t_, ind_);
    return acc;
}

double EifSlice::num_dt(const NuisanceTable& tab, std::size_t u) const {
    const double k_obs = kernel_at_obs(tab.a_obs[u]);
    const auto pi_row = tab.pi_row(u);
    const auto mu_row = tab.mu_row(u);
    double acc = 0.0;
    for (std::size_t g = 0; g < kw_.size(); ++g) {
        const double st = smooth_indicator_dt(pi_row[g], t_, ind_);
        const double spt = smooth_indicator_dpi_dt(pi_row[g], t_, ind_);
        acc += kw_[g] * mu_row[g] * (st - spt * pi_row[g]);
    }
    check_propensity(k_obs, tab.pi_obs[u], u);
    if (k_obs > 0.0) {
        const double st_obs = smooth_indicator_dt(tab.pi_obs[u], t_, ind_);
        const double spt_obs = smooth_indicator_dpi_dt(tab.pi_obs[u], t_, ind_);
        acc += k_obs * (tab.y_obs[u] - tab.mu_obs[u]) * st_obs / tab.pi_obs[u];
        acc += k_obs * tab.mu_obs[u] * spt_obs;
    }
    return acc;
}

double EifSlice::den_dt(const NuisanceTable& tab, std::size_t u) const {
    const double k_obs = kernel_at_obs(tab.a_obs[u]);
    const auto pi_row = tab.pi_row(u);
    double acc = 0.0;
    for (std::size_t g = 0; g < kw_.size(); ++g) {
        const double st = smooth_indicator_dt(pi_row[g], t_, ind_);
        const double spt = smooth_indicator_dpi_dt(pi_row[g], t_, ind_);
        acc += kw_[g] * (st - spt * pi_row[g]);
    }
    if (k_obs > 0.0) acc += k_obs * smooth_indicator_dpi_dt(tab.pi_obs[u], t_, ind_);
    return acc;
}

double EifSlice::ratio(const NuisanceTable& tab, std::size_t u, double psi_den, double psi) const {
    if (!(psi_den > 0.0)) throw DegenerateTrimmedPopulationError(psi_den);
    const double k_obs = kernel_at_obs(tab.a_obs[u]);
    const auto pi_row = tab.pi_row(u);
    const auto mu_row = tab.mu_row(u);
    double acc = 0.0;
    for (std::size_t g = 0; g < kw_.size(); ++g) {
        const double s = smooth_indicator(pi_row[g], t_, ind_);
        const double ds = smooth_indicator_dpi(pi_row[g], t_, ind_);
        acc += kw_[g] * (s - ds * pi_row[g]) * (mu_row[g] - psi);
    }
    check_propensity(k_obs, tab.pi_obs[u], u);
    if (k_obs > 0.0) {
        const double s_obs = smooth_indicator(tab.pi_obs[u], t_, ind_);
        const double ds_obs = smooth_indicator_dpi(tab.pi_obs[u], t_, ind_);
        acc += k_obs * (tab.y_obs[u] - tab.mu_obs[u]) * s_obs / tab.pi_obs[u];
        acc += k_obs * ds_obs * (tab.mu_obs[u] - psi);
    }
    return acc / psi_den;
}

// --- per-record entry points ------------------------------------------------

double eif_sate(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    require_context(ctx, true);
    const NuisanceTable tab = single_record_table(r, ctx, row, true, true);
    return EifSlice(*ctx.grid, ctx.kernel, ctx.indicator, ctx.a, ctx.t).sate(tab, 0);
}

double eif_num(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    require_context(ctx, true);
    const NuisanceTable tab = single_record_table(r, ctx, row, true, true);
    return EifSlice(*ctx.grid, ctx.kernel, ctx.indicator, ctx.a, ctx.t).num(tab, 0);
}

double eif_den(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    require_context(ctx, true);
    const NuisanceTable tab = single_record_table(r, ctx, row, true, false);
    return EifSlice(*ctx.grid, ctx.kernel, ctx.indicator, ctx.a, ctx.t).den(tab, 0);
}

double eif_num_dt(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    require_context(ctx, true);
    const NuisanceTable tab = single_record_table(r, ctx, row, true, true);
    return EifSlice(*ctx.grid, ctx.kernel, ctx.indicator, ctx.a, ctx.t).num_dt(tab, 0);
}

double eif_den_dt(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    require_context(ctx, true);
    const NuisanceTable tab = single_record_table(r, ctx, row, true, false);
    return EifSlice(*ctx.grid, ctx.kernel, ctx.indicator, ctx.a, ctx.t).den_dt(tab, 0);
}

double eif_ratio(const Record& r, const EifContext& ctx, double psi_den, double psi,
                 std::ptrdiff_t row) {
    require_context(ctx, true);
    const NuisanceTable tab = single_record_table(r, ctx, row, true, true);
    return EifSlice(*ctx.grid, ctx.kernel, ctx.indicator, ctx.a, ctx.t).ratio(tab, 0, psi_den, psi);
}

// --- discrete and binary variants -------------------------------------------

namespace {

struct DiscreteInputs {
    double pi_a, mu_a;
    bool treated;  // A == a exactly
};

DiscreteInputs discrete_inputs(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    require_context(ctx, false);
    DiscreteInputs in;
    in.pi_a = ctx.model->pi(ctx.a, r.x, row);
    in.mu_a = ctx.model->mu(r.x, ctx.a, row);
    in.treated = (r.a == ctx.a);
    return in;
}

} // namespace

double eif_num_discrete(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    const auto in = discrete_inputs(r, ctx, row);
    const double s = smooth_indicator(in.pi_a, ctx.t, ctx.indicator);
    const double ds = smooth_indicator_dpi(in.pi_a, ctx.t, ctx.indicator);
    double acc = in.mu_a * (s - ds * in.pi_a);
    if (in.treated) {
        if (!(in.pi_a > kPropensityFloor)) throw NonpositivePropensityError(in.pi_a, row);
        acc += (r.y - in.mu_a) * s / in.pi_a + in.mu_a * ds;
    }
    return acc;
}

double eif_den_discrete(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    const auto in = discrete_inputs(r, ctx, row);
    const double s = smooth_indicator(in.pi_a, ctx.t, ctx.indicator);
    const double ds = smooth_indicator_dpi(in.pi_a, ctx.t, ctx.indicator);
    return s - ds * in.pi_a + (in.treated ? ds : 0.0);
}

double eif_num_discrete_dt(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    const auto in = discrete_inputs(r, ctx, row);
    const double st = smooth_indicator_dt(in.pi_a, ctx.t, ctx.indicator);
    const double spt = smooth_indicator_dpi_dt(in.pi_a, ctx.t, ctx.indicator);
    double acc = in.mu_a * (st - spt * in.pi_a);
    if (in.treated) {
        if (!(in.pi_a > kPropensityFloor)) throw NonpositivePropensityError(in.pi_a, row);
        acc += (r.y - in.mu_a) * st / in.pi_a + in.mu_a * spt;
    }
    return acc;
}

double eif_den_discrete_dt(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    const auto in = discrete_inputs(r, ctx, row);
    const double st = smooth_indicator_dt(in.pi_a, ctx.t, ctx.indicator);
    const double spt = smooth_indicator_dpi_dt(in.pi_a, ctx.t, ctx.indicator);
    return st - spt * in.pi_a + (in.treated ? spt : 0.0);
}

namespace {

struct BinaryInputs {
    double pi1, mu1, mu0, a;
};

BinaryInputs binary_inputs(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    require_context(ctx, false);
    if (r.a != 0.0 && r.a != 1.0) throw Error("binary contrast needs treatments in {0,1}");
    BinaryInputs in;
    in.pi1 = ctx.model->pi(1.0, r.x, row);
    in.mu1 = ctx.model->mu(r.x, 1.0, row);
    in.mu0 = ctx.model->mu(r.x, 0.0, row);
    in.a = r.a;
    return in;
}

} // namespace

double eif_binary_contrast_num(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    const auto in = binary_inputs(r, ctx, row);
    const double s = smooth_indicator_two_sided(in.pi1, ctx.t, ctx.indicator);
    const double ds = smooth_indicator_two_sided_dpi(in.pi1, ctx.t, ctx.indicator);
    const double contrast = in.mu1 - in.mu0;
    double score;
    if (in.a == 1.0) {
        if (!(in.pi1 > kPropensityFloor)) throw NonpositivePropensityError(in.pi1, row);
        score = (r.y - in.mu1) / in.pi1;
    } else {
        if (!(1.0 - in.pi1 > kPropensityFloor)) throw NonpositivePropensityError(1.0 - in.pi1, row);
        score = -(r.y - in.mu0) / (1.0 - in.pi1);
    }
    return s * contrast + ds * (in.a - in.pi1) * contrast + s * score;
}

double eif_binary_contrast_den(const Record& r, const EifContext& ctx, std::ptrdiff_t row) {
    const auto in = binary_inputs(r, ctx, row);
    const double s = smooth_indicator_two_sided(in.pi1, ctx.t, ctx.indicator);
    const double ds = smooth_indicator_two_sided_dpi(in.pi1, ctx.t, ctx.indicator);
    return s + ds * (in.a - in.pi1);
}

// --- batch -------------------------------------------------------------------

EifValues compute_eif_values(const NuisanceTable& tab, const QuadratureGrid& grid,
                             const KernelConfig& kernel, const IndicatorConfig& indicator,
                             double a, double t, const EifRequest& req) {
    const EifSlice slice(grid, kernel, indicator, a, t);
    EifValues out;
    out.weights = tab.w_obs;
    if (req.sate) out.sate.resize(tab.n);
    if (req.num_den) {
        out.num.resize(tab.n);
        out.den.resize(tab.n);
    }
    if (req.derivs) {
        out.num_dt.resize(tab.n);
        out.den_dt.resize(tab.n);
    }
    for (std::size_t u = 0; u < tab.n; ++u) {
        if (req.sate) out.sate[u] = slice.sate(tab, u);
        if (req.num_den) {
            out.num[u] = slice.num(tab, u);
            out.den[u] = slice.den(tab, u);
        }
        if (req.derivs) {
            out.num_dt[u] = slice.num_dt(tab, u);
            out.den_dt[u] = slice.den_dt(tab, u);
        }
    }
    return out;
}

EifValues compute_eif_values(const Dataset& data, const EifContext& ctx, const EifRequest& req) {
    require_context(ctx, true);
    const NuisanceTable tab = build_nuisance_table(data, *ctx.model, *ctx.grid, true, true);
    return compute_eif_values(tab, *ctx.grid, ctx.kernel, ctx.indicator, ctx.a, ctx.t, req);
}

} // namespace trimcurve
