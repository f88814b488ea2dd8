#include "trimcurve/estimators.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "trimcurve/errors.hpp"
#include "trimcurve/parallel.hpp"
#include "trimcurve/rng.hpp"

namespace trimcurve {

std::string_view estimator_name(EstimatorId id) {
    switch (id) {
    case EstimatorId::SateDr: return "sate_dr";
    case EstimatorId::PluginTrim: return "plugin_trim";
    case EstimatorId::EifPluginTrim: return "eif_plugin_trim";
    case EstimatorId::StateDr: return "state_dr";
    case EstimatorId::StateDrEstT: return "state_dr_estt";
    case EstimatorId::BinaryState: return "binary_state";
    }
    return "unknown";
}

std::optional<EstimatorId> estimator_from_name(std::string_view name) {
    for (EstimatorId id : {EstimatorId::SateDr, EstimatorId::PluginTrim, EstimatorId::EifPluginTrim,
                           EstimatorId::StateDr, EstimatorId::StateDrEstT, EstimatorId::BinaryState})
        if (estimator_name(id) == name) return id;
    return std::nullopt;
}

double z_critical(double conf) {
    if (!(conf > 0.0 && conf < 1.0)) throw Error("confidence level must be in (0,1)");
    return normal_quantile(0.5 + conf / 2.0);
}

namespace {

// se of a weighted mean: sqrt(weighted Var_n / n); collapses to 0 at n == 1.
void fill_mean_ci(EstimateReport& rep, std::span<const double> values,
                  std::span<const double> weights, double conf) {
    rep.conf_level = conf;
    rep.n_eval = values.size();
    rep.psi_hat = weighted_mean(values, weights);
    const double var = weighted_var(values, weights);
    rep.se = std::sqrt(var / static_cast<double>(values.size()));
    rep.se_defined = true;
    rep.degenerate = values.size() == 1;
    const double z = z_critical(conf);
    rep.ci_lo = rep.psi_hat - z * rep.se;
    rep.ci_hi = rep.psi_hat + z * rep.se;
    rep.ci_defined = true;
}

} // namespace

CurveEvaluator::CurveEvaluator(const Dataset& data, const NuisanceModel& model,
                               const KernelConfig& kernel, const IndicatorConfig& indicator,
                               const QuadratureGrid& grid)
    : data_(data), model_(model), kernel_(kernel), ind_(indicator), grid_(grid),
      table_(build_nuisance_table(data, model, grid, true, true)) {
    data.validate();
    if (!(kernel.h > 0.0)) throw Error("bandwidth must be positive");
    if (!(indicator.epsilon > 0.0)) throw Error("indicator scale must be positive");
    for (double w : table_.w_obs) sum_w_ += w;
}

std::vector<double> CurveEvaluator::pi_at(double a) const {
    std::vector<double> out(table_.n);
    const auto& pts = grid_.points;
    const auto it = std::lower_bound(pts.begin(), pts.end(), a);
    if (it != pts.end() && *it == a) {
        const auto g = static_cast<std::size_t>(it - pts.begin());
        for (std::size_t u = 0; u < table_.n; ++u) out[u] = table_.pi_grid[u * table_.grid_size + g];
    } else {
        for (std::size_t u = 0; u < table_.n; ++u)
            out[u] = model_.pi(a, data_.records[u].x, static_cast<std::ptrdiff_t>(u));
    }
    return out;
}

std::vector<double> CurveEvaluator::mu_at(double a) const {
    std::vector<double> out(table_.n);
    const auto& pts = grid_.points;
    const auto it = std::lower_bound(pts.begin(), pts.end(), a);
    if (it != pts.end() && *it == a) {
        const auto g = static_cast<std::size_t>(it - pts.begin());
        for (std::size_t u = 0; u < table_.n; ++u) out[u] = table_.mu_grid[u * table_.grid_size + g];
    } else {
        for (std::size_t u = 0; u < table_.n; ++u)
            out[u] = model_.mu(data_.records[u].x, a, static_cast<std::ptrdiff_t>(u));
    }
    return out;
}

EstimateReport CurveEvaluator::sate_dr(double a, double conf) const {
    const EifSlice slice(grid_, kernel_, ind_, a, 0.0);
    auto values = std::make_shared<EifValues>();
    values->weights = table_.w_obs;
    values->sate.resize(table_.n);
    for (std::size_t u = 0; u < table_.n; ++u) values->sate[u] = slice.sate(table_, u);
    EstimateReport rep;
    rep.id = EstimatorId::SateDr;
    rep.a = a;
    fill_mean_ci(rep, values->sate, values->weights, conf);
    rep.eif = std::move(values);
    return rep;
}

EstimateReport CurveEvaluator::state_fixed_t(double a, double t, double conf) const {
    const EifSlice slice(grid_, kernel_, ind_, a, t);
    auto values = std::make_shared<EifValues>();
    values->weights = table_.w_obs;
    values->num.resize(table_.n);
    values->den.resize(table_.n);
    for (std::size_t u = 0; u < table_.n; ++u) {
        values->num[u] = slice.num(table_, u);
        values->den[u] = slice.den(table_, u);
    }
    EstimateReport rep;
    rep.id = EstimatorId::StateDr;
    rep.a = a;
    rep.t_used = t;
    rep.conf_level = conf;
    rep.n_eval = table_.n;
    rep.num = weighted_mean(values->num, values->weights);
    rep.den = weighted_mean(values->den, values->weights);
    if (!(rep.den > 0.0)) throw DegenerateTrimmedPopulationError(rep.den);
    rep.psi_hat = rep.num / rep.den;
    std::vector<double> ratio(table_.n);
    for (std::size_t u = 0; u < table_.n; ++u)
        ratio[u] = (values->num[u] - rep.psi_hat * values->den[u]) / rep.den;
    const double var = weighted_var(ratio, values->weights);
    rep.se = std::sqrt(var / static_cast<double>(table_.n));
    rep.se_defined = true;
    rep.degenerate = table_.n == 1;
    const double z = z_critical(conf);
    rep.ci_lo = rep.psi_hat - z * rep.se;
    rep.ci_hi = rep.psi_hat + z * rep.se;
    rep.ci_defined = true;
    rep.eif = std::move(values);
    return rep;
}

double CurveEvaluator::den_at(const EifSlice& slice) const {
    double acc = 0.0;
    for (std::size_t u = 0; u < table_.n; ++u) acc += table_.w_obs[u] * slice.den(table_, u);
    return acc / sum_w_;
}

ThresholdResult CurveEvaluator::threshold(double a, const TrimSpec& trim) const {
    if (!(trim.gamma > 0.0 && trim.gamma < 1.0)) throw Error("gamma must be in (0,1)");
    ThresholdResult res;
    res.t_grid = uniform_points(trim.t_min, trim.t_max, trim.t_step);
    res.den_path.resize(res.t_grid.size());
    for (std::size_t k = 0; k < res.t_grid.size(); ++k)
        res.den_path[k] = den_at(EifSlice(grid_, kernel_, ind_, a, res.t_grid[k]));
    const double target = 1.0 - trim.gamma;
    res.t_hat = res.t_grid.back();
    res.boundary = ThresholdResult::Boundary::AtMax;
    for (std::size_t k = 0; k < res.t_grid.size(); ++k) {
        if (res.den_path[k] <= target) {
            res.t_hat = res.t_grid[k];
            res.boundary = (k == 0) ? ThresholdResult::Boundary::AtMin
                                    : ThresholdResult::Boundary::None;
            break;
        }
    }
    return res;
}

std::pair<double, ThresholdResult::Boundary> CurveEvaluator::threshold_fast(
    double a, const TrimSpec& trim) const {
    if (!(trim.gamma > 0.0 && trim.gamma < 1.0)) throw Error("gamma must be in (0,1)");
    const auto ts = uniform_points(trim.t_min, trim.t_max, trim.t_step);
    const double target = 1.0 - trim.gamma;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        if (den_at(EifSlice(grid_, kernel_, ind_, a, ts[k])) <= target)
            return {ts[k], (k == 0) ? ThresholdResult::Boundary::AtMin
                                    : ThresholdResult::Boundary::None};
    }
    return {ts.back(), ThresholdResult::Boundary::AtMax};
}

EstimateReport CurveEvaluator::state_estimated_t(double a, const TrimSpec& trim,
                                                 double conf) const {
    const auto [t_hat, boundary] = threshold_fast(a, trim);
    if (boundary != ThresholdResult::Boundary::None)
        throw BoundaryThresholdError(
            boundary == ThresholdResult::Boundary::AtMin
                ? "trimmed mass already at or below 1-gamma at the smallest threshold"
                : "trimmed mass never reaches 1-gamma on the threshold grid");
    const EifSlice slice(grid_, kernel_, ind_, a, t_hat);
    auto values = std::make_shared<EifValues>();
    values->weights = table_.w_obs;
    values->num.resize(table_.n);
    values->den.resize(table_.n);
    values->num_dt.resize(table_.n);
    values->den_dt.resize(table_.n);
    for (std::size_t u = 0; u < table_.n; ++u) {
        values->num[u] = slice.num(table_, u);
        values->den[u] = slice.den(table_, u);
        values->num_dt[u] = slice.num_dt(table_, u);
        values->den_dt[u] = slice.den_dt(table_, u);
    }
    EstimateReport rep;
    rep.id = EstimatorId::StateDrEstT;
    rep.a = a;
    rep.t_used = t_hat;
    rep.conf_level = conf;
    rep.n_eval = table_.n;
    const double one_minus_gamma = 1.0 - trim.gamma;
    rep.num = weighted_mean(values->num, values->weights);
    rep.den = weighted_mean(values->den, values->weights);
    rep.psi_hat = rep.num / one_minus_gamma;
    const double dnum = weighted_mean(values->num_dt, values->weights);
    const double dden = weighted_mean(values->den_dt, values->weights);
    if (!(std::abs(dden) >= 1e-10)) throw IllConditionedDerivativeError(dden);
    const double correction = dnum / dden;
    std::vector<double> score(table_.n);
    for (std::size_t u = 0; u < table_.n; ++u)
        score[u] = values->num[u] - correction * values->den[u];
    const double var = weighted_var(score, values->weights);
    rep.se = std::sqrt(var / static_cast<double>(table_.n)) / one_minus_gamma;
    rep.se_defined = true;
    rep.degenerate = table_.n == 1;
    const double z = z_critical(conf);
    rep.ci_lo = rep.psi_hat - z * rep.se;
    rep.ci_hi = rep.psi_hat + z * rep.se;
    rep.ci_defined = true;
    rep.eif = std::move(values);
    return rep;
}

EstimateReport CurveEvaluator::plugin_trim(double a, double t, double conf) const {
    const auto pi = pi_at(a);
    const auto mu = mu_at(a);
    EstimateReport rep;
    rep.id = EstimatorId::PluginTrim;
    rep.a = a;
    rep.t_used = t;
    rep.conf_level = conf;
    double sw = 0.0, swf = 0.0;
    std::size_t count = 0;
    for (std::size_t u = 0; u < table_.n; ++u) {
        if (pi[u] > t) {
            sw += table_.w_obs[u];
            swf += table_.w_obs[u] * mu[u];
            ++count;
        }
    }
    if (count == 0 || !(sw > 0.0)) throw EmptyTrimmedSampleError();
    rep.n_eval = count;
    rep.psi_hat = swf / sw;
    rep.se_defined = false;
    rep.ci_defined = false;
    return rep;
}

EstimateReport CurveEvaluator::eif_plugin_trim(double a, double t, double conf) const {
    const auto pi = pi_at(a);
    const EifSlice slice(grid_, kernel_, ind_, a, t);
    std::vector<double> values, weights;
    for (std::size_t u = 0; u < table_.n; ++u) {
        if (pi[u] > t) {
            values.push_back(slice.sate(table_, u));
            weights.push_back(table_.w_obs[u]);
        }
    }
    if (values.empty()) throw EmptyTrimmedSampleError();
    EstimateReport rep;
    rep.id = EstimatorId::EifPluginTrim;
    rep.a = a;
    rep.t_used = t;
    fill_mean_ci(rep, values, weights, conf);
    return rep;
}

EstimateReport CurveEvaluator::discrete_state(double a, const TrimSpec& trim, double conf) const {
    EifContext ctx;
    ctx.model = &model_;
    ctx.indicator = ind_;
    ctx.a = a;
    double t_used;
    if (trim.mode == TrimSpec::Mode::FixedT) {
        t_used = trim.t;
    } else {
        // line search on the discrete trimmed-mass path
        const auto ts = uniform_points(trim.t_min, trim.t_max, trim.t_step);
        const double target = 1.0 - trim.gamma;
        double found = ts.back();
        auto boundary = ThresholdResult::Boundary::AtMax;
        for (std::size_t k = 0; k < ts.size(); ++k) {
            ctx.t = ts[k];
            double acc = 0.0, sw = 0.0;
            for (std::size_t u = 0; u < data_.size(); ++u) {
                const auto& r = data_.records[u];
                acc += r.w * eif_den_discrete(r, ctx, static_cast<std::ptrdiff_t>(u));
                sw += r.w;
            }
            if (acc / sw <= target) {
                found = ts[k];
                boundary = (k == 0) ? ThresholdResult::Boundary::AtMin
                                    : ThresholdResult::Boundary::None;
                break;
            }
        }
        if (boundary != ThresholdResult::Boundary::None)
            throw BoundaryThresholdError("discrete trimmed mass never crosses 1-gamma");
        t_used = found;
    }
    ctx.t = t_used;
    const std::size_t n = data_.size();
    std::vector<double> num(n), den(n), weights(n);
    for (std::size_t u = 0; u < n; ++u) {
        const auto& r = data_.records[u];
        num[u] = eif_num_discrete(r, ctx, static_cast<std::ptrdiff_t>(u));
        den[u] = eif_den_discrete(r, ctx, static_cast<std::ptrdiff_t>(u));
        weights[u] = r.w;
    }
    EstimateReport rep;
    rep.id = EstimatorId::BinaryState;
    rep.a = a;
    rep.t_used = t_used;
    rep.conf_level = conf;
    rep.n_eval = n;
    rep.num = weighted_mean(num, weights);
    rep.den = weighted_mean(den, weights);
    const double z = z_critical(conf);
    if (trim.mode == TrimSpec::Mode::FixedT) {
        if (!(rep.den > 0.0)) throw DegenerateTrimmedPopulationError(rep.den);
        rep.psi_hat = rep.num / rep.den;
        std::vector<double> ratio(n);
        for (std::size_t u = 0; u < n; ++u)
            ratio[u] = (num[u] - rep.psi_hat * den[u]) / rep.den;
        rep.se = std::sqrt(weighted_var(ratio, weights) / static_cast<double>(n));
    } else {
        const double one_minus_gamma = 1.0 - trim.gamma;
        rep.psi_hat = rep.num / one_minus_gamma;
        std::vector<double> num_dt(n), den_dt(n);
        for (std::size_t u = 0; u < n; ++u) {
            const auto& r = data_.records[u];
            num_dt[u] = eif_num_discrete_dt(r, ctx, static_cast<std::ptrdiff_t>(u));
            den_dt[u] = eif_den_discrete_dt(r, ctx, static_cast<std::ptrdiff_t>(u));
        }
        const double dnum = weighted_mean(num_dt, weights);
        const double dden = weighted_mean(den_dt, weights);
        if (!(std::abs(dden) >= 1e-10)) throw IllConditionedDerivativeError(dden);
        const double correction = dnum / dden;
        std::vector<double> score(n);
        for (std::size_t u = 0; u < n; ++u) score[u] = num[u] - correction * den[u];
        rep.se = std::sqrt(weighted_var(score, weights) / static_cast<double>(n)) / one_minus_gamma;
    }
    rep.se_defined = true;
    rep.degenerate = n == 1;
    rep.ci_lo = rep.psi_hat - z * rep.se;
    rep.ci_hi = rep.psi_hat + z * rep.se;
    rep.ci_defined = true;
    return rep;
}

double CurveEvaluator::quantile_threshold(double a, double gamma) const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error("gamma must be in (0,1)");
    const auto pi = pi_at(a);
    return weighted_quantile(pi, table_.w_obs, gamma);
}

// --- single-shot wrappers -----------------------------------------------------

EstimateReport estimate_sate_dr(const Dataset& data, const NuisanceModel& model,
                                const KernelConfig& kernel, const QuadratureGrid& grid, double a,
                                double conf) {
    return CurveEvaluator(data, model, kernel, IndicatorConfig{}, grid).sate_dr(a, conf);
}

EstimateReport estimate_state_fixed_t(const Dataset& data, const NuisanceModel& model,
                                      const KernelConfig& kernel, const IndicatorConfig& indicator,
                                      const QuadratureGrid& grid, double a, double t, double conf) {
    return CurveEvaluator(data, model, kernel, indicator, grid).state_fixed_t(a, t, conf);
}

EstimateReport estimate_state_estimated_t(const Dataset& data, const NuisanceModel& model,
                                          const KernelConfig& kernel,
                                          const IndicatorConfig& indicator,
                                          const QuadratureGrid& grid, double a,
                                          const TrimSpec& trim, double conf) {
    return CurveEvaluator(data, model, kernel, indicator, grid).state_estimated_t(a, trim, conf);
}

EstimateReport estimate_plugin_trim(const Dataset& data, const NuisanceModel& model, double a,
                                    double t, double conf) {
    const QuadratureGrid grid = QuadratureGrid::default_for(data.a_min(), data.a_max(), 0.1);
    return CurveEvaluator(data, model, KernelConfig{}, IndicatorConfig{}, grid)
        .plugin_trim(a, t, conf);
}

EstimateReport estimate_eif_plugin_trim(const Dataset& data, const NuisanceModel& model,
                                        const KernelConfig& kernel, const QuadratureGrid& grid,
                                        double a, double t, double conf) {
    return CurveEvaluator(data, model, kernel, IndicatorConfig{}, grid)
        .eif_plugin_trim(a, t, conf);
}

ThresholdResult estimate_threshold(const Dataset& data, const NuisanceModel& model,
                                   const KernelConfig& kernel, const IndicatorConfig& indicator,
                                   const QuadratureGrid& grid, double a, const TrimSpec& trim) {
    return CurveEvaluator(data, model, kernel, indicator, grid).threshold(a, trim);
}

double quantile_plugin_threshold(const Dataset& data, const NuisanceModel& model, double a,
                                 double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error("gamma must be in (0,1)");
    std::vector<double> pi(data.size()), w(data.size());
    for (std::size_t u = 0; u < data.size(); ++u) {
        pi[u] = model.pi(a, data.records[u].x, static_cast<std::ptrdiff_t>(u));
        w[u] = data.records[u].w;
    }
    return weighted_quantile(pi, w, gamma);
}

// --- binary estimators ----------------------------------------------------------

namespace {

struct BinaryColumns {
    std::vector<double> pi1, mu1, score, w;  // score = AIPW influence value
};

BinaryColumns binary_columns(const Dataset& data, const NuisanceModel& model) {
    data.validate();
    BinaryColumns c;
    const std::size_t n = data.size();
    c.pi1.resize(n);
    c.mu1.resize(n);
    c.score.resize(n);
    c.w.resize(n);
    for (std::size_t u = 0; u < n; ++u) {
        const auto& r = data.records[u];
        if (r.a != 0.0 && r.a != 1.0) throw Error("binary estimator needs treatments in {0,1}");
        c.pi1[u] = model.pi(1.0, r.x, static_cast<std::ptrdiff_t>(u));
        c.mu1[u] = model.mu(r.x, 1.0, static_cast<std::ptrdiff_t>(u));
        c.score[u] = c.mu1[u];
        if (r.a == 1.0) {
            if (!(c.pi1[u] > kPropensityFloor))
                throw NonpositivePropensityError(c.pi1[u], static_cast<std::ptrdiff_t>(u));
            c.score[u] += (r.y - c.mu1[u]) / c.pi1[u];
        }
        c.w[u] = r.w;
    }
    return c;
}

} // namespace

EstimateReport estimate_binary_dr(const Dataset& data, const NuisanceModel& model, double conf) {
    const auto c = binary_columns(data, model);
    EstimateReport rep;
    rep.id = EstimatorId::SateDr;
    rep.a = 1.0;
    fill_mean_ci(rep, c.score, c.w, conf);
    return rep;
}

EstimateReport estimate_binary_plugin_trim(const Dataset& data, const NuisanceModel& model,
                                           double t, double conf) {
    const auto c = binary_columns(data, model);
    EstimateReport rep;
    rep.id = EstimatorId::PluginTrim;
    rep.a = 1.0;
    rep.t_used = t;
    rep.conf_level = conf;
    double sw = 0.0, swf = 0.0;
    std::size_t count = 0;
    for (std::size_t u = 0; u < c.pi1.size(); ++u) {
        if (c.pi1[u] >= t) {
            sw += c.w[u];
            swf += c.w[u] * c.mu1[u];
            ++count;
        }
    }
    if (count == 0 || !(sw > 0.0)) throw EmptyTrimmedSampleError();
    rep.n_eval = count;
    rep.psi_hat = swf / sw;
    rep.se_defined = false;
    rep.ci_defined = false;
    return rep;
}

EstimateReport estimate_binary_eif_plugin_trim(const Dataset& data, const NuisanceModel& model,
                                               double t, double conf) {
    const auto c = binary_columns(data, model);
    std::vector<double> values, weights;
    for (std::size_t u = 0; u < c.pi1.size(); ++u) {
        if (c.pi1[u] >= t) {
            values.push_back(c.score[u]);
            weights.push_back(c.w[u]);
        }
    }
    if (values.empty()) throw EmptyTrimmedSampleError();
    EstimateReport rep;
    rep.id = EstimatorId::EifPluginTrim;
    rep.a = 1.0;
    rep.t_used = t;
    fill_mean_ci(rep, values, weights, conf);
    return rep;
}

EstimateReport estimate_binary_state(const Dataset& data, const NuisanceModel& model,
                                     const IndicatorConfig& indicator, const TrimSpec& trim,
                                     double conf) {
    data.validate();
    // The discrete path only queries the model at the two treatment levels,
    // so a two-point grid keeps the shared tables minimal.
    const QuadratureGrid grid = QuadratureGrid::uniform(0.0, 1.0, 1.0);
    CurveEvaluator eval(data, model, KernelConfig{}, indicator, grid);
    return eval.discrete_state(1.0, trim, conf);
}

double binary_quantile_threshold(const Dataset& data, const NuisanceModel& model, double gamma) {
    return quantile_plugin_threshold(data, model, 1.0, gamma);
}

// --- cross-fitting ----------------------------------------------------------------

CrossfitPlan CrossfitPlan::make(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error("cross-fitting needs k >= 2");
    if (n < k) throw Error("cross-fitting needs n >= k");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    auto eng = make_engine(derive_seed(seed, stream::kCrossfit));
    std::shuffle(perm.begin(), perm.end(), eng);
    CrossfitPlan plan;
    plan.k = k;
    plan.fold_of.resize(n);
    for (std::size_t i = 0; i < n; ++i) plan.fold_of[perm[i]] = i % k;
    return plan;
}

namespace {

class FoldedModel final : public NuisanceModel {
public:
    FoldedModel(std::vector<std::shared_ptr<const NuisanceModel>> models,
                std::vector<std::size_t> fold_of)
        : models_(std::move(models)), fold_of_(std::move(fold_of)) {}

    double pi(double a, std::span<const double> x, std::ptrdiff_t row) const override {
        return model_for(row).pi(a, x, row);
    }
    double mu(std::span<const double> x, double a, std::ptrdiff_t row) const override {
        return model_for(row).mu(x, a, row);
    }
    bool provides_pi() const override { return models_[0]->provides_pi(); }
    bool provides_mu() const override { return models_[0]->provides_mu(); }

private:
    const NuisanceModel& model_for(std::ptrdiff_t row) const {
        if (row < 0 || static_cast<std::size_t>(row) >= fold_of_.size())
            throw Error("cross-fitted model requires a valid record row");
        return *models_[fold_of_[static_cast<std::size_t>(row)]];
    }

    std::vector<std::shared_ptr<const NuisanceModel>> models_;
    std::vector<std::size_t> fold_of_;
};

} // namespace

std::shared_ptr<const NuisanceModel> make_crossfit_model(const Dataset& data,
                                                         const CrossfitPlan& plan,
                                                         const FitRecipe& recipe) {
    if (plan.fold_of.size() != data.size()) throw Error("cross-fit plan does not match dataset");
    std::vector<std::shared_ptr<const NuisanceModel>> models(plan.k);
    for (std::size_t f = 0; f < plan.k; ++f) {
        std::vector<std::size_t> train;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (plan.fold_of[i] != f) train.push_back(i);
        if (train.empty()) throw FoldTooSmallError(f, 0, "empty training complement");
        const Dataset sub = data.subset(train);
        try {
            models[f] = recipe(sub);
        } catch (const Error& e) {
            throw FoldTooSmallError(f, sub.size(), e.what());
        }
        if (!models[f]) throw Error("fit recipe returned a null model");
    }
    return std::make_shared<FoldedModel>(std::move(models), plan.fold_of);
}

EstimateReport crossfit_estimate(const Dataset& data, const CrossfitPlan& plan,
                                 const FitRecipe& recipe, EstimatorId id, double a,
                                 const KernelConfig& kernel, const IndicatorConfig& indicator,
                                 const QuadratureGrid& grid, const TrimSpec& trim, double conf) {
    const auto model = make_crossfit_model(data, plan, recipe);
    CurveEvaluator eval(data, *model, kernel, indicator, grid);
    switch (id) {
    case EstimatorId::SateDr: return eval.sate_dr(a, conf);
    case EstimatorId::PluginTrim: {
        const double t = trim.mode == TrimSpec::Mode::FixedT ? trim.t
                                                             : eval.quantile_threshold(a, trim.gamma);
        return eval.plugin_trim(a, t, conf);
    }
    case EstimatorId::EifPluginTrim: {
        const double t = trim.mode == TrimSpec::Mode::FixedT ? trim.t
                                                             : eval.quantile_threshold(a, trim.gamma);
        return eval.eif_plugin_trim(a, t, conf);
    }
    case EstimatorId::StateDr:
        if (trim.mode != TrimSpec::Mode::FixedT)
            throw Error("state_dr requires a fixed threshold; use state_dr_estt");
        return eval.state_fixed_t(a, trim.t, conf);
    case EstimatorId::StateDrEstT:
        if (trim.mode != TrimSpec::Mode::Quantile)
            throw Error("state_dr_estt requires quantile trimming");
        return eval.state_estimated_t(a, trim, conf);
    case EstimatorId::BinaryState: return eval.discrete_state(a, trim, conf);
    }
    throw Error("unknown estimator");
}

// --- curve + profile ------------------------------------------------------------

std::vector<EstimateReport> estimate_curve(const Dataset& data, const NuisanceModel& model,
                                           std::span<const EstimatorId> estimators,
                                           std::span<const double> a_grid,
                                           const KernelConfig& kernel,
                                           const IndicatorConfig& indicator,
                                           const QuadratureGrid& grid, const TrimSpec& trim,
                                           double conf, unsigned threads) {
    const CurveEvaluator eval(data, model, kernel, indicator, grid);
    std::vector<EstimateReport> out(estimators.size() * a_grid.size());
    parallel_for(a_grid.size(), threads, [&](std::size_t ia) {
        const double a = a_grid[ia];
        for (std::size_t ie = 0; ie < estimators.size(); ++ie) {
            EstimateReport& rep = out[ia * estimators.size() + ie];
            try {
                switch (estimators[ie]) {
                case EstimatorId::SateDr: rep = eval.sate_dr(a, conf); break;
                case EstimatorId::PluginTrim: {
                    const double t = trim.mode == TrimSpec::Mode::FixedT
                                         ? trim.t
                                         : eval.quantile_threshold(a, trim.gamma);
                    rep = eval.plugin_trim(a, t, conf);
                    break;
                }
                case EstimatorId::EifPluginTrim: {
                    const double t = trim.mode == TrimSpec::Mode::FixedT
                                         ? trim.t
                                         : eval.quantile_threshold(a, trim.gamma);
                    rep = eval.eif_plugin_trim(a, t, conf);
                    break;
                }
                case EstimatorId::StateDr:
                    if (trim.mode != TrimSpec::Mode::FixedT)
                        throw Error("state_dr requires a fixed threshold; use state_dr_estt");
                    rep = eval.state_fixed_t(a, trim.t, conf);
                    break;
                case EstimatorId::StateDrEstT:
                    if (trim.mode != TrimSpec::Mode::Quantile)
                        throw Error("state_dr_estt requires quantile trimming");
                    rep = eval.state_estimated_t(a, trim, conf);
                    break;
                case EstimatorId::BinaryState:
                    rep = eval.discrete_state(a, trim, conf);
                    break;
                }
            } catch (const Error& e) {
                rep = EstimateReport{};
                rep.id = estimators[ie];
                rep.a = a;
                rep.conf_level = conf;
                rep.status = e.what();
            }
            rep.eif.reset();  // per-point vectors are not kept for curve sweeps
        }
    });
    return out;
}

std::vector<ProfileRow> trimmed_population_profile(const Dataset& data,
                                                   const NuisanceModel& model,
                                                   const KernelConfig& kernel,
                                                   const IndicatorConfig& indicator, double t,
                                                   std::size_t covariate,
                                                   std::span<const double> a_grid) {
    data.validate();
    if (covariate >= data.covariate_dim()) throw Error("covariate index out of range");
    std::vector<ProfileRow> rows;
    rows.reserve(a_grid.size());
    for (double a : a_grid) {
        ProfileRow row;
        row.a = a;
        row.covariate = covariate;
        double den_all = 0.0, num_all = 0.0, den_tr = 0.0, num_tr = 0.0;
        for (std::size_t u = 0; u < data.size(); ++u) {
            const auto& r = data.records[u];
            const double kw = r.w * kernel_weight(r.a - a, kernel);
            if (kw == 0.0) continue;
            const double xj = r.x[covariate];
            den_all += kw;
            num_all += kw * xj;
            const double s = smooth_indicator(
                model.pi(a, r.x, static_cast<std::ptrdiff_t>(u)), t, indicator);
            den_tr += kw * s;
            num_tr += kw * s * xj;
        }
        if (den_all > 0.0) {
            row.mean_all = num_all / den_all;
            row.all_defined = true;
        }
        if (den_tr > 0.0) {
            row.mean_trimmed = num_tr / den_tr;
            row.trimmed_defined = true;
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace trimcurve
