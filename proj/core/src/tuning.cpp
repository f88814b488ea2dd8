#include "trimcurve/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trimcurve/errors.hpp"
#include "trimcurve/estimators.hpp"
#include "trimcurve/parallel.hpp"

namespace trimcurve {

double estimate_risk(const Dataset& data, const NuisanceModel& model, const KernelConfig& kernel,
                     const IndicatorConfig& indicator, double t, const QuadratureGrid& a_integration,
                     const QuadratureGrid& quad) {
    if (a_integration.size() < 2) throw Error("risk: need at least two integration points");
    CurveEvaluator eval(data, model, kernel, indicator, quad);
    const std::size_t n = data.size();
    const std::size_t J = a_integration.size();

    std::vector<double> unit_integral(n, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        const double a = a_integration.points[j];
        const double psi = eval.state_fixed_t(a, t, 0.95).psi_hat;
        const std::vector<double> pi_a = eval.pi_at(a);
        const std::vector<double> mu_a = eval.mu_at(a);
        const double aw = a_integration.weights[j];
        for (std::size_t u = 0; u < n; ++u) {
            const double s = smooth_indicator(pi_a[u], t, indicator);
            unit_integral[u] += aw * (psi * psi - 2.0 * psi * mu_a[u]) * s;
        }
    }

    std::vector<double> w(n);
    for (std::size_t u = 0; u < n; ++u) w[u] = data.records[u].w;
    return weighted_mean(unit_integral, w);
}

BandwidthSelection select_bandwidth(std::span<const double> candidates, const Dataset& data,
                                    const NuisanceModel& model, const IndicatorConfig& indicator,
                                    double t, double a_lo, double a_hi, double a_step,
                                    unsigned threads) {
    if (candidates.empty()) throw Error("select_bandwidth: no candidates");
    std::vector<double> hs(candidates.begin(), candidates.end());
    std::sort(hs.begin(), hs.end());
    for (double h : hs)
        if (!(h > 0.0)) throw Error("select_bandwidth: bandwidths must be positive");
    if (!(a_step > 0.0) || !(a_hi >= a_lo)) throw Error("select_bandwidth: bad integration range");

    // One integration grid for every candidate, exactly the requested range:
    // comparability needs a shared domain, and extending it past the range
    // reaches vanishing-overlap levels where the one-step curve is undefined.
    const QuadratureGrid shared = QuadratureGrid::uniform(a_lo, a_hi, a_step);

    BandwidthSelection out;
    out.path.resize(hs.size());
    parallel_for(hs.size(), threads, [&](std::size_t i) {
        const double h = hs[i];
        const QuadratureGrid quad = QuadratureGrid::default_for(data.a_min(), data.a_max(), h);
        out.path[i] = RiskPoint{h, estimate_risk(data, model, KernelConfig{h}, indicator, t, shared, quad)};
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < out.path.size(); ++i)
        if (out.path[i].risk < out.path[best].risk) best = i;
    out.h_star = out.path[best].h;
    out.degenerate = out.path.size() < 2;
    return out;
}

double estimate_entropy(const Dataset& data, const NuisanceModel& model,
                        const IndicatorConfig& indicator, double a, double t) {
    const std::size_t n = data.size();
    if (n == 0) throw Error("entropy: empty dataset");
    std::vector<double> term(n), w(n);
    const double inv_log2 = 1.0 / std::log(2.0);
    for (std::size_t u = 0; u < n; ++u) {
        const auto& r = data.records[u];
        const double s = smooth_indicator(model.pi(a, r.x, static_cast<std::ptrdiff_t>(u)), t, indicator);
        double v = 0.0;
        if (s > 0.0 && s < 1.0)
            v = -(s * std::log(s) + (1.0 - s) * std::log(1.0 - s)) * inv_log2;
        term[u] = v;
        w[u] = r.w;
    }
    return weighted_mean(term, w);
}

EpsilonSelection select_epsilon(std::span<const double> candidates, const Dataset& data,
                                const NuisanceModel& model, std::span<const double> a_grid,
                                double t, double target) {
    if (candidates.empty()) throw Error("select_epsilon: no candidates");
    if (a_grid.empty()) throw Error("select_epsilon: empty treatment grid");
    std::vector<double> eps(candidates.begin(), candidates.end());
    std::sort(eps.begin(), eps.end());
    for (double e : eps)
        if (!(e > 0.0)) throw Error("select_epsilon: scales must be positive");

    EpsilonSelection out;
    out.path.reserve(eps.size());
    for (double e : eps) {
        double acc = 0.0;
        for (double a : a_grid) acc += estimate_entropy(data, model, IndicatorConfig{e}, a, t);
        out.path.push_back(EntropyPoint{e, acc / static_cast<double>(a_grid.size())});
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < out.path.size(); ++i)
        if (std::abs(out.path[i].entropy - target) < std::abs(out.path[best].entropy - target)) best = i;
    out.epsilon_star = out.path[best].epsilon;
    out.degenerate = out.path.size() < 2;
    return out;
}

} // namespace trimcurve
