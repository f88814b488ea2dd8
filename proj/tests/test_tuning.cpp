#include "doctest.h"

#include "trimcurve/errors.hpp"
#include "trimcurve/estimators.hpp"
#include "trimcurve/simlab.hpp"
#include "trimcurve/tuning.hpp"

#include <cmath>
#include <memory>
#include <vector>

using namespace trimcurve;

namespace {

struct Fixture {
    Dataset data;
    std::shared_ptr<const NuisanceModel> model;
    IndicatorConfig ind;

    explicit Fixture(std::size_t n, std::uint64_t seed = 1) {
        DgpSpec spec;
        spec.n = n;
        data = generate_dataset(spec, seed);
        model = make_true_model(spec);
        ind.epsilon = 0.01;
    }
};

} // namespace

TEST_CASE("risk estimate matches a direct evaluation") {
    Fixture f(150, 3);
    KernelConfig kernel;
    kernel.h = 0.12;
    const double t = 0.1;
    auto a_int = QuadratureGrid::uniform(0.2, 0.8, 0.1);
    auto quad = QuadratureGrid::default_for(f.data.a_min(), f.data.a_max(), kernel.h);
    const double got = estimate_risk(f.data, *f.model, kernel, f.ind, t, a_int, quad);

    CurveEvaluator eval(f.data, *f.model, kernel, f.ind, quad);
    double acc = 0.0, sw = 0.0;
    for (const auto& r : f.data.records) sw += r.w;
    for (std::size_t j = 0; j < a_int.size(); ++j) {
        const double a = a_int.points[j];
        const double psi = eval.state_fixed_t(a, t, 0.95).psi_hat;
        auto pis = eval.pi_at(a);
        auto mus = eval.mu_at(a);
        double term = 0.0;
        for (std::size_t u = 0; u < f.data.size(); ++u) {
            const double s = smooth_indicator(pis[u], t, f.ind);
            term += f.data.records[u].w * (psi * psi - 2.0 * psi * mus[u]) * s;
        }
        acc += a_int.weights[j] * term / sw;
    }
    CHECK(got == doctest::Approx(acc).epsilon(1e-10));
}

TEST_CASE("risk differences are invariant to shifting the outcome scale") {
    Fixture f(250, 5);
    const double shift = 3.7;
    Dataset shifted = f.data;
    for (auto& r : shifted.records) r.y += shift;
    auto shifted_model = std::make_shared<FunctionModel>(
        [m = f.model](double a, std::span<const double> x) { return m->pi(a, x); },
        [m = f.model, shift](std::span<const double> x, double a) { return m->mu(x, a) + shift; });

    const double t = 0.1;
    auto a_int = QuadratureGrid::uniform(0.1, 0.9, 0.05);
    std::vector<double> hs = {0.08, 0.15, 0.3};
    std::vector<double> risk0, risk1;
    for (double h : hs) {
        KernelConfig k;
        k.h = h;
        auto quad = QuadratureGrid::default_for(0.0, 1.0, h);
        risk0.push_back(estimate_risk(f.data, *f.model, k, f.ind, t, a_int, quad));
        risk1.push_back(estimate_risk(shifted, *shifted_model, k, f.ind, t, a_int, quad));
    }
    // The shift moves every candidate's risk by the same h-free constant, so
    // pairwise differences (and hence the argmin) are preserved.
    for (std::size_t i = 1; i < hs.size(); ++i) {
        const double d0 = risk0[i] - risk0[0];
        const double d1 = risk1[i] - risk1[0];
        CHECK(d1 == doctest::Approx(d0).epsilon(1e-8));
    }
}

TEST_CASE("bandwidth selection sweeps candidates and keeps the smallest minimizer") {
    Fixture f(400, 7);
    std::vector<double> cands = {0.3, 0.08, 0.15};
    auto sel = select_bandwidth(cands, f.data, *f.model, f.ind, 0.1, 0.0, 1.0, 0.05, 2);
    REQUIRE(sel.path.size() == 3);
    CHECK_FALSE(sel.degenerate);
    // Path is reported in ascending bandwidth order.
    CHECK(sel.path[0].h == 0.08);
    CHECK(sel.path[1].h == 0.15);
    CHECK(sel.path[2].h == 0.3);
    double best = sel.path[0].risk;
    double best_h = sel.path[0].h;
    for (const auto& p : sel.path) {
        if (p.risk < best) {
            best = p.risk;
            best_h = p.h;
        }
    }
    CHECK(sel.h_star == best_h);

    // Thread count must not change the selection or the path values.
    auto sel1 = select_bandwidth(cands, f.data, *f.model, f.ind, 0.1, 0.0, 1.0, 0.05, 1);
    CHECK(sel1.h_star == sel.h_star);
    for (std::size_t i = 0; i < sel.path.size(); ++i) {
        CHECK(sel1.path[i].risk == sel.path[i].risk);
    }
}

TEST_CASE("single-candidate bandwidth selection is flagged degenerate") {
    Fixture f(120, 9);
    std::vector<double> one = {0.2};
    auto sel = select_bandwidth(one, f.data, *f.model, f.ind, 0.1, 0.0, 1.0, 0.1, 1);
    CHECK(sel.degenerate);
    CHECK(sel.h_star == 0.2);
    REQUIRE(sel.path.size() == 1);

    std::vector<double> none;
    CHECK_THROWS_AS(select_bandwidth(none, f.data, *f.model, f.ind, 0.1, 0.0, 1.0, 0.1, 1), Error);
}

TEST_CASE("entropy matches the frozen two-point reference") {
    // Propensity pinned so that s = Phi(Phi^-1(0.9944)) = 0.9944 exactly up to
    // quantile rounding: H = 0.049946430187335760 (frozen, 50-digit).
    Fixture f(40, 11);
    IndicatorConfig ind;
    ind.epsilon = 0.01;
    const double t = 0.1;
    const double pin = t + ind.epsilon * normal_quantile(0.9944);
    auto stub = std::make_shared<FunctionModel>(
        [pin](double, std::span<const double>) { return pin; },
        [](std::span<const double>, double) { return 1.0; });
    const double got = estimate_entropy(f.data, *stub, ind, 0.5, t);
    CHECK(got == doctest::Approx(0.049946430187335760).epsilon(1e-9));
}

TEST_CASE("entropy saturates to zero and peaks at a half") {
    Fixture f(60, 13);
    const double t = 0.1;
    // Propensity exactly at the threshold: s = 1/2, entropy 1 bit.
    auto at_t = std::make_shared<FunctionModel>(
        [t](double, std::span<const double>) { return t; },
        [](std::span<const double>, double) { return 1.0; });
    IndicatorConfig ind;
    ind.epsilon = 0.01;
    CHECK(estimate_entropy(f.data, *at_t, ind, 0.5, t) == doctest::Approx(1.0).epsilon(1e-12));

    // Far from the threshold: exact saturation contributes exactly zero.
    auto far = std::make_shared<FunctionModel>(
        [](double, std::span<const double>) { return 0.9; },
        [](std::span<const double>, double) { return 1.0; });
    CHECK(estimate_entropy(f.data, *far, ind, 0.5, t) == 0.0);

    // Huge epsilon washes the indicator toward 1/2 everywhere: entropy near 1.
    IndicatorConfig huge;
    huge.epsilon = 1e6;
    CHECK(estimate_entropy(f.data, *f.model, huge, 0.5, t) > 0.99);
    // Tiny epsilon hard-thresholds: entropy near 0.
    IndicatorConfig tiny;
    tiny.epsilon = 1e-8;
    CHECK(estimate_entropy(f.data, *f.model, tiny, 0.5, t) < 0.01);
}

TEST_CASE("epsilon selection targets the requested residual entropy") {
    Fixture f(500, 15);
    std::vector<double> cands = {1e6, 0.1, 0.01, 1e-8};
    std::vector<double> a_grid = {0.3, 0.5, 0.7};
    auto sel = select_epsilon(cands, f.data, *f.model, a_grid, 0.1, 0.05);
    REQUIRE(sel.path.size() == 4);
    CHECK_FALSE(sel.degenerate);
    // Path ascending in epsilon.
    for (std::size_t i = 1; i < sel.path.size(); ++i) {
        CHECK(sel.path[i].epsilon > sel.path[i - 1].epsilon);
    }
    // The chosen epsilon minimizes |entropy - target|.
    double best = 1e300, best_eps = 0.0;
    for (const auto& p : sel.path) {
        const double d = std::fabs(p.entropy - 0.05);
        if (d < best) {
            best = d;
            best_eps = p.epsilon;
        }
    }
    CHECK(sel.epsilon_star == best_eps);
    // The washed-out and hard-threshold extremes bracket the scale.
    CHECK(sel.path.back().entropy > 0.99);   // epsilon = 1e6
    CHECK(sel.path.front().entropy < 0.01);  // epsilon = 1e-8

    std::vector<double> one = {0.01};
    auto degen = select_epsilon(one, f.data, *f.model, a_grid, 0.1, 0.05);
    CHECK(degen.degenerate);
    CHECK(degen.epsilon_star == 0.01);
}
