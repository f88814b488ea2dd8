#include "doctest.h"

#include "trimcurve/errors.hpp"
#include "trimcurve/influence.hpp"
#include "trimcurve/simlab.hpp"

#include <cmath>
#include <memory>
#include <vector>

using namespace trimcurve;

namespace {

// Smooth toy nuisances, nonlinear in both arguments.
std::shared_ptr<const NuisanceModel> toy_model() {
    return std::make_shared<FunctionModel>(
        [](double a, std::span<const double> x) {
            return 0.3 + 0.4 * x[0] + 0.1 * std::sin(3.0 * a);
        },
        [](std::span<const double> x, double a) { return 1.0 + 2.0 * x[0] - 0.5 * a * a; });
}

EifContext toy_context(const NuisanceModel& model, const QuadratureGrid& grid, double a,
                       double t) {
    EifContext ctx;
    ctx.model = &model;
    ctx.kernel.h = 0.1;
    ctx.indicator.epsilon = 0.05;
    ctx.grid = &grid;
    ctx.a = a;
    ctx.t = t;
    return ctx;
}

} // namespace

TEST_CASE("continuous influence functions match a hand-rolled evaluation") {
    auto model = toy_model();
    auto grid = QuadratureGrid::uniform(0.0, 1.0, 0.05);
    Record r;
    r.x = {0.4};
    r.a = 0.55;
    r.y = 2.0;
    const double a = 0.5, t = 0.45;
    EifContext ctx = toy_context(*model, grid, a, t);

    // Re-derive every term with plain arithmetic.
    const double pi_obs = model->pi(r.a, r.x);
    const double mu_obs = model->mu(r.x, r.a);
    const double k_obs = kernel_weight(r.a - a, ctx.kernel);
    const double s_obs = smooth_indicator(pi_obs, t, ctx.indicator);
    const double ds_obs = smooth_indicator_dpi(pi_obs, t, ctx.indicator);
    double int_num = 0.0, int_den = 0.0, int_sate = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double p = grid.points[g];
        const double kw = grid.weights[g] * kernel_weight(p - a, ctx.kernel);
        const double pig = model->pi(p, r.x);
        const double mug = model->mu(r.x, p);
        const double sg = smooth_indicator(pig, t, ctx.indicator);
        const double dsg = smooth_indicator_dpi(pig, t, ctx.indicator);
        int_num += kw * mug * (sg - dsg * pig);
        int_den += kw * (sg - dsg * pig);
        int_sate += kw * mug;
    }
    const double want_num = k_obs * (r.y - mu_obs) * s_obs / pi_obs + k_obs * mu_obs * ds_obs + int_num;
    const double want_den = k_obs * ds_obs + int_den;
    const double want_sate = k_obs * (r.y - mu_obs) / pi_obs + int_sate;

    CHECK(eif_num(r, ctx) == doctest::Approx(want_num).epsilon(1e-13));
    CHECK(eif_den(r, ctx) == doctest::Approx(want_den).epsilon(1e-13));
    CHECK(eif_sate(r, ctx) == doctest::Approx(want_sate).epsilon(1e-13));

    // d/dt versions swap S -> dS/dt and dS/dpi -> d2S/(dpi dt).
    const double st_obs = smooth_indicator_dt(pi_obs, t, ctx.indicator);
    const double dst_obs = smooth_indicator_dpi_dt(pi_obs, t, ctx.indicator);
    double int_num_dt = 0.0, int_den_dt = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double p = grid.points[g];
        const double kw = grid.weights[g] * kernel_weight(p - a, ctx.kernel);
        const double pig = model->pi(p, r.x);
        const double mug = model->mu(r.x, p);
        const double sgt = smooth_indicator_dt(pig, t, ctx.indicator);
        const double dsgt = smooth_indicator_dpi_dt(pig, t, ctx.indicator);
        int_num_dt += kw * mug * (sgt - dsgt * pig);
        int_den_dt += kw * (sgt - dsgt * pig);
    }
    const double want_num_dt =
        k_obs * (r.y - mu_obs) * st_obs / pi_obs + k_obs * mu_obs * dst_obs + int_num_dt;
    const double want_den_dt = k_obs * dst_obs + int_den_dt;
    CHECK(eif_num_dt(r, ctx) == doctest::Approx(want_num_dt).epsilon(1e-13));
    CHECK(eif_den_dt(r, ctx) == doctest::Approx(want_den_dt).epsilon(1e-13));
}

TEST_CASE("ratio influence equals (num - psi den)/psi_den") {
    auto model = toy_model();
    auto grid = QuadratureGrid::uniform(-0.2, 1.2, 0.05);
    Record r;
    r.x = {0.7};
    r.a = 0.42;
    r.y = -0.3;
    EifContext ctx = toy_context(*model, grid, 0.5, 0.4);
    const double psi_den = 0.8, psi = 1.3;
    const double want = (eif_num(r, ctx) - psi * eif_den(r, ctx)) / psi_den;
    CHECK(eif_ratio(r, ctx, psi_den, psi) == doctest::Approx(want).epsilon(1e-12));
    CHECK_THROWS_AS(eif_ratio(r, ctx, 0.0, psi), DegenerateTrimmedPopulationError);
}

TEST_CASE("threshold at minus infinity reduces num to sate exactly") {
    auto model = toy_model();
    auto grid = QuadratureGrid::default_for(0.0, 1.0, 0.1);
    Record r1{{0.2}, 0.48, 1.7, 1.0};
    Record r2{{0.9}, 0.61, 0.2, 1.0};
    EifContext ctx = toy_context(*model, grid, 0.5, -1e6);

    // S saturates to exactly 1 and every derivative to exactly 0, so the
    // trimmed forms collapse onto the untrimmed ones bit for bit.
    CHECK(eif_num(r1, ctx) == eif_sate(r1, ctx));
    CHECK(eif_num(r2, ctx) == eif_sate(r2, ctx));
    CHECK(eif_num_dt(r1, ctx) == 0.0);
    CHECK(eif_den_dt(r1, ctx) == 0.0);
    // The denominator stops depending on the record (pure kernel mass).
    CHECK(eif_den(r1, ctx) == eif_den(r2, ctx));
    double ksum = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        ksum += grid.weights[g] * kernel_weight(grid.points[g] - ctx.a, ctx.kernel);
    }
    CHECK(eif_den(r1, ctx) == doctest::Approx(ksum).epsilon(1e-12));
    CHECK(eif_den(r1, ctx) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("discrete influence functions match hand values and reduce to aipw") {
    auto model = std::make_shared<FunctionModel>(
        [](double a, std::span<const double> x) {
            const double p1 = 0.2 + 0.6 * x[0];
            return a == 1.0 ? p1 : 1.0 - p1;
        },
        [](std::span<const double> x, double a) { return x[0] + 3.0 * a; });
    Record r;
    r.x = {0.5};
    r.a = 1.0;
    r.y = 4.0;
    EifContext ctx;
    ctx.model = model.get();
    ctx.indicator.epsilon = 0.05;
    ctx.a = 1.0;
    ctx.t = 0.45;

    const double pi_a = model->pi(1.0, r.x, -1);  // 0.5
    const double mu_a = model->mu(r.x, 1.0, -1);  // 3.5
    const double s = smooth_indicator(pi_a, ctx.t, ctx.indicator);
    const double ds = smooth_indicator_dpi(pi_a, ctx.t, ctx.indicator);
    const double want_num = (r.y - mu_a) * s / pi_a + s * mu_a + mu_a * ds - mu_a * ds * pi_a;
    const double want_den = s - ds * pi_a + ds;
    CHECK(eif_num_discrete(r, ctx) == doctest::Approx(want_num).epsilon(1e-13));
    CHECK(eif_den_discrete(r, ctx) == doctest::Approx(want_den).epsilon(1e-13));

    // A record with a different treatment level drops the indicator terms.
    Record r0 = r;
    r0.a = 0.0;
    const double want_num0 = s * mu_a - mu_a * ds * pi_a;
    CHECK(eif_num_discrete(r0, ctx) == doctest::Approx(want_num0).epsilon(1e-13));

    // No trimming: exactly the uncentered AIPW influence and exactly one.
    ctx.t = -1e6;
    CHECK(eif_num_discrete(r, ctx) == (r.y - mu_a) / pi_a + mu_a);
    CHECK(eif_den_discrete(r, ctx) == 1.0);
    CHECK(eif_num_discrete(r0, ctx) == mu_a);
    CHECK(eif_num_discrete_dt(r, ctx) == 0.0);
    CHECK(eif_den_discrete_dt(r, ctx) == 0.0);
}

TEST_CASE("binary contrast influence matches hand values") {
    DgpSpec spec;
    spec.id = DgpId::Binary;
    auto model = make_true_model(spec);
    Record r;
    r.x = {0.6};
    r.a = 1.0;
    r.y = 1.2;
    EifContext ctx;
    ctx.model = model.get();
    ctx.indicator.epsilon = 0.05;
    ctx.a = 1.0;
    ctx.t = 0.4;

    const double pi1 = model->pi(1.0, r.x);
    const double mu1 = model->mu(r.x, 1.0);
    const double mu0 = model->mu(r.x, 0.0);
    const double s = smooth_indicator_two_sided(pi1, ctx.t, ctx.indicator);
    const double ds = smooth_indicator_two_sided_dpi(pi1, ctx.t, ctx.indicator);
    const double want_num =
        s * (mu1 - mu0) + ds * (1.0 - pi1) * (mu1 - mu0) + s * (r.y - mu1) / pi1;
    CHECK(eif_binary_contrast_num(r, ctx) == doctest::Approx(want_num).epsilon(1e-13));
    CHECK(eif_binary_contrast_den(r, ctx) ==
          doctest::Approx(s + ds * (1.0 - pi1)).epsilon(1e-13));

    Record r0 = r;
    r0.a = 0.0;
    r0.y = 0.1;
    const double want_num0 =
        s * (mu1 - mu0) + ds * (0.0 - pi1) * (mu1 - mu0) - s * (r0.y - mu0) / (1.0 - pi1);
    CHECK(eif_binary_contrast_num(r0, ctx) == doctest::Approx(want_num0).epsilon(1e-13));

    // No trimming: with pi1 = 0.6 far inside (t, 1-t) relative to epsilon, the
    // two-sided indicator saturates to exactly one (and its slope to zero), so
    // the contrast collapses to the uncentered AIPW value bitwise.
    ctx.t = 0.01;
    ctx.indicator.epsilon = 0.005;
    CHECK(eif_binary_contrast_num(r, ctx) == (mu1 - mu0) + (r.y - mu1) / pi1);
    CHECK(eif_binary_contrast_den(r, ctx) == 1.0);
}

TEST_CASE("inverse-propensity terms are guarded only where the kernel is live") {
    auto model = std::make_shared<FunctionModel>(
        [](double, std::span<const double>) { return 0.0; },
        [](std::span<const double>, double) { return 1.0; });
    auto grid = QuadratureGrid::uniform(2.0, 3.0, 0.1);
    EifContext ctx;
    ctx.model = model.get();
    ctx.kernel.h = 0.1;
    ctx.indicator.epsilon = 0.05;
    ctx.grid = &grid;
    ctx.a = 2.5;
    ctx.t = 0.1;

    // Observed treatment right at the evaluation level, propensity zero.
    Record bad{{0.1}, 2.5, 1.0, 1.0};
    CHECK_THROWS_AS(eif_num(bad, ctx), NonpositivePropensityError);
    CHECK_THROWS_AS(eif_sate(bad, ctx), NonpositivePropensityError);
    // Far away: the kernel weight is exactly zero, the bad propensity is never
    // inverted, and the integral terms still evaluate.
    Record far{{0.1}, -40.0, 1.0, 1.0};
    CHECK_NOTHROW(eif_num(far, ctx));
    CHECK_NOTHROW(eif_sate(far, ctx));

    // Discrete guard: only the matched level inverts the propensity.
    EifContext dctx;
    dctx.model = model.get();
    dctx.indicator.epsilon = 0.05;
    dctx.a = 1.0;
    dctx.t = 0.1;
    Record dbad{{0.1}, 1.0, 1.0, 1.0};
    CHECK_THROWS_AS(eif_num_discrete(dbad, dctx), NonpositivePropensityError);
    Record dok{{0.1}, 0.0, 1.0, 1.0};
    CHECK_NOTHROW(eif_num_discrete(dok, dctx));
}

TEST_CASE("batch evaluation is bitwise identical to the per-record path") {
    DgpSpec spec;
    spec.n = 40;
    Dataset data = generate_dataset(spec, 17);
    auto model = make_true_model(spec);
    auto grid = QuadratureGrid::default_for(0.0, 1.0, 0.1);
    NuisanceTable tab = build_nuisance_table(data, *model, grid);
    CHECK(tab.n == data.size());
    CHECK(tab.grid_size == grid.size());

    for (double t : {0.1, -1e6}) {
        for (double a : {0.2, 0.5}) {
            EifContext ctx;
            ctx.model = model.get();
            ctx.kernel.h = 0.1;
            ctx.indicator.epsilon = 0.01;
            ctx.grid = &grid;
            ctx.a = a;
            ctx.t = t;
            EifRequest req;
            req.sate = true;
            req.num_den = true;
            req.derivs = true;
            EifValues batch = compute_eif_values(tab, grid, ctx.kernel, ctx.indicator, a, t, req);
            EifValues direct = compute_eif_values(data, ctx, req);
            REQUIRE(batch.size() == data.size());
            for (std::size_t u = 0; u < data.size(); ++u) {
                const auto row = static_cast<std::ptrdiff_t>(u);
                CHECK(batch.num[u] == direct.num[u]);
                CHECK(batch.num[u] == eif_num(data.records[u], ctx, row));
                CHECK(batch.den[u] == eif_den(data.records[u], ctx, row));
                CHECK(batch.sate[u] == eif_sate(data.records[u], ctx, row));
                CHECK(batch.num_dt[u] == eif_num_dt(data.records[u], ctx, row));
                CHECK(batch.den_dt[u] == eif_den_dt(data.records[u], ctx, row));
                CHECK(batch.weights[u] == data.records[u].w);
            }
        }
    }
}

TEST_CASE("threshold derivatives agree with finite differences") {
    auto model = toy_model();
    auto grid = QuadratureGrid::default_for(0.0, 1.0, 0.15);
    Record r{{0.35}, 0.52, 0.9, 1.0};
    for (double t : {0.3, 0.5, 0.7}) {
        EifContext ctx = toy_context(*model, grid, 0.5, t);
        ctx.kernel.h = 0.15;
        const double dt = 1e-5;
        EifContext hi = ctx, lo = ctx;
        hi.t = t + dt;
        lo.t = t - dt;
        const double fd_num = (eif_num(r, hi) - eif_num(r, lo)) / (2.0 * dt);
        const double fd_den = (eif_den(r, hi) - eif_den(r, lo)) / (2.0 * dt);
        CHECK(eif_num_dt(r, ctx) == doctest::Approx(fd_num).epsilon(1e-5));
        CHECK(eif_den_dt(r, ctx) == doctest::Approx(fd_den).epsilon(1e-5));
    }
}
