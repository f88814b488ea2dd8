// Microbenchmarks for the hot paths: per-record influence slices, full curve
// evaluation, and the estimated-threshold scan.

#include <benchmark/benchmark.h>

#include <memory>

#include "trimcurve/dataset.hpp"
#include "trimcurve/estimators.hpp"
#include "trimcurve/influence.hpp"
#include "trimcurve/simlab.hpp"
#include "trimcurve/smoothing.hpp"

using namespace trimcurve;

namespace {

struct Fixture {
    DgpSpec spec;
    std::shared_ptr<const NuisanceModel> model;
    Dataset data;
    KernelConfig kernel{0.1};
    IndicatorConfig indicator{0.01};
    QuadratureGrid quad = QuadratureGrid::default_for(0.0, 1.0, 0.1);

    explicit Fixture(std::size_t n) {
        spec.n = n;
        model = make_true_model(spec);
        data = generate_dataset(spec, 42);
    }
};

void BM_EifSlice(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    EifContext ctx;
    ctx.model = f.model.get();
    ctx.kernel = f.kernel;
    ctx.indicator = f.indicator;
    ctx.grid = &f.quad;
    ctx.a = 0.5;
    ctx.t = 0.1;
    EifRequest req;
    req.num_den = true;
    for (auto _ : state) {
        EifValues v = compute_eif_values(f.data, ctx, req);
        benchmark::DoNotOptimize(v.num.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_CurvePoint(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    const CurveEvaluator eval(f.data, *f.model, f.kernel, f.indicator, f.quad);
    for (auto _ : state) {
        const EstimateReport rep = eval.state_fixed_t(0.5, 0.1, 0.95);
        benchmark::DoNotOptimize(rep.psi_hat);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ThresholdScan(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    const CurveEvaluator eval(f.data, *f.model, f.kernel, f.indicator, f.quad);
    TrimSpec trim;
    trim.mode = TrimSpec::Mode::Quantile;
    trim.gamma = 0.2;
    for (auto _ : state) {
        const EstimateReport rep = eval.state_estimated_t(0.5, trim, 0.95);
        benchmark::DoNotOptimize(rep.t_used);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(BM_EifSlice)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CurvePoint)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ThresholdScan)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
