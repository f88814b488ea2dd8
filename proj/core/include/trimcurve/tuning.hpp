#pragma once

// Data-driven choice of the two smoothing scales: the treatment-kernel
// bandwidth h (by an estimable excess-risk criterion) and the indicator
// scale epsilon (by targeting a small residual trimming entropy).

#include <span>
#include <vector>

#include "trimcurve/dataset.hpp"
#include "trimcurve/nuisance.hpp"
#include "trimcurve/smoothing.hpp"

namespace trimcurve {

// Excess-risk estimate for the smoothed trimmed curve at one bandwidth:
//   P_n { Int [ psi_h(a;t)^2 - 2 psi_h(a;t) mu(x,a) ] S(pi(a|x),t) da }
// integrated over a_integration (trapezoid).  Shifting the criterion by any
// h-free constant does not move its argmin, which is all selection uses.
// Estimator failures at any integration point propagate.
double estimate_risk(const Dataset& data, const NuisanceModel& model, const KernelConfig& kernel,
                     const IndicatorConfig& indicator, double t, const QuadratureGrid& a_integration,
                     const QuadratureGrid& quad);

struct RiskPoint {
    double h = 0.0;
    double risk = 0.0;
};

struct BandwidthSelection {
    double h_star = 0.0;
    std::vector<RiskPoint> path;
    bool degenerate = false;  // fewer than two candidates
};

// Sweeps candidates (sorted ascending internally; ties keep the smaller h).
// Every candidate shares one a-integration grid over exactly [a_lo, a_hi],
// so criteria are comparable; keep the range inside the region where the
// trimmed population is estimable.  Each candidate uses its own default
// quadrature grid.
BandwidthSelection select_bandwidth(std::span<const double> candidates, const Dataset& data,
                                    const NuisanceModel& model, const IndicatorConfig& indicator,
                                    double t, double a_lo, double a_hi, double a_step,
                                    unsigned threads = 1);

// Residual trimming entropy at one treatment level:
//   -P_n[ s log2 s + (1-s) log2(1-s) ],   s = S(pi(a|X), t),
// with exactly-saturated s contributing zero.
double estimate_entropy(const Dataset& data, const NuisanceModel& model,
                        const IndicatorConfig& indicator, double a, double t);

struct EntropyPoint {
    double epsilon = 0.0;
    double entropy = 0.0;  // averaged uniformly over the requested levels
};

struct EpsilonSelection {
    double epsilon_star = 0.0;
    std::vector<EntropyPoint> path;
    bool degenerate = false;
};

// Picks the candidate whose grid-averaged entropy is nearest the target
// (default 0.05); ties keep the smaller epsilon.
EpsilonSelection select_epsilon(std::span<const double> candidates, const Dataset& data,
                                const NuisanceModel& model, std::span<const double> a_grid,
                                double t, double target = 0.05);

} // namespace trimcurve
