#pragma once

// Smoothing primitives shared by every estimator: the treatment-localizing
// kernel, the smooth trimming indicator and its partial derivatives, and the
// deterministic quadrature grid used for all integrals over the treatment
// axis.  Everything here is pure and thread-safe.

#include <cstddef>
#include <functional>
#include <vector>

namespace trimcurve {

// Arguments this many standard units out or beyond are flushed to exact 0/1.
// exp(-38^2/2) underflows double precision, so the cutoff changes no value
// by more than one subnormal and makes tail behaviour deterministic.
inline constexpr double kTailCutoff = 38.0;

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
inline constexpr double kInvSqrt2 = 0.7071067811865475244008444;

enum class KernelFamily { Gaussian };
enum class IndicatorFamily { NormalCDF };

struct KernelConfig {
    double h = 0.1;                              // bandwidth, > 0
    KernelFamily family = KernelFamily::Gaussian;
};

struct IndicatorConfig {
    double epsilon = 0.01;                       // smoothing scale, > 0
    IndicatorFamily family = IndicatorFamily::NormalCDF;
};

// Standard normal density / CDF with hard saturation past |z| = 38.
double normal_pdf(double z);
double normal_cdf(double z);

// Inverse standard normal CDF (Wichura AS 241, double precision).
double normal_quantile(double p);

// K_h(u) = phi(u/h)/h.  Exactly zero when |u|/h exceeds the tail cutoff.
double kernel_weight(double u, const KernelConfig& cfg);

// S(pi, t) = Phi((pi - t)/epsilon): smooth version of the indicator pi > t.
double smooth_indicator(double pi, double t, const IndicatorConfig& cfg);

// dS/dpi = phi_eps(pi - t), the N(0, eps^2) density at pi - t.
double smooth_indicator_dpi(double pi, double t, const IndicatorConfig& cfg);

// dS/dt = -phi_eps(pi - t).
double smooth_indicator_dt(double pi, double t, const IndicatorConfig& cfg);

// d2S/(dpi dt) = ((pi - t)/eps^2) phi_eps(pi - t).
double smooth_indicator_dpi_dt(double pi, double t, const IndicatorConfig& cfg);

// Two-sided variant for binary treatments, smoothing t < pi < 1 - t.
// Requires 0 < t < 0.5.
double smooth_indicator_two_sided(double pi, double t, const IndicatorConfig& cfg);
double smooth_indicator_two_sided_dpi(double pi, double t, const IndicatorConfig& cfg);
double smooth_indicator_two_sided_dt(double pi, double t, const IndicatorConfig& cfg);
double smooth_indicator_two_sided_dpi_dt(double pi, double t, const IndicatorConfig& cfg);

// Fixed quadrature grid with composite-trapezoid weights.  One grid instance
// is shared by every integral of an estimation pass so that discretization
// error cancels in algebraic identities.
struct QuadratureGrid {
    std::vector<double> points;   // strictly ascending
    std::vector<double> weights;  // trapezoid weights, same length

    std::size_t size() const { return points.size(); }

    // Uniform grid lo, lo+step, ..., hi (hi is included; (hi-lo)/step must be
    // a whole number up to rounding).
    static QuadratureGrid uniform(double lo, double hi, double step);

    // Default grid for data with treatments in [a_min, a_max]: extend by 6h
    // on both sides, step min(h/2, 0.05).
    static QuadratureGrid default_for(double a_min, double a_max, double h);
};

// Trapezoid integral of f over the grid.
double integrate(const std::function<double(double)>& f, const QuadratureGrid& grid);

// lo, lo+step, ..., hi as one deterministic construction, shared by every
// grid in the library (evaluation grids, threshold grids, quadrature).
std::vector<double> uniform_points(double lo, double hi, double step);

} // namespace trimcurve
