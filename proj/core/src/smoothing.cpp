#include "trimcurve/smoothing.hpp"

#include <cmath>
#include <stdexcept>

namespace trimcurve {

double normal_pdf(double z) {
    if (!(std::abs(z) < kTailCutoff)) return 0.0;
    return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

double normal_cdf(double z) {
    if (z >= kTailCutoff) return 1.0;
    if (z <= -kTailCutoff) return 0.0;
    return 0.5 * std::erfc(-z * kInvSqrt2);
}

// AS 241 algorithm PPND16: relative error below 1e-15 on (0, 1).
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must be in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double v;
    if (r <= 5.0) {
        r -= 1.6;
        v = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -v : v;
}

double kernel_weight(double u, const KernelConfig& cfg) {
    return normal_pdf(u / cfg.h) / cfg.h;
}

double smooth_indicator(double pi, double t, const IndicatorConfig& cfg) {
    return normal_cdf((pi - t) / cfg.epsilon);
}

double smooth_indicator_dpi(double pi, double t, const IndicatorConfig& cfg) {
    return normal_pdf((pi - t) / cfg.epsilon) / cfg.epsilon;
}

double smooth_indicator_dt(double pi, double t, const IndicatorConfig& cfg) {
    return -smooth_indicator_dpi(pi, t, cfg);
}

double smooth_indicator_dpi_dt(double pi, double t, const IndicatorConfig& cfg) {
    const double z = (pi - t) / cfg.epsilon;
    if (!(std::abs(z) < kTailCutoff)) return 0.0;
    return z / (cfg.epsilon * cfg.epsilon) * normal_pdf(z);
}

static void check_two_sided_t(double t) {
    if (!(t > 0.0 && t < 0.5))
        throw std::domain_error("two-sided indicator requires 0 < t < 0.5");
}

double smooth_indicator_two_sided(double pi, double t, const IndicatorConfig& cfg) {
    check_two_sided_t(t);
    return smooth_indicator(pi, t, cfg) * normal_cdf(((1.0 - t) - pi) / cfg.epsilon);
}

double smooth_indicator_two_sided_dpi(double pi, double t, const IndicatorConfig& cfg) {
    check_two_sided_t(t);
    const double lower_cdf = smooth_indicator(pi, t, cfg);
    const double lower_pdf = smooth_indicator_dpi(pi, t, cfg);
    const double upper_cdf = normal_cdf(((1.0 - t) - pi) / cfg.epsilon);
    const double upper_pdf = normal_pdf(((1.0 - t) - pi) / cfg.epsilon) / cfg.epsilon;
    return lower_pdf * upper_cdf - lower_cdf * upper_pdf;
}

double smooth_indicator_two_sided_dt(double pi, double t, const IndicatorConfig& cfg) {
    check_two_sided_t(t);
    const double lower_cdf = smooth_indicator(pi, t, cfg);
    const double lower_pdf = smooth_indicator_dpi(pi, t, cfg);
    const double upper_cdf = normal_cdf(((1.0 - t) - pi) / cfg.epsilon);
    const double upper_pdf = normal_pdf(((1.0 - t) - pi) / cfg.epsilon) / cfg.epsilon;
    // d/dt [Phi_e(pi-t) Phi_e((1-t)-pi)] with both factors depending on t.
    return -lower_pdf * upper_cdf - lower_cdf * upper_pdf;
}

double smooth_indicator_two_sided_dpi_dt(double pi, double t, const IndicatorConfig& cfg) {
    check_two_sided_t(t);
    const double e2 = cfg.epsilon * cfg.epsilon;
    const double zl = (pi - t) / cfg.epsilon;
    const double zu = ((1.0 - t) - pi) / cfg.epsilon;
    const double fl = normal_pdf(zl) / cfg.epsilon;   // phi_e(pi - t)
    const double fu = normal_pdf(zu) / cfg.epsilon;   // phi_e((1-t) - pi)
    const double Fl = normal_cdf(zl);
    const double Fu = normal_cdf(zu);
    const double dfl_dt = zl / e2 * normal_pdf(zl);   // d phi_e(pi-t)/dt
    const double dfu_dt = zu / e2 * normal_pdf(zu);   // d phi_e((1-t)-pi)/dt
    // d/dt of (fl*Fu - Fl*fu)
    return dfl_dt * Fu + fl * (-fu) - (-fl) * fu - Fl * dfu_dt;
}

std::vector<double> uniform_points(double lo, double hi, double step) {
    if (!(step > 0.0)) throw std::domain_error("grid step must be positive");
    if (!(hi > lo)) throw std::domain_error("grid needs hi > lo");
    const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    std::vector<double> pts(count);
    for (std::size_t i = 0; i < count; ++i) pts[i] = lo + static_cast<double>(i) * step;
    return pts;
}

QuadratureGrid QuadratureGrid::uniform(double lo, double hi, double step) {
    QuadratureGrid g;
    g.points = uniform_points(lo, hi, step);
    const std::size_t count = g.points.size();
    if (count < 2) throw std::domain_error("quadrature grid needs at least 2 points");
    g.weights.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double left = (i == 0) ? g.points[0] : g.points[i - 1];
        const double right = (i + 1 == count) ? g.points[count - 1] : g.points[i + 1];
        g.weights[i] = 0.5 * (right - left);
    }
    return g;
}

QuadratureGrid QuadratureGrid::default_for(double a_min, double a_max, double h) {
    if (!(h > 0.0)) throw std::domain_error("bandwidth must be positive");
    const double step = std::min(h / 2.0, 0.05);
    // 6h of padding keeps the kernel mass within ~2e-9 of one for interior
    // levels, tight enough that untrimmed ratio estimators reduce to plain
    // means at the 1e-8 scale.
    return uniform(a_min - 6.0 * h, a_max + 6.0 * h, step);
}

double integrate(const std::function<double(double)>& f, const QuadratureGrid& grid) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) acc += grid.weights[i] * f(grid.points[i]);
    return acc;
}

} // namespace trimcurve
