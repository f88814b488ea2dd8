#pragma once

// Nuisance models: the propensity density pi(a|x) and outcome regression
// mu(x,a) every estimator consumes.  Models are immutable once built and
// safe to query from multiple threads.
//
// Queries carry an optional record row.  Models fit from data ignore it;
// synthetic "estimated" models with per-record disturbances require it so
// repeated queries see one coherent function per record.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "trimcurve/dataset.hpp"

namespace trimcurve {

class NuisanceModel {
public:
    virtual ~NuisanceModel() = default;

    // Conditional treatment density (or probability mass) at a given x.
    virtual double pi(double a, std::span<const double> x, std::ptrdiff_t row = -1) const;

    // Outcome regression E[Y | X = x, A = a].
    virtual double mu(std::span<const double> x, double a, std::ptrdiff_t row = -1) const;

    virtual bool provides_pi() const { return true; }
    virtual bool provides_mu() const { return true; }
};

// Model built from plain callables; either side may be absent.
class FunctionModel final : public NuisanceModel {
public:
    using PiFn = std::function<double(double a, std::span<const double> x)>;
    using MuFn = std::function<double(std::span<const double> x, double a)>;

    FunctionModel(PiFn pi_fn, MuFn mu_fn) : pi_(std::move(pi_fn)), mu_(std::move(mu_fn)) {}

    double pi(double a, std::span<const double> x, std::ptrdiff_t row) const override;
    double mu(std::span<const double> x, double a, std::ptrdiff_t row) const override;
    bool provides_pi() const override { return static_cast<bool>(pi_); }
    bool provides_mu() const override { return static_cast<bool>(mu_); }

private:
    PiFn pi_;
    MuFn mu_;
};

// pi from one model, mu from another.
std::shared_ptr<const NuisanceModel> compose_models(std::shared_ptr<const NuisanceModel> pi_model,
                                                    std::shared_ptr<const NuisanceModel> mu_model);

// ---------------------------------------------------------------------------
// Synthetic estimated nuisances: truth distorted at a chosen convergence rate.
// ---------------------------------------------------------------------------

// Disturbances are N(n^-alpha, n^-2alpha); larger alpha means faster-
// converging (better) synthetic estimates.
struct SyntheticNoiseSpec {
    double alpha = 0.3;
    std::size_t n = 1000;      // sample size driving the rate
    std::uint64_t seed = 1;
};

// Continuous-treatment noisy model over a fixed treatment grid.
//
// For each record and grid point, with an independent disturbance Z:
//   pi_hat = 2 expit(logit(pi/2) + Z),   mu_hat = mu + Z'
// (pi/2 is clamped into (1e-12, 1-1e-12) before the logit; clamp_count()
// reports how often that fired).  Queries at grid points return the cached
// values; interior off-grid queries interpolate the cached values linearly;
// queries beyond the grid ends apply the end point's disturbance to the
// local truth so tails keep the multiplicative structure.
class NoisyModel final : public NuisanceModel {
public:
    NoisyModel(std::shared_ptr<const NuisanceModel> base, const Dataset& data,
               std::vector<double> grid_points, const SyntheticNoiseSpec& spec);

    double pi(double a, std::span<const double> x, std::ptrdiff_t row) const override;
    double mu(std::span<const double> x, double a, std::ptrdiff_t row) const override;

    std::size_t clamp_count() const { return clamp_count_; }

private:
    std::shared_ptr<const NuisanceModel> base_;
    std::vector<double> grid_;
    std::size_t n_records_;
    std::vector<double> pi_hat_, mu_hat_;  // [record][grid] row-major
    std::vector<double> z_pi_, z_mu_;
    std::size_t clamp_count_ = 0;

    std::size_t cell(std::size_t row, std::size_t g) const { return row * grid_.size() + g; }
};

// Binary-treatment noisy model: one disturbance pair per record,
//   pi_hat(1|x) = expit(logit(pi(1|x)) + Z),   mu_hat = mu + Z'.
// pi(0|x) is reported as 1 - pi_hat(1|x).
class NoisyBinaryModel final : public NuisanceModel {
public:
    NoisyBinaryModel(std::shared_ptr<const NuisanceModel> base, const Dataset& data,
                     const SyntheticNoiseSpec& spec);

    double pi(double a, std::span<const double> x, std::ptrdiff_t row) const override;
    double mu(std::span<const double> x, double a, std::ptrdiff_t row) const override;

    std::size_t clamp_count() const { return clamp_count_; }

private:
    std::shared_ptr<const NuisanceModel> base_;
    std::vector<double> pi1_hat_, z_mu_;
    std::size_t clamp_count_ = 0;
};

// ---------------------------------------------------------------------------
// Kernel-regression fitters for real data.
// ---------------------------------------------------------------------------

// Conditional Gaussian propensity: m(x) by weighted Nadaraya-Watson
// regression of A on X (bandwidth bw_mean), s2(x) by NW regression of the
// squared residuals (bandwidth bw_var, floored at 1e-6), and
//   pi(a|x) = Normal(a; m(x), s2(x)) density.
// Needs at least 10 records.  Provides pi only.
std::shared_ptr<const NuisanceModel> fit_conditional_gaussian_ps(const Dataset& data,
                                                                 double bw_mean, double bw_var);

// Outcome regression by weighted NW with a product kernel over (x, a).
// Needs at least 10 records.  Provides mu only.
std::shared_ptr<const NuisanceModel> fit_outcome_regression(const Dataset& data, double bw_x,
                                                            double bw_a);

} // namespace trimcurve
