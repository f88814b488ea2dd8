#include "trimcurve/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "trimcurve/errors.hpp"
#include "trimcurve/rng.hpp"
#include "trimcurve/smoothing.hpp"

namespace trimcurve {

double NuisanceModel::pi(double, std::span<const double>, std::ptrdiff_t) const {
    throw Error("model does not provide pi");
}

double NuisanceModel::mu(std::span<const double>, double, std::ptrdiff_t) const {
    throw Error("model does not provide mu");
}

double FunctionModel::pi(double a, std::span<const double> x, std::ptrdiff_t row) const {
    if (!pi_) return NuisanceModel::pi(a, x, row);
    return pi_(a, x);
}

double FunctionModel::mu(std::span<const double> x, double a, std::ptrdiff_t row) const {
    if (!mu_) return NuisanceModel::mu(x, a, row);
    return mu_(x, a);
}

namespace {

class ComposedModel final : public NuisanceModel {
public:
    ComposedModel(std::shared_ptr<const NuisanceModel> pi_m, std::shared_ptr<const NuisanceModel> mu_m)
        : pi_m_(std::move(pi_m)), mu_m_(std::move(mu_m)) {}
    double pi(double a, std::span<const double> x, std::ptrdiff_t row) const override {
        return pi_m_->pi(a, x, row);
    }
    double mu(std::span<const double> x, double a, std::ptrdiff_t row) const override {
        return mu_m_->mu(x, a, row);
    }
    bool provides_pi() const override { return pi_m_->provides_pi(); }
    bool provides_mu() const override { return mu_m_->provides_mu(); }

private:
    std::shared_ptr<const NuisanceModel> pi_m_, mu_m_;
};

double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp_unit(double p, std::size_t& clamps) {
    constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
    if (p < lo) { ++clamps; return lo; }
    if (p > hi) { ++clamps; return hi; }
    return p;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace

std::shared_ptr<const NuisanceModel> compose_models(std::shared_ptr<const NuisanceModel> pi_model,
                                                    std::shared_ptr<const NuisanceModel> mu_model) {
    return std::make_shared<ComposedModel>(std::move(pi_model), std::move(mu_model));
}

// ---------------------------------------------------------------------------
// NoisyModel
// ---------------------------------------------------------------------------

NoisyModel::NoisyModel(std::shared_ptr<const NuisanceModel> base, const Dataset& data,
                       std::vector<double> grid_points, const SyntheticNoiseSpec& spec)
    : base_(std::move(base)), grid_(std::move(grid_points)), n_records_(data.size()) {
    if (grid_.size() < 2) throw Error("noisy model needs a grid with at least 2 points");
    if (!std::is_sorted(grid_.begin(), grid_.end())) throw Error("noisy model grid must be sorted");
    const double rate = std::pow(static_cast<double>(spec.n), -spec.alpha);
    const std::size_t cells = n_records_ * grid_.size();
    z_pi_.resize(cells);
    z_mu_.resize(cells);
    pi_hat_.resize(cells);
    mu_hat_.resize(cells);
    auto eng_pi = make_engine(derive_seed(spec.seed, stream::kNoisePi));
    auto eng_mu = make_engine(derive_seed(spec.seed, stream::kNoiseMu));
    std::normal_distribution<double> dist(rate, rate);
    for (std::size_t c = 0; c < cells; ++c) z_pi_[c] = dist(eng_pi);
    for (std::size_t c = 0; c < cells; ++c) z_mu_[c] = dist(eng_mu);
    for (std::size_t u = 0; u < n_records_; ++u) {
        const auto& r = data.records[u];
        for (std::size_t g = 0; g < grid_.size(); ++g) {
            const std::size_t c = cell(u, g);
            const double p = base_->pi(grid_[g], r.x, static_cast<std::ptrdiff_t>(u));
            const double half = clamp_unit(p / 2.0, clamp_count_);
            pi_hat_[c] = 2.0 * expit(logit(half) + z_pi_[c]);
            mu_hat_[c] = base_->mu(r.x, grid_[g], static_cast<std::ptrdiff_t>(u)) + z_mu_[c];
        }
    }
}

namespace {

// Shared interpolation scheme for the per-record noise tables.
struct GridLookup {
    enum class Kind { BelowLo, AboveHi, Exact, Between } kind;
    std::size_t idx;     // Exact: the point; Between: left neighbour
    double frac;         // Between: weight of the right neighbour
};

GridLookup locate(const std::vector<double>& grid, double a) {
    if (a < grid.front()) return {GridLookup::Kind::BelowLo, 0, 0.0};
    if (a > grid.back()) return {GridLookup::Kind::AboveHi, grid.size() - 1, 0.0};
    const auto it = std::lower_bound(grid.begin(), grid.end(), a);
    const auto j = static_cast<std::size_t>(it - grid.begin());
    if (*it == a) return {GridLookup::Kind::Exact, j, 0.0};
    const double frac = (a - grid[j - 1]) / (grid[j] - grid[j - 1]);
    return {GridLookup::Kind::Between, j - 1, frac};
}

} // namespace

double NoisyModel::pi(double a, std::span<const double> x, std::ptrdiff_t row) const {
    if (row < 0 || static_cast<std::size_t>(row) >= n_records_)
        throw Error("noisy model queried without a valid record row");
    const auto u = static_cast<std::size_t>(row);
    const auto loc = locate(grid_, a);
    switch (loc.kind) {
    case GridLookup::Kind::Exact:
        return pi_hat_[cell(u, loc.idx)];
    case GridLookup::Kind::Between: {
        const double lo = pi_hat_[cell(u, loc.idx)];
        const double hi = pi_hat_[cell(u, loc.idx + 1)];
        return lo + loc.frac * (hi - lo);
    }
    default: {
        // outside the table: carry the end point's disturbance over
        std::size_t clamps = 0;
        const double half = clamp_unit(base_->pi(a, x, row) / 2.0, clamps);
        return 2.0 * expit(logit(half) + z_pi_[cell(u, loc.idx)]);
    }
    }
}

double NoisyModel::mu(std::span<const double> x, double a, std::ptrdiff_t row) const {
    if (row < 0 || static_cast<std::size_t>(row) >= n_records_)
        throw Error("noisy model queried without a valid record row");
    const auto u = static_cast<std::size_t>(row);
    const auto loc = locate(grid_, a);
    switch (loc.kind) {
    case GridLookup::Kind::Exact:
        return mu_hat_[cell(u, loc.idx)];
    case GridLookup::Kind::Between: {
        const double lo = mu_hat_[cell(u, loc.idx)];
        const double hi = mu_hat_[cell(u, loc.idx + 1)];
        return lo + loc.frac * (hi - lo);
    }
    default:
        return base_->mu(x, a, row) + z_mu_[cell(u, loc.idx)];
    }
}

// ---------------------------------------------------------------------------
// NoisyBinaryModel
// ---------------------------------------------------------------------------

NoisyBinaryModel::NoisyBinaryModel(std::shared_ptr<const NuisanceModel> base, const Dataset& data,
                                   const SyntheticNoiseSpec& spec)
    : base_(std::move(base)) {
    const double rate = std::pow(static_cast<double>(spec.n), -spec.alpha);
    const std::size_t n = data.size();
    pi1_hat_.resize(n);
    z_mu_.resize(n);
    auto eng_pi = make_engine(derive_seed(spec.seed, stream::kNoisePi));
    auto eng_mu = make_engine(derive_seed(spec.seed, stream::kNoiseMu));
    std::normal_distribution<double> dist(rate, rate);
    std::vector<double> z_pi(n);
    for (std::size_t u = 0; u < n; ++u) z_pi[u] = dist(eng_pi);
    for (std::size_t u = 0; u < n; ++u) z_mu_[u] = dist(eng_mu);
    for (std::size_t u = 0; u < n; ++u) {
        const double p = clamp_unit(base_->pi(1.0, data.records[u].x, static_cast<std::ptrdiff_t>(u)),
                                    clamp_count_);
        pi1_hat_[u] = expit(logit(p) + z_pi[u]);
    }
}

double NoisyBinaryModel::pi(double a, std::span<const double>, std::ptrdiff_t row) const {
    if (row < 0 || static_cast<std::size_t>(row) >= pi1_hat_.size())
        throw Error("noisy model queried without a valid record row");
    const auto u = static_cast<std::size_t>(row);
    if (a == 1.0) return pi1_hat_[u];
    if (a == 0.0) return 1.0 - pi1_hat_[u];
    throw Error("binary model queried at non-binary treatment");
}

double NoisyBinaryModel::mu(std::span<const double> x, double a, std::ptrdiff_t row) const {
    if (row < 0 || static_cast<std::size_t>(row) >= z_mu_.size())
        throw Error("noisy model queried without a valid record row");
    return base_->mu(x, a, row) + z_mu_[static_cast<std::size_t>(row)];
}

// ---------------------------------------------------------------------------
// Nadaraya-Watson fitters
// ---------------------------------------------------------------------------

namespace {

double product_kernel(std::span<const double> x, std::span<const double> xi, double bw) {
    double k = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        k *= normal_pdf((x[j] - xi[j]) / bw) / bw;
        if (k == 0.0) return 0.0;
    }
    return k;
}

struct Sample {
    std::vector<std::vector<double>> x;
    std::vector<double> a, y, w;
};

Sample copy_sample(const Dataset& data) {
    Sample s;
    s.x.reserve(data.size());
    s.a.reserve(data.size());
    s.y.reserve(data.size());
    s.w.reserve(data.size());
    for (const auto& r : data.records) {
        s.x.push_back(r.x);
        s.a.push_back(r.a);
        s.y.push_back(r.y);
        s.w.push_back(r.w);
    }
    return s;
}

class GaussianPsModel final : public NuisanceModel {
public:
    GaussianPsModel(const Dataset& data, double bw_mean, double bw_var)
        : sample_(copy_sample(data)), bw_mean_(bw_mean), bw_var_(bw_var) {
        if (data.size() < 10) throw Error("propensity fit needs at least 10 records");
        if (!(bw_mean > 0.0) || !(bw_var > 0.0)) throw Error("propensity bandwidths must be positive");
        global_mean_ = weighted_mean(sample_.a, sample_.w);
        sq_resid_.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double e = sample_.a[i] - nw_mean(sample_.x[i]);
            sq_resid_[i] = e * e;
        }
        global_var_ = std::max(weighted_mean(sq_resid_, sample_.w), 1e-6);
    }

    double pi(double a, std::span<const double> x, std::ptrdiff_t) const override {
        const double m = nw_mean(x);
        const double s2 = nw_var(x);
        const double sd = std::sqrt(s2);
        return normal_pdf((a - m) / sd) / sd;
    }

    bool provides_mu() const override { return false; }

private:
    double nw_mean(std::span<const double> x) const {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < sample_.a.size(); ++i) {
            const double k = sample_.w[i] * product_kernel(x, sample_.x[i], bw_mean_);
            num += k * sample_.a[i];
            den += k;
        }
        return den > 0.0 ? num / den : global_mean_;
    }

    double nw_var(std::span<const double> x) const {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < sq_resid_.size(); ++i) {
            const double k = sample_.w[i] * product_kernel(x, sample_.x[i], bw_var_);
            num += k * sq_resid_[i];
            den += k;
        }
        return den > 0.0 ? std::max(num / den, 1e-6) : global_var_;
    }

    Sample sample_;
    double bw_mean_, bw_var_;
    std::vector<double> sq_resid_;
    double global_mean_ = 0.0, global_var_ = 1e-6;
};

class OutcomeNwModel final : public NuisanceModel {
public:
    OutcomeNwModel(const Dataset& data, double bw_x, double bw_a)
        : sample_(copy_sample(data)), bw_x_(bw_x), bw_a_(bw_a) {
        if (data.size() < 10) throw Error("outcome fit needs at least 10 records");
        if (!(bw_x > 0.0) || !(bw_a > 0.0)) throw Error("outcome bandwidths must be positive");
        global_mean_ = weighted_mean(sample_.y, sample_.w);
    }

    double mu(std::span<const double> x, double a, std::ptrdiff_t) const override {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < sample_.y.size(); ++i) {
            double k = sample_.w[i] * product_kernel(x, sample_.x[i], bw_x_);
            if (k == 0.0) continue;
            k *= normal_pdf((a - sample_.a[i]) / bw_a_) / bw_a_;
            num += k * sample_.y[i];
            den += k;
        }
        return den > 0.0 ? num / den : global_mean_;
    }

    bool provides_pi() const override { return false; }

private:
    Sample sample_;
    double bw_x_, bw_a_;
    double global_mean_ = 0.0;
};

} // namespace

std::shared_ptr<const NuisanceModel> fit_conditional_gaussian_ps(const Dataset& data,
                                                                 double bw_mean, double bw_var) {
    return std::make_shared<GaussianPsModel>(data, bw_mean, bw_var);
}

std::shared_ptr<const NuisanceModel> fit_outcome_regression(const Dataset& data, double bw_x,
                                                            double bw_a) {
    return std::make_shared<OutcomeNwModel>(data, bw_x, bw_a);
}

} // namespace trimcurve
