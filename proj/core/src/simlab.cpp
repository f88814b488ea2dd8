#include "trimcurve/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "trimcurve/errors.hpp"
#include "trimcurve/parallel.hpp"
#include "trimcurve/rng.hpp"

namespace trimcurve {

namespace {

constexpr const char* kTruthCacheVersion = "truth-v1";

double nan_v() { return std::numeric_limits<double>::quiet_NaN(); }

void check_domain(double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw Error("dgp function argument outside [0,1]");
}

} // namespace

std::string_view dgp_name(DgpId id) {
    switch (id) {
    case DgpId::Continuous: return "continuous";
    case DgpId::Binary: return "binary";
    }
    return "unknown";
}

std::optional<DgpId> dgp_from_name(std::string_view name) {
    if (name == "continuous") return DgpId::Continuous;
    if (name == "binary") return DgpId::Binary;
    return std::nullopt;
}

double dgp_m(double x) {
    check_domain(x);
    if (x < 0.25) return 0.05;
    if (x < 0.5) return 0.15 - 24.0 * (0.25 - x) * (0.5 - x);
    return x;
}

double dgp_mu(double x) {
    check_domain(x);
    if (x <= 0.25) return 0.5 - 4.0 * (x - 0.2) * (x - 0.2);
    if (x <= 0.75) return 0.25 + 2.0 * (x - 0.2) * (x - 0.2);
    return 1.25 - x;
}

std::shared_ptr<const NuisanceModel> make_true_model(const DgpSpec& spec) {
    if (!(spec.sigma_a > 0.0) || !(spec.sigma_y > 0.0)) throw Error("dgp sigmas must be positive");
    if (spec.n < 2) throw Error("dgp sample size must be at least 2");
    const double sigma_a = spec.sigma_a;
    if (spec.id == DgpId::Continuous) {
        return std::make_shared<FunctionModel>(
            [sigma_a](double a, std::span<const double> x) {
                return normal_pdf((a - dgp_m(x[0])) / sigma_a) / sigma_a;
            },
            [](std::span<const double> x, double) { return dgp_mu(x[0]); });
    }
    return std::make_shared<FunctionModel>(
        [](double a, std::span<const double> x) {
            const double p1 = dgp_m(x[0]);
            if (a == 1.0) return p1;
            if (a == 0.0) return 1.0 - p1;
            throw Error("binary dgp propensity queried off {0,1}");
        },
        [](std::span<const double> x, double) { return dgp_mu(x[0]); });
}

Dataset generate_dataset(const DgpSpec& spec, std::uint64_t seed) {
    if (!(spec.sigma_a > 0.0) || !(spec.sigma_y > 0.0)) throw Error("dgp sigmas must be positive");
    if (spec.n < 2) throw Error("dgp sample size must be at least 2");
    auto eng = make_engine(derive_seed(seed, stream::kDataset));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Dataset data;
    data.records.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Record r;
        const double x = unif(eng);
        r.x = {x};
        if (spec.id == DgpId::Continuous) {
            r.a = std::normal_distribution<double>(dgp_m(x), spec.sigma_a)(eng);
        } else {
            r.a = std::bernoulli_distribution(dgp_m(x))(eng) ? 1.0 : 0.0;
        }
        r.y = std::normal_distribution<double>(dgp_mu(x), spec.sigma_y)(eng);
        data.records.push_back(std::move(r));
    }
    return data;
}

// --- truth table -------------------------------------------------------------

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mc_mean(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / n;
    double q = 0.0;
    for (double x : v) q += (x - m) * (x - m);
    const double var = v.size() > 1 ? q / (n - 1.0) : 0.0;
    return {m, std::sqrt(var / n)};
}

// Ratio mean(num)/mean(den) with a delta-method standard error.
MeanSe mc_ratio(std::span<const double> num, std::span<const double> den) {
    const double n = static_cast<double>(num.size());
    double sn = 0.0, sd = 0.0;
    for (std::size_t j = 0; j < num.size(); ++j) {
        sn += num[j];
        sd += den[j];
    }
    if (!(sd != 0.0)) return {nan_v(), nan_v()};
    const double r = sn / sd;
    const double dbar = sd / n;
    double q = 0.0;
    for (std::size_t j = 0; j < num.size(); ++j) {
        const double score = num[j] - r * den[j];
        q += score * score;
    }
    const double var = num.size() > 1 ? q / (n - 1.0) : 0.0;
    return {r, std::sqrt(var / n) / std::abs(dbar)};
}

// Lower gamma-quantile: smallest value with at least a gamma fraction at or
// below it.
double order_quantile(std::vector<double> v, double gamma) {
    std::sort(v.begin(), v.end());
    const double rank = gamma * static_cast<double>(v.size());
    std::size_t idx = static_cast<std::size_t>(std::ceil(rank));
    if (idx > 0) --idx;
    if (idx >= v.size()) idx = v.size() - 1;
    return v[idx];
}

} // namespace

TruthTable compute_truth(const DgpSpec& spec, const KernelConfig& kernel,
                         const IndicatorConfig& indicator, const TrimSpec& trim,
                         std::span<const double> a_grid, const QuadratureGrid& quad,
                         std::size_t mc_n, std::uint64_t seed, unsigned threads) {
    if (mc_n < 10000) throw Error("truth table needs at least 1e4 oracle draws");
    if (a_grid.empty()) throw Error("truth table needs a nonempty treatment grid");
    if (!(trim.t_max > trim.t_min)) throw Error("threshold search range is empty");
    const bool binary = spec.id == DgpId::Binary;
    if (binary)
        for (double a : a_grid)
            if (a != 0.0 && a != 1.0) throw Error("binary truth levels must be 0 or 1");
    const std::size_t G = quad.size();
    if (!binary && mc_n * G > 60000000)
        throw Error("truth table too large; reduce mc_n or the quadrature grid");

    TruthTable table;
    table.dgp = spec;
    table.h = kernel.h;
    table.epsilon = indicator.epsilon;
    table.t_fixed = trim.t;
    table.gamma = trim.gamma;
    table.mc_n = mc_n;
    table.seed = seed;
    table.entries.resize(a_grid.size());

    // Oracle covariate draws and the outcome regression along them.
    auto eng = make_engine(derive_seed(seed, stream::kTruth));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> xs(mc_n), mus(mc_n), ms(mc_n);
    for (std::size_t j = 0; j < mc_n; ++j) {
        xs[j] = unif(eng);
        mus[j] = dgp_mu(xs[j]);
        ms[j] = dgp_m(xs[j]);
    }

    // pi(a0|X_j) over the integration grid (continuous only).
    std::vector<double> pi_mat;
    if (!binary) {
        pi_mat.resize(mc_n * G);
        parallel_for(mc_n, threads, [&](std::size_t j) {
            for (std::size_t g = 0; g < G; ++g)
                pi_mat[j * G + g] = normal_pdf((quad.points[g] - ms[j]) / spec.sigma_a) / spec.sigma_a;
        });
    }

    const double keep = 1.0 - trim.gamma;

    parallel_for(a_grid.size(), threads, [&](std::size_t ia) {
        const double a = a_grid[ia];
        TruthEntry& e = table.entries[ia];
        e.a = a;

        std::vector<double> num_j(mc_n), den_j(mc_n);
        if (!binary) {
            std::vector<double> kvec(G);
            double ksum = 0.0;
            for (std::size_t g = 0; g < G; ++g) {
                kvec[g] = quad.weights[g] * kernel_weight(quad.points[g] - a, kernel);
                ksum += kvec[g];
            }

            // Smoothed trimmed mass per draw at threshold t.
            auto fill_mass = [&](double t, std::vector<double>& w) {
                for (std::size_t j = 0; j < mc_n; ++j) {
                    const double* row = pi_mat.data() + j * G;
                    double acc = 0.0;
                    for (std::size_t g = 0; g < G; ++g)
                        acc += kvec[g] * smooth_indicator(row[g], t, indicator);
                    w[j] = acc;
                }
            };

            {
                std::vector<double> sate_j(mc_n);
                for (std::size_t j = 0; j < mc_n; ++j) sate_j[j] = ksum * mus[j];
                const MeanSe s = mc_mean(sate_j);
                e.sate = s.mean;
                e.sate_se = s.se;
            }

            fill_mass(trim.t, den_j);
            for (std::size_t j = 0; j < mc_n; ++j) num_j[j] = mus[j] * den_j[j];
            const MeanSe mn = mc_mean(num_j);
            const MeanSe md = mc_mean(den_j);
            const MeanSe mr = mc_ratio(num_j, den_j);
            e.num = mn.mean;
            e.num_se = mn.se;
            e.den = md.mean;
            e.den_se = md.se;
            e.state = mr.mean;
            e.state_se = mr.se;

            // Hard-indicator estimands need pi at the evaluation level itself.
            std::vector<double> pi_a(mc_n);
            for (std::size_t j = 0; j < mc_n; ++j)
                pi_a[j] = normal_pdf((a - ms[j]) / spec.sigma_a) / spec.sigma_a;
            {
                std::vector<double> hn(mc_n), hd(mc_n);
                for (std::size_t j = 0; j < mc_n; ++j) {
                    hd[j] = pi_a[j] > trim.t ? 1.0 : 0.0;
                    hn[j] = mus[j] * hd[j];
                }
                const MeanSe ht = mc_ratio(hn, hd);
                e.tate = ht.mean;
                e.tate_se = ht.se;
            }

            // Root of den(a; t) = 1 - gamma by bisection (den decreases in t).
            std::vector<double> w(mc_n);
            auto mass_at = [&](double t) {
                fill_mass(t, w);
                double s = 0.0;
                for (double v : w) s += v;
                return s / static_cast<double>(mc_n);
            };
            double lo = trim.t_min, hi = trim.t_max;
            const double f_lo = mass_at(lo) - keep;
            const double f_hi = mass_at(hi) - keep;
            if (f_lo >= 0.0 && f_hi <= 0.0) {
                for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (mass_at(mid) - keep >= 0.0)
                        lo = mid;
                    else
                        hi = mid;
                }
                e.t0 = 0.5 * (lo + hi);
                e.t0_defined = true;
                fill_mass(e.t0, w);
                std::vector<double> n0(mc_n);
                for (std::size_t j = 0; j < mc_n; ++j) n0[j] = mus[j] * w[j];
                const MeanSe m0 = mc_mean(n0);
                const MeanSe r0 = mc_ratio(n0, w);
                e.num_t0 = m0.mean;
                e.num_t0_se = m0.se;
                e.state_t0 = r0.mean;
                e.state_t0_se = r0.se;
            } else {
                e.t0 = nan_v();
                e.num_t0 = e.state_t0 = nan_v();
                e.num_t0_se = e.state_t0_se = nan_v();
            }

            e.t0_pi = order_quantile(pi_a, trim.gamma);
            {
                std::vector<double> hn(mc_n), hd(mc_n);
                for (std::size_t j = 0; j < mc_n; ++j) {
                    hd[j] = pi_a[j] > e.t0_pi ? 1.0 : 0.0;
                    hn[j] = mus[j] * hd[j];
                }
                const MeanSe ht = mc_ratio(hn, hd);
                e.tate_t0pi = ht.mean;
                e.tate_t0pi_se = ht.se;
            }
        } else {
            std::vector<double> pi_a(mc_n);
            for (std::size_t j = 0; j < mc_n; ++j) pi_a[j] = a == 1.0 ? ms[j] : 1.0 - ms[j];

            const MeanSe s = mc_mean(mus);
            e.sate = s.mean;
            e.sate_se = s.se;

            for (std::size_t j = 0; j < mc_n; ++j) {
                den_j[j] = smooth_indicator(pi_a[j], trim.t, indicator);
                num_j[j] = mus[j] * den_j[j];
            }
            const MeanSe mn = mc_mean(num_j);
            const MeanSe md = mc_mean(den_j);
            const MeanSe mr = mc_ratio(num_j, den_j);
            e.num = mn.mean;
            e.num_se = mn.se;
            e.den = md.mean;
            e.den_se = md.se;
            e.state = mr.mean;
            e.state_se = mr.se;

            {
                // The discrete trimmed population keeps pi >= t.
                std::vector<double> hn(mc_n), hd(mc_n);
                for (std::size_t j = 0; j < mc_n; ++j) {
                    hd[j] = pi_a[j] >= trim.t ? 1.0 : 0.0;
                    hn[j] = mus[j] * hd[j];
                }
                const MeanSe ht = mc_ratio(hn, hd);
                e.tate = ht.mean;
                e.tate_se = ht.se;
            }

            std::vector<double> w(mc_n);
            auto mass_at = [&](double t) {
                double s2 = 0.0;
                for (std::size_t j = 0; j < mc_n; ++j) {
                    w[j] = smooth_indicator(pi_a[j], t, indicator);
                    s2 += w[j];
                }
                return s2 / static_cast<double>(mc_n);
            };
            double lo = trim.t_min, hi = trim.t_max;
            const double f_lo = mass_at(lo) - keep;
            const double f_hi = mass_at(hi) - keep;
            if (f_lo >= 0.0 && f_hi <= 0.0) {
                for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (mass_at(mid) - keep >= 0.0)
                        lo = mid;
                    else
                        hi = mid;
                }
                e.t0 = 0.5 * (lo + hi);
                e.t0_defined = true;
                mass_at(e.t0);
                std::vector<double> n0(mc_n);
                for (std::size_t j = 0; j < mc_n; ++j) n0[j] = mus[j] * w[j];
                const MeanSe m0 = mc_mean(n0);
                const MeanSe r0 = mc_ratio(n0, w);
                e.num_t0 = m0.mean;
                e.num_t0_se = m0.se;
                e.state_t0 = r0.mean;
                e.state_t0_se = r0.se;
            } else {
                e.t0 = nan_v();
                e.num_t0 = e.state_t0 = nan_v();
                e.num_t0_se = e.state_t0_se = nan_v();
            }

            e.t0_pi = order_quantile(pi_a, trim.gamma);
            {
                std::vector<double> hn(mc_n), hd(mc_n);
                for (std::size_t j = 0; j < mc_n; ++j) {
                    hd[j] = pi_a[j] >= e.t0_pi ? 1.0 : 0.0;
                    hn[j] = mus[j] * hd[j];
                }
                const MeanSe ht = mc_ratio(hn, hd);
                e.tate_t0pi = ht.mean;
                e.tate_t0pi_se = ht.se;
            }
        }
    });

    // Marginal treatment weights from a larger independent draw.
    const std::size_t p_draws = 10 * mc_n;
    auto weng = make_engine(derive_seed(seed, stream::kWeighting));
    std::vector<double> wm(p_draws);
    for (std::size_t d = 0; d < p_draws; ++d) wm[d] = dgp_m(unif(weng));
    std::vector<double> p_raw(a_grid.size(), 0.0);
    parallel_for(a_grid.size(), threads, [&](std::size_t ia) {
        const double a = a_grid[ia];
        double acc = 0.0;
        if (!binary) {
            for (double m : wm) acc += normal_pdf((a - m) / spec.sigma_a) / spec.sigma_a;
        } else {
            for (double m : wm) acc += a == 1.0 ? m : 1.0 - m;
        }
        p_raw[ia] = acc / static_cast<double>(p_draws);
    });
    double p_sum = 0.0;
    for (double p : p_raw) p_sum += p;
    if (!(p_sum > 0.0)) throw Error("degenerate marginal treatment weights");
    for (std::size_t ia = 0; ia < a_grid.size(); ++ia) table.entries[ia].p_a = p_raw[ia] / p_sum;

    return table;
}

// --- truth cache ------------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string truth_cache_key(const DgpSpec& spec, const KernelConfig& kernel,
                            const IndicatorConfig& indicator, const TrimSpec& trim,
                            std::span<const double> a_grid, const QuadratureGrid& quad,
                            std::size_t mc_n, std::uint64_t seed) {
    std::string key = kTruthCacheVersion;
    key += "|dgp=";
    key += dgp_name(spec.id);
    key += "|sa=" + g17(spec.sigma_a) + "|sy=" + g17(spec.sigma_y);
    key += "|h=" + g17(kernel.h) + "|eps=" + g17(indicator.epsilon);
    key += "|t=" + g17(trim.t) + "|gamma=" + g17(trim.gamma);
    key += "|trange=" + g17(trim.t_min) + ":" + g17(trim.t_max);
    key += "|mc=" + std::to_string(mc_n) + "|seed=" + std::to_string(seed);
    key += "|agrid=";
    for (double a : a_grid) {
        key += g17(a);
        key += ',';
    }
    key += "|quad=";
    std::uint64_t h = 1469598103934665603ULL;
    h = fnv1a(h, quad.points.data(), quad.points.size() * sizeof(double));
    h = fnv1a(h, quad.weights.data(), quad.weights.size() * sizeof(double));
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%zu:%016llx", quad.size(),
                  static_cast<unsigned long long>(h));
    key += buf;
    return key;
}

std::string cache_file_name(const std::string& key) {
    const std::uint64_t h = fnv1a(1469598103934665603ULL, key.data(), key.size());
    char buf[40];
    std::snprintf(buf, sizeof(buf), "truth_%016llx.json", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json entry_to_json(const TruthEntry& e) {
    return nlohmann::json{{"a", e.a},
                          {"p_a", e.p_a},
                          {"sate", e.sate},
                          {"sate_se", e.sate_se},
                          {"num", e.num},
                          {"num_se", e.num_se},
                          {"den", e.den},
                          {"den_se", e.den_se},
                          {"state", e.state},
                          {"state_se", e.state_se},
                          {"tate", e.tate},
                          {"tate_se", e.tate_se},
                          {"t0", e.t0},
                          {"t0_defined", e.t0_defined},
                          {"num_t0", e.num_t0},
                          {"num_t0_se", e.num_t0_se},
                          {"state_t0", e.state_t0},
                          {"state_t0_se", e.state_t0_se},
                          {"t0_pi", e.t0_pi},
                          {"tate_t0pi", e.tate_t0pi},
                          {"tate_t0pi_se", e.tate_t0pi_se}};
}

// dump() writes non-finite doubles as null; read them back as NaN.
double jd(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? nan_v() : v.get<double>();
}

TruthEntry entry_from_json(const nlohmann::json& j) {
    TruthEntry e;
    e.a = jd(j, "a");
    e.p_a = jd(j, "p_a");
    e.sate = jd(j, "sate");
    e.sate_se = jd(j, "sate_se");
    e.num = jd(j, "num");
    e.num_se = jd(j, "num_se");
    e.den = jd(j, "den");
    e.den_se = jd(j, "den_se");
    e.state = jd(j, "state");
    e.state_se = jd(j, "state_se");
    e.tate = jd(j, "tate");
    e.tate_se = jd(j, "tate_se");
    e.t0 = jd(j, "t0");
    e.t0_defined = j.at("t0_defined").get<bool>();
    e.num_t0 = jd(j, "num_t0");
    e.num_t0_se = jd(j, "num_t0_se");
    e.state_t0 = jd(j, "state_t0");
    e.state_t0_se = jd(j, "state_t0_se");
    e.t0_pi = jd(j, "t0_pi");
    e.tate_t0pi = jd(j, "tate_t0pi");
    e.tate_t0pi_se = jd(j, "tate_t0pi_se");
    return e;
}

} // namespace

TruthTable compute_truth_cached(const DgpSpec& spec, const KernelConfig& kernel,
                                const IndicatorConfig& indicator, const TrimSpec& trim,
                                std::span<const double> a_grid, const QuadratureGrid& quad,
                                std::size_t mc_n, std::uint64_t seed, unsigned threads,
                                const std::string& cache_dir) {
    if (cache_dir.empty())
        return compute_truth(spec, kernel, indicator, trim, a_grid, quad, mc_n, seed, threads);

    const std::string key = truth_cache_key(spec, kernel, indicator, trim, a_grid, quad, mc_n, seed);
    const std::filesystem::path path = std::filesystem::path(cache_dir) / cache_file_name(key);

    if (std::filesystem::exists(path)) {
        try {
            std::ifstream in(path);
            const nlohmann::json j = nlohmann::json::parse(in, nullptr, true, true);
            if (j.at("key").get<std::string>() == key) {
                TruthTable table;
                table.dgp = spec;
                table.h = kernel.h;
                table.epsilon = indicator.epsilon;
                table.t_fixed = trim.t;
                table.gamma = trim.gamma;
                table.mc_n = mc_n;
                table.seed = seed;
                for (const auto& je : j.at("entries")) table.entries.push_back(entry_from_json(je));
                if (table.entries.size() == a_grid.size()) return table;
            }
        } catch (...) {
            // fall through to recompute
        }
    }

    TruthTable table = compute_truth(spec, kernel, indicator, trim, a_grid, quad, mc_n, seed, threads);
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    nlohmann::json j;
    j["key"] = key;
    j["entries"] = nlohmann::json::array();
    for (const TruthEntry& e : table.entries) j["entries"].push_back(entry_to_json(e));
    std::ofstream out(path);
    if (out) out << j.dump(1);
    return table;
}

// --- experiment runner ---------------------------------------------------------

namespace {

struct RepCell {
    double est = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool ok = false;
    bool has_ci = false;
};

double estimator_target(EstimatorId id, const TruthEntry& e, TrimSpec::Mode mode) {
    switch (id) {
    case EstimatorId::SateDr: return e.sate;
    case EstimatorId::PluginTrim:
    case EstimatorId::EifPluginTrim:
        return mode == TrimSpec::Mode::FixedT ? e.tate : e.tate_t0pi;
    case EstimatorId::StateDr: return e.state;
    case EstimatorId::StateDrEstT: return e.state_t0;
    case EstimatorId::BinaryState:
        return mode == TrimSpec::Mode::FixedT ? e.state : e.state_t0;
    }
    return nan_v();
}

std::vector<EstimatorId> default_estimators(DgpId id, TrimSpec::Mode mode) {
    if (id == DgpId::Binary)
        return {EstimatorId::SateDr, EstimatorId::PluginTrim, EstimatorId::EifPluginTrim,
                EstimatorId::BinaryState};
    if (mode == TrimSpec::Mode::FixedT)
        return {EstimatorId::SateDr, EstimatorId::PluginTrim, EstimatorId::EifPluginTrim,
                EstimatorId::StateDr};
    return {EstimatorId::SateDr, EstimatorId::PluginTrim, EstimatorId::EifPluginTrim,
            EstimatorId::StateDrEstT};
}

RepCell to_cell(const EstimateReport& r) {
    RepCell c;
    c.est = r.psi_hat;
    c.lo = r.ci_lo;
    c.hi = r.ci_hi;
    c.ok = r.status.empty() && std::isfinite(r.psi_hat);
    c.has_ci = r.ci_defined && std::isfinite(r.ci_lo) && std::isfinite(r.ci_hi);
    return c;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    if (cfg.reps < 1) throw Error("experiment needs at least one replication");
    if (cfg.alphas.empty()) throw Error("experiment needs at least one rate alpha");
    const bool binary = cfg.dgp.id == DgpId::Binary;
    if (cfg.a_grid.empty())
        cfg.a_grid = binary ? std::vector<double>{1.0} : uniform_points(0.0, 1.0, 0.05);
    if (binary)
        for (double a : cfg.a_grid)
            if (a != 1.0) throw Error("binary experiments evaluate at level 1 only");
    if (cfg.estimators.empty()) cfg.estimators = default_estimators(cfg.dgp.id, cfg.trim.mode);
    for (EstimatorId id : cfg.estimators) {
        if (binary && (id == EstimatorId::StateDr || id == EstimatorId::StateDrEstT))
            throw Error("continuous-treatment estimator in a binary experiment");
        if (!binary && id == EstimatorId::BinaryState)
            throw Error("binary estimator in a continuous experiment");
    }
    const unsigned threads = resolve_threads(cfg.threads);

    // Shared grid anchored to the design's nominal support, not per-sample
    // ranges, so every replication sees identical tables.
    const QuadratureGrid quad = binary ? QuadratureGrid::uniform(0.0, 1.0, 1.0)
                                       : QuadratureGrid::default_for(0.0, 1.0, cfg.kernel.h);

    ExperimentResult result;
    result.truth = compute_truth_cached(cfg.dgp, cfg.kernel, cfg.indicator, cfg.trim, cfg.a_grid,
                                        quad, cfg.truth_mc_n, cfg.seed, threads, cfg.cache_dir);
    for (const TruthEntry& e : result.truth.entries)
        for (EstimatorId id : cfg.estimators)
            if (!std::isfinite(estimator_target(id, e, cfg.trim.mode)))
                throw Error("estimator target undefined at level " + std::to_string(e.a));

    const std::size_t E = cfg.estimators.size();
    const std::size_t A = cfg.a_grid.size();
    const auto true_model = make_true_model(cfg.dgp);

    std::vector<MetricsRow> rows(E * cfg.alphas.size());
    std::vector<CellRow> cells(E * cfg.alphas.size() * A);

    for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
        const double alpha = cfg.alphas[ai];
        const std::uint64_t alpha_seed = derive_seed(cfg.seed, stream::kReplication, ai);
        std::vector<RepCell> grid_cells(cfg.reps * E * A);

        parallel_for(cfg.reps, threads, [&](std::size_t rep) {
            const std::uint64_t rep_seed = derive_seed(alpha_seed, stream::kReplication, rep);
            const Dataset data = generate_dataset(cfg.dgp, rep_seed);
            std::shared_ptr<const NuisanceModel> model;
            if (cfg.true_nuisances) {
                model = true_model;
            } else if (binary) {
                model = std::make_shared<NoisyBinaryModel>(
                    true_model, data, SyntheticNoiseSpec{alpha, cfg.dgp.n, rep_seed});
            } else {
                model = std::make_shared<NoisyModel>(
                    true_model, data, quad.points, SyntheticNoiseSpec{alpha, cfg.dgp.n, rep_seed});
            }

            RepCell* out = grid_cells.data() + rep * E * A;
            if (!binary) {
                const std::vector<EstimateReport> reports =
                    estimate_curve(data, *model, cfg.estimators, cfg.a_grid, cfg.kernel,
                                   cfg.indicator, quad, cfg.trim, cfg.conf, 1);
                for (std::size_t ia = 0; ia < A; ++ia)
                    for (std::size_t ie = 0; ie < E; ++ie)
                        out[ie * A + ia] = to_cell(reports[ia * E + ie]);
            } else {
                for (std::size_t ie = 0; ie < E; ++ie) {
                    EstimateReport r;
                    try {
                        switch (cfg.estimators[ie]) {
                        case EstimatorId::SateDr:
                            r = estimate_binary_dr(data, *model, cfg.conf);
                            break;
                        case EstimatorId::PluginTrim: {
                            const double t = cfg.trim.mode == TrimSpec::Mode::FixedT
                                                 ? cfg.trim.t
                                                 : binary_quantile_threshold(data, *model,
                                                                             cfg.trim.gamma);
                            r = estimate_binary_plugin_trim(data, *model, t, cfg.conf);
                            break;
                        }
                        case EstimatorId::EifPluginTrim: {
                            const double t = cfg.trim.mode == TrimSpec::Mode::FixedT
                                                 ? cfg.trim.t
                                                 : binary_quantile_threshold(data, *model,
                                                                             cfg.trim.gamma);
                            r = estimate_binary_eif_plugin_trim(data, *model, t, cfg.conf);
                            break;
                        }
                        default:
                            r = estimate_binary_state(data, *model, cfg.indicator, cfg.trim,
                                                      cfg.conf);
                            break;
                        }
                    } catch (const Error& err) {
                        r = EstimateReport{};
                        r.status = err.what();
                    }
                    out[ie * A] = to_cell(r);
                }
            }
        });

        for (std::size_t ie = 0; ie < E; ++ie) {
            MetricsRow& row = rows[ie * cfg.alphas.size() + ai];
            row.estimator = cfg.estimators[ie];
            row.alpha = alpha;
            row.n = cfg.dgp.n;
            row.reps = cfg.reps;
            double rmse_acc = 0.0, cover_acc = 0.0, width_acc = 0.0;
            bool any_ci = false;
            std::size_t failed = 0;
            for (std::size_t ia = 0; ia < A; ++ia) {
                const TruthEntry& te = result.truth.entries[ia];
                const double target = estimator_target(cfg.estimators[ie], te, cfg.trim.mode);
                double se_acc = 0.0, est_acc = 0.0, cov = 0.0, wid = 0.0;
                std::size_t n_ok = 0, n_ci = 0;
                for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
                    const RepCell& c = grid_cells[rep * E * A + ie * A + ia];
                    if (!c.ok) {
                        ++failed;
                        continue;
                    }
                    ++n_ok;
                    est_acc += c.est;
                    se_acc += (c.est - target) * (c.est - target);
                    if (c.has_ci) {
                        ++n_ci;
                        cov += (target >= c.lo && target <= c.hi) ? 1.0 : 0.0;
                        wid += c.hi - c.lo;
                    }
                }
                CellRow& cell = cells[(ie * cfg.alphas.size() + ai) * A + ia];
                cell.estimator = cfg.estimators[ie];
                cell.alpha = alpha;
                cell.a = te.a;
                cell.target = target;
                cell.n_ok = n_ok;
                cell.n_failed = cfg.reps - n_ok;
                cell.mean_est = n_ok ? est_acc / static_cast<double>(n_ok) : nan_v();
                cell.rmse = n_ok ? std::sqrt(se_acc / static_cast<double>(n_ok)) : nan_v();
                cell.coverage = n_ci ? cov / static_cast<double>(n_ci) : nan_v();
                cell.mean_ci_width = n_ci ? wid / static_cast<double>(n_ci) : nan_v();
                rmse_acc += te.p_a * cell.rmse;
                if (n_ci) any_ci = true;
                cover_acc += te.p_a * cell.coverage;
                width_acc += te.p_a * cell.mean_ci_width;
            }
            row.rmse = rmse_acc;
            row.coverage = any_ci ? cover_acc : nan_v();
            row.mean_ci_width = any_ci ? width_acc : nan_v();
            row.n_failed = failed;
        }
    }

    result.config = cfg;
    result.rows = std::move(rows);
    result.cells = std::move(cells);
    return result;
}

} // namespace trimcurve
