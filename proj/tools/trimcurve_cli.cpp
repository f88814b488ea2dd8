// Command-line front end: estimate curves from a CSV, run simulation
// experiments, and sweep smoothing parameters.  Every run writes
// run_manifest.json with the fully resolved configuration; --config supplies
// defaults from a JSON file and explicit flags override it.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trimcurve/errors.hpp"
#include "trimcurve/estimators.hpp"
#include "trimcurve/nuisance.hpp"
#include "trimcurve/parallel.hpp"
#include "trimcurve/report_io.hpp"
#include "trimcurve/rng.hpp"
#include "trimcurve/simlab.hpp"
#include "trimcurve/tuning.hpp"

namespace tc = trimcurve;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const std::string& tok : split(s, ',')) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw tc::Error("bad numeric list element: " + tok);
        out.push_back(v);
    }
    if (out.empty()) throw tc::Error("empty numeric list: " + s);
    return out;
}

// "lo:hi:step" or a comma-separated list of levels.
std::vector<double> parse_grid(const std::string& s) {
    if (s.find(':') == std::string::npos) return parse_doubles(s);
    const std::vector<std::string> parts = split(s, ':');
    if (parts.size() != 3) throw tc::Error("grid must be lo:hi:step or a comma list");
    return tc::uniform_points(std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2]));
}

std::vector<tc::EstimatorId> parse_estimators(const std::string& s) {
    std::vector<tc::EstimatorId> out;
    for (const std::string& tok : split(s, ',')) {
        if (tok.empty()) continue;
        const auto id = tc::estimator_from_name(tok);
        if (!id) throw tc::Error("unknown estimator: " + tok);
        out.push_back(*id);
    }
    if (out.empty()) throw tc::Error("empty estimator list");
    return out;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw tc::Error("cannot read config file: " + path);
    return json::parse(in, nullptr, true, true);
}

// Fill a value from the config file unless the flag was given explicitly.
template <typename T>
void merge(const CLI::App* cmd, const std::string& flag, const json& cfg, const char* key, T& var) {
    if (cmd->count(flag) > 0) return;
    if (cfg.contains(key)) var = cfg.at(key).get<T>();
}

std::string out_path(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
    if (dir.empty()) throw tc::Error("--out directory is required");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec && !std::filesystem::is_directory(dir))
        throw tc::Error("cannot create output directory: " + dir);
}

std::string default_cache_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("TRIMCURVE_CACHE")) return env;
    return {};
}

double column_sd(const tc::Dataset& data, std::ptrdiff_t covariate) {
    // covariate < 0 selects the treatment column.
    std::vector<double> v(data.size()), w(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        v[i] = covariate < 0 ? data.records[i].a
                             : data.records[i].x[static_cast<std::size_t>(covariate)];
        w[i] = data.records[i].w;
    }
    return std::sqrt(tc::weighted_var(v, w));
}

// Rule-of-thumb bandwidth; zero or negative requests resolve to it.
double auto_bandwidth(const tc::Dataset& data, std::ptrdiff_t covariate) {
    const double sd = column_sd(data, covariate);
    const double bw = 1.06 * sd * std::pow(static_cast<double>(data.size()), -0.2);
    return bw > 0.0 ? bw : 0.1;
}

void write_manifest(const std::string& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs, const json& extra = json::object()) {
    json m;
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = config;
    m["outputs"] = outputs;
    if (!extra.empty()) m["results"] = extra;
    std::ofstream out(out_path(dir, "run_manifest.json"));
    if (!out) throw tc::Error("cannot write run_manifest.json");
    out << m.dump(1) << '\n';
    out.flush();
    if (!out.good()) throw tc::Error("write failed: run_manifest.json");
}

// Shared smoothing/trim options for all subcommands.
struct CommonOpts {
    double h = 0.1;
    double epsilon = 0.01;
    std::string trim_mode = "fixed";
    double trim_t = 0.1;
    double trim_gamma = 0.2;
    double conf = 0.95;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out_dir;
    std::string config_path;
    std::string a_grid_spec;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->set_help_flag("--help", "print help");  // frees -h for the bandwidth flag
    cmd->add_option("--config", o.config_path, "JSON config file; flags override its keys");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "master RNG seed");
    cmd->add_option("--threads", o.threads, "worker threads (0 = hardware)");
    cmd->add_option("--h", o.h, "kernel bandwidth");
    cmd->add_option("--epsilon", o.epsilon, "trimming indicator scale");
    cmd->add_option("--trim-mode", o.trim_mode, "fixed | quantile");
    cmd->add_option("--trim-t", o.trim_t, "fixed trimming threshold");
    cmd->add_option("--trim-gamma", o.trim_gamma, "trimmed-mass share for quantile mode");
    cmd->add_option("--conf", o.conf, "confidence level");
    cmd->add_option("--a-grid", o.a_grid_spec, "lo:hi:step or comma list of levels");
}

void merge_common(const CLI::App* cmd, const json& cfg, CommonOpts& o) {
    merge(cmd, "--out", cfg, "out", o.out_dir);
    merge(cmd, "--seed", cfg, "seed", o.seed);
    merge(cmd, "--threads", cfg, "threads", o.threads);
    merge(cmd, "--h", cfg, "h", o.h);
    merge(cmd, "--epsilon", cfg, "epsilon", o.epsilon);
    merge(cmd, "--trim-mode", cfg, "trim_mode", o.trim_mode);
    merge(cmd, "--trim-t", cfg, "trim_t", o.trim_t);
    merge(cmd, "--trim-gamma", cfg, "trim_gamma", o.trim_gamma);
    merge(cmd, "--conf", cfg, "conf", o.conf);
    merge(cmd, "--a-grid", cfg, "a_grid", o.a_grid_spec);
}

tc::TrimSpec make_trim(const CommonOpts& o) {
    tc::TrimSpec trim;
    if (o.trim_mode == "fixed")
        trim.mode = tc::TrimSpec::Mode::FixedT;
    else if (o.trim_mode == "quantile")
        trim.mode = tc::TrimSpec::Mode::Quantile;
    else
        throw tc::Error("trim-mode must be fixed or quantile");
    trim.t = o.trim_t;
    trim.gamma = o.trim_gamma;
    return trim;
}

json common_json(const CommonOpts& o, const std::vector<double>& a_grid) {
    json j;
    j["out"] = o.out_dir;
    j["seed"] = o.seed;
    j["threads"] = o.threads;
    j["h"] = o.h;
    j["epsilon"] = o.epsilon;
    j["trim_mode"] = o.trim_mode;
    j["trim_t"] = o.trim_t;
    j["trim_gamma"] = o.trim_gamma;
    j["conf"] = o.conf;
    j["a_grid"] = a_grid;
    return j;
}

// --- estimate ----------------------------------------------------------------

struct EstimateOpts {
    CommonOpts common;
    std::string input;
    std::string estimators_spec = "sate_dr,state_dr";
    std::size_t k_folds = 0;
    std::size_t profile_covariate = 0;
    double ps_bw_mean = 0.0;
    double ps_bw_var = 0.0;
    double mu_bw_x = 0.0;
    double mu_bw_a = 0.0;
};

int cmd_estimate(EstimateOpts& o, const CLI::App* cmd) {
    const json cfg = load_config(o.common.config_path);
    merge_common(cmd, cfg, o.common);
    merge(cmd, "--input", cfg, "input", o.input);
    merge(cmd, "--estimators", cfg, "estimators", o.estimators_spec);
    merge(cmd, "--k-folds", cfg, "k_folds", o.k_folds);
    merge(cmd, "--profile-covariate", cfg, "profile_covariate", o.profile_covariate);
    merge(cmd, "--ps-bw-mean", cfg, "ps_bw_mean", o.ps_bw_mean);
    merge(cmd, "--ps-bw-var", cfg, "ps_bw_var", o.ps_bw_var);
    merge(cmd, "--mu-bw-x", cfg, "mu_bw_x", o.mu_bw_x);
    merge(cmd, "--mu-bw-a", cfg, "mu_bw_a", o.mu_bw_a);

    if (o.input.empty()) throw tc::Error("estimate needs --input");
    ensure_out_dir(o.common.out_dir);
    const tc::Dataset data = tc::read_csv_file(o.input);
    data.validate();

    std::vector<double> a_grid;
    if (!o.common.a_grid_spec.empty()) {
        a_grid = parse_grid(o.common.a_grid_spec);
    } else {
        // Ten levels between the 5% and 95% treatment quantiles.
        std::vector<double> av(data.size()), w(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            av[i] = data.records[i].a;
            w[i] = data.records[i].w;
        }
        const double lo = tc::weighted_quantile(av, w, 0.05);
        const double hi = tc::weighted_quantile(av, w, 0.95);
        for (int i = 0; i < 10; ++i)
            a_grid.push_back(lo + (hi - lo) * static_cast<double>(i) / 9.0);
    }

    const std::vector<tc::EstimatorId> estimators = parse_estimators(o.estimators_spec);
    const tc::TrimSpec trim = make_trim(o.common);
    const tc::KernelConfig kernel{o.common.h};
    const tc::IndicatorConfig indicator{o.common.epsilon};
    const tc::QuadratureGrid quad = tc::QuadratureGrid::default_for(data.a_min(), data.a_max(), kernel.h);

    const double bw_mean = o.ps_bw_mean > 0.0 ? o.ps_bw_mean : auto_bandwidth(data, 0);
    const double bw_var = o.ps_bw_var > 0.0 ? o.ps_bw_var : bw_mean;
    const double bw_x = o.mu_bw_x > 0.0 ? o.mu_bw_x : bw_mean;
    const double bw_a = o.mu_bw_a > 0.0 ? o.mu_bw_a : auto_bandwidth(data, -1);

    const tc::FitRecipe recipe = [=](const tc::Dataset& train) {
        return tc::compose_models(tc::fit_conditional_gaussian_ps(train, bw_mean, bw_var),
                                  tc::fit_outcome_regression(train, bw_x, bw_a));
    };

    std::shared_ptr<const tc::NuisanceModel> model;
    if (o.k_folds >= 2) {
        const tc::CrossfitPlan plan = tc::CrossfitPlan::make(data.size(), o.k_folds, o.common.seed);
        model = tc::make_crossfit_model(data, plan, recipe);
    } else {
        model = recipe(data);
    }

    const std::vector<tc::EstimateReport> curve =
        tc::estimate_curve(data, *model, estimators, a_grid, kernel, indicator, quad, trim,
                           o.common.conf, tc::resolve_threads(o.common.threads));
    const std::vector<tc::ProfileRow> profile = tc::trimmed_population_profile(
        data, *model, kernel, indicator, trim.t, o.profile_covariate, a_grid);

    tc::write_curve_csv_file(out_path(o.common.out_dir, "curve.csv"), curve);
    tc::write_profile_csv_file(out_path(o.common.out_dir, "profile.csv"), profile);

    json jc = common_json(o.common, a_grid);
    jc["input"] = o.input;
    jc["estimators"] = o.estimators_spec;
    jc["k_folds"] = o.k_folds;
    jc["profile_covariate"] = o.profile_covariate;
    jc["ps_bw_mean"] = bw_mean;
    jc["ps_bw_var"] = bw_var;
    jc["mu_bw_x"] = bw_x;
    jc["mu_bw_a"] = bw_a;
    std::size_t n_errors = 0;
    for (const auto& r : curve)
        if (!r.status.empty()) ++n_errors;
    write_manifest(o.common.out_dir, "estimate", jc, {"curve.csv", "profile.csv"},
                   json{{"n_rows", curve.size()}, {"n_point_errors", n_errors}});
    return 0;
}

// --- simulate ----------------------------------------------------------------

struct SimulateOpts {
    CommonOpts common;
    std::string dgp = "continuous";
    std::size_t n = 1000;
    std::size_t reps = 200;
    std::string alphas_spec = "0.1,0.3,0.5";
    std::string estimators_spec;
    bool true_nuisances = false;
    bool dump_cells = false;
    std::size_t truth_mc = 100000;
    std::string cache_dir;
};

int cmd_simulate(SimulateOpts& o, const CLI::App* cmd) {
    const json cfg = load_config(o.common.config_path);
    merge_common(cmd, cfg, o.common);
    merge(cmd, "--dgp", cfg, "dgp", o.dgp);
    merge(cmd, "--n", cfg, "n", o.n);
    merge(cmd, "--reps", cfg, "reps", o.reps);
    merge(cmd, "--alphas", cfg, "alphas", o.alphas_spec);
    merge(cmd, "--estimators", cfg, "estimators", o.estimators_spec);
    merge(cmd, "--true-nuisances", cfg, "true_nuisances", o.true_nuisances);
    merge(cmd, "--dump-cells", cfg, "dump_cells", o.dump_cells);
    merge(cmd, "--truth-mc", cfg, "truth_mc", o.truth_mc);
    merge(cmd, "--cache", cfg, "cache", o.cache_dir);

    ensure_out_dir(o.common.out_dir);

    tc::ExperimentConfig ec;
    const auto dgp_id = tc::dgp_from_name(o.dgp);
    if (!dgp_id) throw tc::Error("unknown dgp: " + o.dgp);
    ec.dgp.id = *dgp_id;
    ec.dgp.n = o.n;
    ec.reps = o.reps;
    ec.alphas = parse_doubles(o.alphas_spec);
    ec.true_nuisances = o.true_nuisances;
    if (!o.estimators_spec.empty()) ec.estimators = parse_estimators(o.estimators_spec);
    if (!o.common.a_grid_spec.empty()) ec.a_grid = parse_grid(o.common.a_grid_spec);
    ec.trim = make_trim(o.common);
    ec.kernel = tc::KernelConfig{o.common.h};
    ec.indicator = tc::IndicatorConfig{o.common.epsilon};
    ec.conf = o.common.conf;
    ec.truth_mc_n = o.truth_mc;
    ec.seed = o.common.seed;
    ec.threads = o.common.threads;
    ec.cache_dir = default_cache_dir(o.cache_dir);

    const tc::ExperimentResult result = tc::run_experiment(ec);

    std::vector<std::string> outputs = {"metrics.csv"};
    tc::write_metrics_csv_file(out_path(o.common.out_dir, "metrics.csv"), result.rows);
    if (o.dump_cells) {
        tc::write_cells_csv_file(out_path(o.common.out_dir, "cells.csv"), result.cells);
        outputs.push_back("cells.csv");
    }

    json jc = common_json(o.common, result.config.a_grid);
    jc["dgp"] = o.dgp;
    jc["n"] = o.n;
    jc["reps"] = o.reps;
    jc["alphas"] = result.config.alphas;
    std::string est_names;
    for (const auto id : result.config.estimators) {
        if (!est_names.empty()) est_names += ',';
        est_names += tc::estimator_name(id);
    }
    jc["estimators"] = est_names;
    jc["true_nuisances"] = o.true_nuisances;
    jc["dump_cells"] = o.dump_cells;
    jc["truth_mc"] = o.truth_mc;
    jc["cache"] = ec.cache_dir;
    std::size_t failed = 0;
    for (const auto& row : result.rows) failed += row.n_failed;
    write_manifest(o.common.out_dir, "simulate", jc, outputs,
                   json{{"metric_rows", result.rows.size()}, {"n_failed_cells", failed}});
    return 0;
}

// --- tune ---------------------------------------------------------------------

struct TuneOpts {
    CommonOpts common;
    std::string input;
    std::string dgp;
    std::size_t n = 1000;
    double alpha = 0.0;  // 0: true nuisances for DGP data
    std::string h_candidates = "0.06,0.08,0.1,0.15,0.2,0.3,0.5";
    std::string eps_candidates = "0.1,0.01,0.001,0.0001,0.00001";
    double entropy_target = 0.05;
    double ps_bw_mean = 0.0;
    double ps_bw_var = 0.0;
    double mu_bw_x = 0.0;
    double mu_bw_a = 0.0;
};

int cmd_tune(TuneOpts& o, const CLI::App* cmd) {
    const json cfg = load_config(o.common.config_path);
    merge_common(cmd, cfg, o.common);
    merge(cmd, "--input", cfg, "input", o.input);
    merge(cmd, "--dgp", cfg, "dgp", o.dgp);
    merge(cmd, "--n", cfg, "n", o.n);
    merge(cmd, "--alpha", cfg, "alpha", o.alpha);
    merge(cmd, "--h-candidates", cfg, "h_candidates", o.h_candidates);
    merge(cmd, "--eps-candidates", cfg, "eps_candidates", o.eps_candidates);
    merge(cmd, "--entropy-target", cfg, "entropy_target", o.entropy_target);
    merge(cmd, "--ps-bw-mean", cfg, "ps_bw_mean", o.ps_bw_mean);
    merge(cmd, "--ps-bw-var", cfg, "ps_bw_var", o.ps_bw_var);
    merge(cmd, "--mu-bw-x", cfg, "mu_bw_x", o.mu_bw_x);
    merge(cmd, "--mu-bw-a", cfg, "mu_bw_a", o.mu_bw_a);

    if (o.input.empty() == o.dgp.empty())
        throw tc::Error("tune needs exactly one of --input or --dgp");
    ensure_out_dir(o.common.out_dir);

    tc::Dataset data;
    std::shared_ptr<const tc::NuisanceModel> model;
    std::vector<double> a_grid;
    if (!o.dgp.empty()) {
        const auto dgp_id = tc::dgp_from_name(o.dgp);
        if (!dgp_id) throw tc::Error("unknown dgp: " + o.dgp);
        if (*dgp_id != tc::DgpId::Continuous)
            throw tc::Error("tuning sweeps target the continuous design");
        tc::DgpSpec spec;
        spec.id = *dgp_id;
        spec.n = o.n;
        data = tc::generate_dataset(spec, o.common.seed);
        const auto truth = tc::make_true_model(spec);
        if (o.alpha > 0.0) {
            a_grid = o.common.a_grid_spec.empty() ? tc::uniform_points(0.0, 1.0, 0.05)
                                                  : parse_grid(o.common.a_grid_spec);
            model = std::make_shared<tc::NoisyModel>(
                truth, data, a_grid, tc::SyntheticNoiseSpec{o.alpha, o.n, o.common.seed});
        } else {
            model = truth;
        }
        if (a_grid.empty())
            a_grid = o.common.a_grid_spec.empty() ? tc::uniform_points(0.0, 1.0, 0.05)
                                                  : parse_grid(o.common.a_grid_spec);
    } else {
        data = tc::read_csv_file(o.input);
        data.validate();
        const double bw_mean = o.ps_bw_mean > 0.0 ? o.ps_bw_mean : auto_bandwidth(data, 0);
        const double bw_var = o.ps_bw_var > 0.0 ? o.ps_bw_var : bw_mean;
        const double bw_x = o.mu_bw_x > 0.0 ? o.mu_bw_x : bw_mean;
        const double bw_a = o.mu_bw_a > 0.0 ? o.mu_bw_a : auto_bandwidth(data, -1);
        model = tc::compose_models(tc::fit_conditional_gaussian_ps(data, bw_mean, bw_var),
                                   tc::fit_outcome_regression(data, bw_x, bw_a));
        if (!o.common.a_grid_spec.empty()) {
            a_grid = parse_grid(o.common.a_grid_spec);
        } else {
            a_grid = tc::uniform_points(data.a_min(), data.a_max(),
                                        (data.a_max() - data.a_min()) / 20.0);
        }
    }

    if (a_grid.size() < 2) throw tc::Error("tuning needs at least two grid levels");
    const double a_lo = a_grid.front();
    const double a_hi = a_grid.back();
    const double a_step = (a_hi - a_lo) / static_cast<double>(a_grid.size() - 1);

    const tc::IndicatorConfig indicator{o.common.epsilon};
    const std::vector<double> hs = parse_doubles(o.h_candidates);
    const std::vector<double> epss = parse_doubles(o.eps_candidates);

    const tc::BandwidthSelection hsel =
        tc::select_bandwidth(hs, data, *model, indicator, o.common.trim_t, a_lo, a_hi, a_step,
                             tc::resolve_threads(o.common.threads));
    const tc::EpsilonSelection esel =
        tc::select_epsilon(epss, data, *model, a_grid, o.common.trim_t, o.entropy_target);

    tc::write_risk_csv_file(out_path(o.common.out_dir, "risk_path.csv"), hsel);
    tc::write_entropy_csv_file(out_path(o.common.out_dir, "entropy_path.csv"), esel);

    json jc = common_json(o.common, a_grid);
    jc["input"] = o.input;
    jc["dgp"] = o.dgp;
    jc["n"] = o.n;
    jc["alpha"] = o.alpha;
    jc["h_candidates"] = o.h_candidates;
    jc["eps_candidates"] = o.eps_candidates;
    jc["entropy_target"] = o.entropy_target;
    write_manifest(o.common.out_dir, "tune", jc, {"risk_path.csv", "entropy_path.csv"},
                   json{{"h_star", hsel.h_star},
                        {"h_degenerate", hsel.degenerate},
                        {"epsilon_star", esel.epsilon_star},
                        {"epsilon_degenerate", esel.degenerate}});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Smoothed trimmed dose-response estimation toolkit"};
    app.require_subcommand(1);

    EstimateOpts eo;
    CLI::App* est = app.add_subcommand("estimate", "estimate curves from a dataset CSV");
    add_common(est, eo.common);
    est->add_option("--input", eo.input, "dataset CSV (x1..xp,a,y[,w])");
    est->add_option("--estimators", eo.estimators_spec, "comma list of estimator names");
    est->add_option("--k-folds", eo.k_folds, "cross-fitting folds (0/1 = none)");
    est->add_option("--profile-covariate", eo.profile_covariate, "covariate index for profile.csv");
    est->add_option("--ps-bw-mean", eo.ps_bw_mean, "propensity mean-regression bandwidth");
    est->add_option("--ps-bw-var", eo.ps_bw_var, "propensity variance-regression bandwidth");
    est->add_option("--mu-bw-x", eo.mu_bw_x, "outcome regression covariate bandwidth");
    est->add_option("--mu-bw-a", eo.mu_bw_a, "outcome regression treatment bandwidth");

    SimulateOpts so;
    CLI::App* sim = app.add_subcommand("simulate", "run a Monte Carlo experiment");
    add_common(sim, so.common);
    sim->add_option("--dgp", so.dgp, "continuous | binary");
    sim->add_option("--n", so.n, "sample size per replication");
    sim->add_option("--reps", so.reps, "replications per rate");
    sim->add_option("--alphas", so.alphas_spec, "comma list of nuisance rates");
    sim->add_option("--estimators", so.estimators_spec, "comma list of estimator names");
    sim->add_flag("--true-nuisances", so.true_nuisances, "skip the synthetic noise wrapper");
    sim->add_flag("--dump-cells", so.dump_cells, "also write per-level cells.csv");
    sim->add_option("--truth-mc", so.truth_mc, "oracle draws for the truth table");
    sim->add_option("--cache", so.cache_dir, "truth cache dir (default: $TRIMCURVE_CACHE)");

    TuneOpts to;
    CLI::App* tune = app.add_subcommand("tune", "sweep smoothing parameters");
    add_common(tune, to.common);
    tune->add_option("--input", to.input, "dataset CSV to tune on");
    tune->add_option("--dgp", to.dgp, "generate the tuning dataset from this design");
    tune->add_option("--n", to.n, "generated sample size");
    tune->add_option("--alpha", to.alpha, "synthetic nuisance rate (0 = true nuisances)");
    tune->add_option("--h-candidates", to.h_candidates, "comma list of bandwidths");
    tune->add_option("--eps-candidates", to.eps_candidates, "comma list of indicator scales");
    tune->add_option("--entropy-target", to.entropy_target, "target residual entropy");
    tune->add_option("--ps-bw-mean", to.ps_bw_mean, "propensity mean-regression bandwidth");
    tune->add_option("--ps-bw-var", to.ps_bw_var, "propensity variance-regression bandwidth");
    tune->add_option("--mu-bw-x", to.mu_bw_x, "outcome regression covariate bandwidth");
    tune->add_option("--mu-bw-a", to.mu_bw_a, "outcome regression treatment bandwidth");

    CLI11_PARSE(app, argc, argv);

    try {
        if (est->parsed()) return cmd_estimate(eo, est);
        if (sim->parsed()) return cmd_simulate(so, sim);
        if (tune->parsed()) return cmd_tune(to, tune);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
