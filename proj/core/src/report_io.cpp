#include "trimcurve/report_io.hpp"

#include <cstdio>
#include <fstream>

#include "trimcurve/errors.hpp"

namespace trimcurve {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    q += '"';
    return q;
}

template <typename Fn>
void to_file(const std::string& path, Fn&& fn) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    fn(out);
    out.flush();
    if (!out.good()) throw Error("write failed: " + path);
}

} // namespace

void write_curve_csv(std::ostream& out, std::span<const EstimateReport> reports) {
    out << "estimator,a,psi_hat,se,ci_lo,ci_hi,num,den,t_used,n_eval,"
           "se_defined,ci_defined,degenerate,status\n";
    for (const EstimateReport& r : reports) {
        out << estimator_name(r.id) << ',' << format_g17(r.a) << ',' << format_g17(r.psi_hat)
            << ',' << format_g17(r.se) << ',' << format_g17(r.ci_lo) << ','
            << format_g17(r.ci_hi) << ',' << format_g17(r.num) << ',' << format_g17(r.den) << ','
            << format_g17(r.t_used) << ',' << r.n_eval << ',' << (r.se_defined ? 1 : 0) << ','
            << (r.ci_defined ? 1 : 0) << ',' << (r.degenerate ? 1 : 0) << ','
            << csv_quote(r.status) << '\n';
    }
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
    out << "estimator,alpha,n,reps,rmse,coverage,mean_ci_width,n_failed\n";
    for (const MetricsRow& r : rows) {
        out << estimator_name(r.estimator) << ',' << format_g17(r.alpha) << ',' << r.n << ','
            << r.reps << ',' << format_g17(r.rmse) << ',' << format_g17(r.coverage) << ','
            << format_g17(r.mean_ci_width) << ',' << r.n_failed << '\n';
    }
}

void write_cells_csv(std::ostream& out, std::span<const CellRow> cells) {
    out << "estimator,alpha,a,target,mean_est,rmse,coverage,mean_ci_width,n_ok,n_failed\n";
    for (const CellRow& c : cells) {
        out << estimator_name(c.estimator) << ',' << format_g17(c.alpha) << ',' << format_g17(c.a)
            << ',' << format_g17(c.target) << ',' << format_g17(c.mean_est) << ','
            << format_g17(c.rmse) << ',' << format_g17(c.coverage) << ','
            << format_g17(c.mean_ci_width) << ',' << c.n_ok << ',' << c.n_failed << '\n';
    }
}

void write_profile_csv(std::ostream& out, std::span<const ProfileRow> rows) {
    out << "a,covariate,mean_all,mean_trimmed,all_defined,trimmed_defined\n";
    for (const ProfileRow& r : rows) {
        out << format_g17(r.a) << ',' << r.covariate << ',' << format_g17(r.mean_all) << ','
            << format_g17(r.mean_trimmed) << ',' << (r.all_defined ? 1 : 0) << ','
            << (r.trimmed_defined ? 1 : 0) << '\n';
    }
}

void write_risk_csv(std::ostream& out, const BandwidthSelection& sel) {
    out << "h,risk,selected\n";
    for (const RiskPoint& p : sel.path)
        out << format_g17(p.h) << ',' << format_g17(p.risk) << ','
            << (p.h == sel.h_star ? 1 : 0) << '\n';
}

void write_entropy_csv(std::ostream& out, const EpsilonSelection& sel) {
    out << "epsilon,entropy,selected\n";
    for (const EntropyPoint& p : sel.path)
        out << format_g17(p.epsilon) << ',' << format_g17(p.entropy) << ','
            << (p.epsilon == sel.epsilon_star ? 1 : 0) << '\n';
}

void write_curve_csv_file(const std::string& path, std::span<const EstimateReport> reports) {
    to_file(path, [&](std::ostream& out) { write_curve_csv(out, reports); });
}
void write_metrics_csv_file(const std::string& path, std::span<const MetricsRow> rows) {
    to_file(path, [&](std::ostream& out) { write_metrics_csv(out, rows); });
}
void write_cells_csv_file(const std::string& path, std::span<const CellRow> cells) {
    to_file(path, [&](std::ostream& out) { write_cells_csv(out, cells); });
}
void write_profile_csv_file(const std::string& path, std::span<const ProfileRow> rows) {
    to_file(path, [&](std::ostream& out) { write_profile_csv(out, rows); });
}
void write_risk_csv_file(const std::string& path, const BandwidthSelection& sel) {
    to_file(path, [&](std::ostream& out) { write_risk_csv(out, sel); });
}
void write_entropy_csv_file(const std::string& path, const EpsilonSelection& sel) {
    to_file(path, [&](std::ostream& out) { write_entropy_csv(out, sel); });
}

} // namespace trimcurve
