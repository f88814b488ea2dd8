#include "trimcurve/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "trimcurve/errors.hpp"

namespace trimcurve {

void Dataset::validate() const {
    if (records.empty()) throw Error("dataset is empty");
    const std::size_t dim = records[0].x.size();
    double total_w = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const Record& r = records[i];
        if (r.x.size() != dim)
            throw Error("record " + std::to_string(i) + " has " + std::to_string(r.x.size()) +
                        " covariates, expected " + std::to_string(dim));
        for (double v : r.x)
            if (!std::isfinite(v)) throw Error("record " + std::to_string(i) + ": non-finite covariate");
        if (!std::isfinite(r.a)) throw Error("record " + std::to_string(i) + ": non-finite treatment");
        if (!std::isfinite(r.y)) throw Error("record " + std::to_string(i) + ": non-finite outcome");
        if (!std::isfinite(r.w) || r.w < 0.0)
            throw Error("record " + std::to_string(i) + ": weight must be finite and >= 0");
        total_w += r.w;
    }
    if (!(total_w > 0.0)) throw Error("dataset has zero total weight");
}

double Dataset::a_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (const Record& r : records) m = std::min(m, r.a);
    return m;
}

double Dataset::a_max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const Record& r : records) m = std::max(m, r.a);
    return m;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.records.reserve(indices.size());
    for (std::size_t i : indices) out.records.push_back(records[i]);
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim_ws(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, std::size_t line_no) {
    const std::string s = trim_ws(field);
    if (s.empty()) throw ParseError("empty numeric field", line_no);
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw ParseError("cannot parse '" + s + "' as a number", line_no);
    return v;
}

} // namespace

Dataset read_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("missing header", 1);
    ++line_no;
    const auto header = split_line(line);
    std::size_t dim = 0;
    bool has_w = false;
    // header must be x1..xp, a, y[, w]
    std::size_t idx = 0;
    while (idx < header.size()) {
        const std::string name = trim_ws(header[idx]);
        if (name == "x" + std::to_string(idx + 1)) {
            ++dim;
            ++idx;
        } else {
            break;
        }
    }
    if (idx >= header.size() || trim_ws(header[idx]) != "a")
        throw ParseError("expected column 'a' after covariates", 1);
    ++idx;
    if (idx >= header.size() || trim_ws(header[idx]) != "y")
        throw ParseError("expected column 'y' after 'a'", 1);
    ++idx;
    if (idx < header.size()) {
        if (trim_ws(header[idx]) != "w" || idx + 1 != header.size())
            throw ParseError("only an optional trailing 'w' column is allowed after 'y'", 1);
        has_w = true;
    }
    const std::size_t expected = dim + 2 + (has_w ? 1 : 0);

    Dataset data;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_ws(line).empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != expected)
            throw ParseError("expected " + std::to_string(expected) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        Record r;
        r.x.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) r.x[j] = parse_number(fields[j], line_no);
        r.a = parse_number(fields[dim], line_no);
        r.y = parse_number(fields[dim + 1], line_no);
        if (has_w) {
            r.w = parse_number(fields[dim + 2], line_no);
            if (!(r.w >= 0.0)) throw ParseError("weight must be >= 0", line_no);
        }
        data.records.push_back(std::move(r));
    }
    data.validate();
    return data;
}

Dataset read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    return read_csv(in);
}

void write_csv(const Dataset& data, std::ostream& out) {
    const std::size_t dim = data.covariate_dim();
    for (std::size_t j = 0; j < dim; ++j) out << "x" << (j + 1) << ",";
    out << "a,y,w\n";
    char buf[64];
    auto put = [&](double v, char sep) {
        const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
        out.write(buf, len);
        out.put(sep);
    };
    for (const Record& r : data.records) {
        for (std::size_t j = 0; j < dim; ++j) put(r.x[j], ',');
        put(r.a, ',');
        put(r.y, ',');
        put(r.w, '\n');
    }
}

void write_csv_file(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_csv(data, out);
}

double weighted_mean(std::span<const double> values, std::span<const double> weights) {
    double sw = 0.0, swf = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sw += weights[i];
        swf += weights[i] * values[i];
    }
    if (!(sw > 0.0)) throw Error("weighted_mean: total weight must be positive");
    return swf / sw;
}

double weighted_var(std::span<const double> values, std::span<const double> weights) {
    const std::size_t n = values.size();
    if (n == 0) throw Error("weighted_var: empty input");
    if (n == 1) return 0.0;
    const double mean = weighted_mean(values, weights);
    double sw = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - mean;
        acc += weights[i] * d * d;
        sw += weights[i];
    }
    return acc / sw * (static_cast<double>(n) / static_cast<double>(n - 1));
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p) {
    if (values.empty()) throw Error("weighted_quantile: empty input");
    if (!(p >= 0.0 && p <= 1.0)) throw Error("weighted_quantile: p must be in [0,1]");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    double sw = 0.0;
    for (double w : weights) sw += w;
    if (!(sw > 0.0)) throw Error("weighted_quantile: total weight must be positive");
    double acc = 0.0;
    for (std::size_t k : order) {
        acc += weights[k];
        if (acc / sw >= p) return values[k];
    }
    return values[order.back()];
}

} // namespace trimcurve
