#pragma once

// Observational data layout and the weighted empirical measures every
// estimator is defined against.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace trimcurve {

struct Record {
    std::vector<double> x;  // covariates
    double a = 0.0;         // treatment
    double y = 0.0;         // outcome
    double w = 1.0;         // sampling weight, >= 0
};

struct Dataset {
    std::vector<Record> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    std::size_t covariate_dim() const { return records.empty() ? 0 : records[0].x.size(); }

    // Throws on ragged covariate rows, negative or non-finite weights,
    // non-finite a / y, or zero total weight.
    void validate() const;

    double a_min() const;
    double a_max() const;

    Dataset subset(std::span<const std::size_t> indices) const;
};

// CSV schema: header "x1,...,xp,a,y[,w]", one record per line, '.' decimal
// separator.  Parse failures throw ParseError with the 1-based line number.
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);
void write_csv(const Dataset& data, std::ostream& out);
void write_csv_file(const Dataset& data, const std::string& path);

// Weighted mean sum(w f)/sum(w).  Requires positive total weight.
double weighted_mean(std::span<const double> values, std::span<const double> weights);

// Weighted sample variance with a count-based Bessel correction:
//   n/(n-1) * sum(w (f - mean)^2)/sum(w)
// which reduces to the usual 1/(n-1) form under unit weights and is
// invariant to rescaling all weights.  Returns 0 for n == 1.
double weighted_var(std::span<const double> values, std::span<const double> weights);

// Lower empirical quantile: smallest value v with weighted CDF(v) >= p.
double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p);

} // namespace trimcurve
