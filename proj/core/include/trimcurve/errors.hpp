#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trimcurve {

// Base class for all domain errors raised by the library.  Anything not
// derived from this (std::bad_alloc, ...) indicates a bug, not bad input.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an inverse-propensity weight would be taken at a propensity
// at or below the hard floor (1e-12).  Carries the offending record index.
class NonpositivePropensityError : public Error {
public:
    NonpositivePropensityError(double pi, std::ptrdiff_t record)
        : Error("propensity " + std::to_string(pi) + " at or below floor for record " +
                std::to_string(record)),
          pi_value(pi), record_index(record) {}
    double pi_value;
    std::ptrdiff_t record_index;
};

// Raised when an estimated trimmed-population mass (denominator) is not
// strictly positive, so the ratio estimand is undefined.
class DegenerateTrimmedPopulationError : public Error {
public:
    explicit DegenerateTrimmedPopulationError(double den)
        : Error("trimmed-population denominator " + std::to_string(den) + " is not positive"),
          den_value(den) {}
    double den_value;
};

// Raised when the trimmed subsample selected by a plug-in threshold is empty.
class EmptyTrimmedSampleError : public Error {
public:
    EmptyTrimmedSampleError() : Error("no records pass the trimming threshold") {}
};

// Raised by the estimated-threshold variance when the denominator derivative
// is too close to zero for the correction term to be stable.
class IllConditionedDerivativeError : public Error {
public:
    explicit IllConditionedDerivativeError(double dden)
        : Error("threshold-derivative correction ill-conditioned, dden = " +
                std::to_string(dden)),
          dden_value(dden) {}
    double dden_value;
};

// Raised when a threshold line search never crosses the target level and the
// caller did not opt into boundary results.
class BoundaryThresholdError : public Error {
public:
    explicit BoundaryThresholdError(const std::string& msg) : Error(msg) {}
};

// Raised when a cross-fitting fold is too small for the fit recipe.
class FoldTooSmallError : public Error {
public:
    FoldTooSmallError(std::size_t fold, std::size_t size, const std::string& why)
        : Error("fold " + std::to_string(fold) + " with " + std::to_string(size) +
                " records cannot be fit: " + why),
          fold_index(fold), fold_size(size) {}
    std::size_t fold_index;
    std::size_t fold_size;
};

// Raised on malformed input files (CSV or config), with a 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_number(line) {}
    std::size_t line_number;
};

} // namespace trimcurve
