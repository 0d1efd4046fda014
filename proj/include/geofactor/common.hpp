#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace geofactor {

/// Malformed input file (CSV/JSON). Message carries file, row and column
/// where available.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structurally valid input that violates a documented invariant
/// (duplicate ids, negative rates, zero-variance columns, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- small numeric helpers shared across modules ----

double mean(std::span<const double> v);

/// Sample standard deviation (n-1 denominator). Returns 0 for n < 2.
double sample_sd(std::span<const double> v);

/// Median; copies and sorts its input. NaN for empty input.
double median(std::vector<double> v);

/// Pearson correlation. NaN when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Type-7 quantile of an already sorted vector, p in [0,1].
double quantile_sorted(std::span<const double> sorted, double p);

/// Shortest round-trip decimal representation (std::to_chars).
std::string format_double(double x);

/// Strict full-string double parse; throws ParseError with `context`.
double parse_double_strict(std::string_view text, const std::string& context);

// ---- deterministic hashing for seeds and config fingerprints ----

std::uint64_t fnv1a64(std::string_view data);

/// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace geofactor
