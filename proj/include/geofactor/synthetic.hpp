#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geofactor/ingest.hpp"

namespace geofactor {

enum class SmoothShape { none, linear, quadratic, sine, log1p_shape };

std::string to_string(SmoothShape s);
SmoothShape smooth_shape_from_string(const std::string& s);

/// One planted response term: amplitude * shape(frequency * x).
struct SmoothTermSpec {
    std::string factor;
    SmoothShape shape = SmoothShape::linear;
    double amplitude = 1.0;
    double frequency = 1.0;
};

double eval_smooth(const SmoothTermSpec& term, double x);

struct ClassSpec {
    std::vector<double> factor_means;  // size n_factors
    std::vector<double> factor_sds;    // size n_factors, > 0
};

/// Generator blueprint mirroring the target use case's shape
/// (~140 neighborhoods, up to 16 factors, a handful of latent classes).
struct SyntheticSpec {
    int n_neighborhoods = 130;
    int n_factors = 12;
    int n_classes = 3;
    std::vector<double> class_proportions;  // simplex, size n_classes
    std::vector<ClassSpec> classes;         // size n_classes
    std::vector<std::string> factor_names;  // optional; defaults f1..fN
    std::vector<SmoothTermSpec> response_terms;
    double response_offset = 0.0;
    double noise_sd = 1.0;  // > 0, or exactly 0 for noiseless fixtures
    std::uint64_t seed = 0;
};

void check_spec(const SyntheticSpec& spec);  // throws ValidationError
SyntheticSpec synthetic_spec_from_json_file(const std::string& path);
SyntheticSpec synthetic_spec_from_json(const std::string& text, const std::string& origin);

struct SyntheticTruth {
    std::vector<int> labels;                  // class per row
    std::vector<SmoothTermSpec> terms;        // the planted smooths
    std::vector<double> noiseless_response;   // offset + signal, no noise
};

/// Deterministic for a fixed seed. Draw order (fixed; tests rely on it):
/// per row: class label, lat, lon, factor values in column order, then the
/// response noise deviate.
struct SyntheticData {
    FactorTable table;
    SyntheticTruth truth;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace geofactor
