#include "geofactor/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "geofactor/csv.hpp"
#include "geofactor/rng.hpp"

namespace geofactor {

using nlohmann::json;

std::string to_string(SmoothShape s) {
    switch (s) {
        case SmoothShape::none: return "none";
        case SmoothShape::linear: return "linear";
        case SmoothShape::quadratic: return "quadratic";
        case SmoothShape::sine: return "sine";
        case SmoothShape::log1p_shape: return "log1p";
    }
    return "none";
}

SmoothShape smooth_shape_from_string(const std::string& s) {
    if (s == "none") return SmoothShape::none;
    if (s == "linear") return SmoothShape::linear;
    if (s == "quadratic") return SmoothShape::quadratic;
    if (s == "sine") return SmoothShape::sine;
    if (s == "log1p") return SmoothShape::log1p_shape;
    throw ValidationError("unknown smooth shape '" + s + "'");
}

double eval_smooth(const SmoothTermSpec& term, double x) {
    const double z = term.frequency * x;
    switch (term.shape) {
        case SmoothShape::none: return 0.0;
        case SmoothShape::linear: return term.amplitude * z;
        case SmoothShape::quadratic: return term.amplitude * z * z;
        case SmoothShape::sine: return term.amplitude * std::sin(2.0 * M_PI * z);
        case SmoothShape::log1p_shape: return term.amplitude * std::log1p(std::abs(z));
    }
    return 0.0;
}

void check_spec(const SyntheticSpec& spec) {
    if (spec.n_neighborhoods < 1) throw ValidationError("synthetic: n_neighborhoods must be >= 1");
    if (spec.n_factors < 1) throw ValidationError("synthetic: n_factors must be >= 1");
    if (spec.n_classes < 1) throw ValidationError("synthetic: n_classes must be >= 1");
    if (spec.class_proportions.size() != static_cast<std::size_t>(spec.n_classes))
        throw ValidationError("synthetic: class_proportions size != n_classes");
    double total = 0.0;
    for (double p : spec.class_proportions) {
        if (p < 0.0) throw ValidationError("synthetic: negative class proportion");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ValidationError("synthetic: class proportions sum to " + format_double(total) +
                              ", expected 1");
    if (spec.classes.size() != static_cast<std::size_t>(spec.n_classes))
        throw ValidationError("synthetic: classes size != n_classes");
    for (const auto& c : spec.classes) {
        if (c.factor_means.size() != static_cast<std::size_t>(spec.n_factors) ||
            c.factor_sds.size() != static_cast<std::size_t>(spec.n_factors))
            throw ValidationError("synthetic: class mean/sd vectors must have n_factors entries");
        for (double sd : c.factor_sds)
            if (!(sd > 0.0)) throw ValidationError("synthetic: factor sds must be > 0");
    }
    if (!spec.factor_names.empty() &&
        spec.factor_names.size() != static_cast<std::size_t>(spec.n_factors))
        throw ValidationError("synthetic: factor_names size != n_factors");
    if (spec.noise_sd < 0.0) throw ValidationError("synthetic: noise_sd must be >= 0");
}

namespace {

std::vector<std::string> factor_names(const SyntheticSpec& spec) {
    if (!spec.factor_names.empty()) return spec.factor_names;
    std::vector<std::string> out;
    for (int i = 1; i <= spec.n_factors; ++i) out.push_back("f" + std::to_string(i));
    return out;
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    SyntheticSpec spec;
    try {
        spec.n_neighborhoods = j.at("n_neighborhoods").get<int>();
        spec.n_factors = j.at("n_factors").get<int>();
        spec.n_classes = j.at("n_classes").get<int>();
        spec.class_proportions = j.at("class_proportions").get<std::vector<double>>();
        for (const auto& jc : j.at("classes")) {
            ClassSpec c;
            c.factor_means = jc.at("factor_means").get<std::vector<double>>();
            c.factor_sds = jc.at("factor_sds").get<std::vector<double>>();
            spec.classes.push_back(std::move(c));
        }
        if (j.contains("factor_names"))
            spec.factor_names = j.at("factor_names").get<std::vector<std::string>>();
        if (j.contains("response_terms")) {
            for (const auto& jt : j.at("response_terms")) {
                SmoothTermSpec t;
                t.factor = jt.at("factor").get<std::string>();
                t.shape = smooth_shape_from_string(jt.at("shape").get<std::string>());
                t.amplitude = jt.value("amplitude", 1.0);
                t.frequency = jt.value("frequency", 1.0);
                spec.response_terms.push_back(std::move(t));
            }
        }
        spec.response_offset = j.value("response_offset", 0.0);
        spec.noise_sd = j.value("noise_sd", 1.0);
        spec.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    check_spec(spec);
    return spec;
}

SyntheticSpec synthetic_spec_from_json_file(const std::string& path) {
    return synthetic_spec_from_json(read_text_file(path), path);
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    check_spec(spec);
    const auto names = factor_names(spec);

    SyntheticData data;
    auto& table = data.table;
    table.factors.resize(names.size());
    for (std::size_t k = 0; k < names.size(); ++k) {
        table.factors[k].name = names[k];
        table.factors[k].description = "synthetic factor " + names[k];
    }

    std::vector<int> term_col(spec.response_terms.size());
    for (std::size_t t = 0; t < spec.response_terms.size(); ++t) {
        const auto& f = spec.response_terms[t].factor;
        const auto it = std::find(names.begin(), names.end(), f);
        if (it == names.end())
            throw ValidationError("synthetic: response term references unknown factor '" + f + "'");
        term_col[t] = static_cast<int>(it - names.begin());
    }

    Rng rng(spec.seed);
    const int n = spec.n_neighborhoods;
    for (int i = 0; i < n; ++i) {
        const auto label = static_cast<int>(rng.categorical(spec.class_proportions));
        data.truth.labels.push_back(label);
        const auto& cls = spec.classes[label];

        table.ids.push_back("n" + std::to_string(i + 1));
        table.names.push_back("synthetic " + std::to_string(i + 1));
        table.lat.push_back(43.6 + 0.2 * rng.uniform01());
        table.lon.push_back(-79.6 + 0.4 * rng.uniform01());

        std::vector<double> x(names.size());
        for (std::size_t k = 0; k < names.size(); ++k) {
            x[k] = rng.normal(cls.factor_means[k], cls.factor_sds[k]);
            table.factors[k].values.push_back(x[k]);
            table.factors[k].missing.push_back(0);
        }

        double signal = spec.response_offset;
        for (std::size_t t = 0; t < spec.response_terms.size(); ++t)
            signal += eval_smooth(spec.response_terms[t], x[term_col[t]]);
        data.truth.noiseless_response.push_back(signal);

        // the deviate is always consumed so the draw sequence does not
        // depend on noise_sd
        const double noise = rng.normal() * spec.noise_sd;
        table.response.push_back(signal + noise);
        table.response_missing.push_back(0);
    }
    data.truth.terms = spec.response_terms;
    return data;
}

}  // namespace geofactor
