#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geofactor/ingest.hpp"

namespace test_support {

/// Adjusted Rand index between two labelings.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    std::map<std::pair<int, int>, long> joint;
    std::map<int, long> ca, cb;
    for (std::size_t i = 0; i < n; ++i) {
        ++joint[{a[i], b[i]}];
        ++ca[a[i]];
        ++cb[b[i]];
    }
    auto choose2 = [](long m) { return 0.5 * m * (m - 1); };
    double sum_joint = 0, sum_a = 0, sum_b = 0;
    for (const auto& [k, v] : joint) sum_joint += choose2(v);
    for (const auto& [k, v] : ca) sum_a += choose2(v);
    for (const auto& [k, v] : cb) sum_b += choose2(v);
    const double total = choose2(static_cast<long>(n));
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (sum_joint - expected) / (max_index - expected);
}

/// Fresh directory under the system temp root; removed and recreated.
inline std::string temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("geofactor_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

/// Minimal in-memory table builder for unit tests.
inline geofactor::FactorTable make_table(const std::vector<double>& response,
                                         const std::map<std::string, std::vector<double>>& cols) {
    geofactor::FactorTable t;
    const std::size_t n = response.size();
    for (std::size_t i = 0; i < n; ++i) {
        t.ids.push_back("n" + std::to_string(i + 1));
        t.names.push_back("row " + std::to_string(i + 1));
        t.lat.push_back(43.6 + 0.001 * static_cast<double>(i));
        t.lon.push_back(-79.4 - 0.001 * static_cast<double>(i));
        t.response.push_back(response[i]);
        t.response_missing.push_back(0);
    }
    for (const auto& [name, values] : cols) {
        geofactor::FactorColumn c;
        c.name = name;
        c.description = name;
        c.values = values;
        c.missing.assign(n, 0);
        t.factors.push_back(std::move(c));
    }
    return t;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace test_support
