#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geofactor/gam.hpp"
#include "geofactor/ingest.hpp"

namespace geofactor {

/// Mutually collinear factors of which at most one may enter a candidate
/// model (e.g. the three age bands, or the two dwelling measures).
struct ExclusivityGroup {
    std::string name;
    std::vector<std::string> members;  // >= 2
};

void check_groups(const std::vector<ExclusivityGroup>& groups,
                  const std::vector<std::string>& factors);

struct TermStat {
    std::string name;
    double edf = 0.0;
    double p_value = 1.0;
    double lambda = 0.0;
};

struct SubsetScore {
    std::vector<std::string> factors;
    double deviance_explained = 0.0;
    std::vector<TermStat> terms;
    bool all_significant = false;  // every term p <= threshold
    bool fit_ok = false;
    std::string error;  // set when the fit failed
};

enum class SelectionMode { single_factor, multi_factor };

std::string to_string(SelectionMode m);

struct SelectionConfig {
    double p_threshold = 0.10;
    int max_size = 6;
    long budget = 5000;  // candidate-fit cap before the greedy fallback kicks in
    GamConfig gam;
};

/// One univariate smooth per factor, ranked by deviance explained.
/// Failed fits are kept as failed entries at the bottom.
std::vector<SubsetScore> single_factor_scan(const FactorTable& table,
                                            const std::vector<std::string>& factors,
                                            const SelectionConfig& config = {});

/// Every non-empty subset of size <= max_size containing at most one
/// member per group. Deterministic order: by size, then lexicographically
/// by position in `factors`.
std::vector<std::vector<std::string>> enumerate_subsets(
    const std::vector<std::string>& factors, const std::vector<ExclusivityGroup>& groups,
    int max_size);

struct SelectionResult {
    std::optional<SubsetScore> winner;  // empty when nothing passes the p-filter
    std::vector<SubsetScore> ranked;    // every evaluated candidate, best first
    SelectionMode mode = SelectionMode::multi_factor;
    bool exhaustive = true;  // false when the greedy fallback replaced exhaustion
};

/// The factor-group search: fit every candidate subset, keep those whose
/// terms all pass the p-filter, and pick the highest deviance explained.
/// Deviance ties within 1e-6 go to the smaller subset, then lexicographic
/// order. When the candidate count exceeds the budget a greedy forward
/// pass (best significant deviance gain per step) replaces exhaustion and
/// the result is flagged exhaustive = false.
SelectionResult search_best_group(const FactorTable& table,
                                  const std::vector<std::string>& factors,
                                  const std::vector<ExclusivityGroup>& groups,
                                  const SelectionConfig& config = {});

/// Ordering used for `ranked`: significant candidates first, then higher
/// deviance explained (ties within 1e-6 resolved by smaller size, then
/// lexicographic factor list); failed fits last in evaluation order.
bool subset_score_before(const SubsetScore& a, const SubsetScore& b);

}  // namespace geofactor
