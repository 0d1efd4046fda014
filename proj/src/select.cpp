#include "geofactor/select.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace geofactor {

std::string to_string(SelectionMode m) {
    return m == SelectionMode::single_factor ? "single_factor" : "multi_factor";
}

void check_groups(const std::vector<ExclusivityGroup>& groups,
                  const std::vector<std::string>& factors) {
    std::set<std::string> known(factors.begin(), factors.end());
    std::map<std::string, std::string> owner;
    for (const auto& g : groups) {
        if (g.members.size() < 2)
            throw ValidationError("exclusivity group '" + g.name + "' needs >= 2 members");
        for (const auto& m : g.members) {
            // members outside the factor list are tolerated (a group may
            // mention factors filtered out upstream)
            (void)known;
            auto [it, inserted] = owner.emplace(m, g.name);
            if (!inserted)
                throw ValidationError("factor '" + m + "' belongs to groups '" + it->second +
                                      "' and '" + g.name + "'");
        }
    }
}

namespace {

SubsetScore fit_subset(const FactorTable& table, const std::vector<std::string>& subset,
                       const SelectionConfig& config) {
    SubsetScore score;
    score.factors = subset;
    try {
        const GamFit fit = fit_gam(table, subset, config.gam);
        score.fit_ok = true;
        score.deviance_explained = fit.deviance_explained;
        score.all_significant = true;
        for (const auto& t : fit.terms) {
            score.terms.push_back({t.name, t.edf, t.p_value, t.lambda});
            if (!(t.p_value <= config.p_threshold)) score.all_significant = false;
        }
    } catch (const std::exception& e) {
        score.error = e.what();
    }
    return score;
}

}  // namespace

bool subset_score_before(const SubsetScore& a, const SubsetScore& b) {
    if (a.fit_ok != b.fit_ok) return a.fit_ok;
    if (!a.fit_ok) return false;  // failed entries keep evaluation order
    if (a.all_significant != b.all_significant) return a.all_significant;
    if (std::abs(a.deviance_explained - b.deviance_explained) > 1e-6)
        return a.deviance_explained > b.deviance_explained;
    if (a.factors.size() != b.factors.size()) return a.factors.size() < b.factors.size();
    return a.factors < b.factors;
}

std::vector<SubsetScore> single_factor_scan(const FactorTable& table,
                                            const std::vector<std::string>& factors,
                                            const SelectionConfig& config) {
    if (factors.empty())
        throw std::invalid_argument("single_factor_scan: no factors given");
    std::vector<SubsetScore> scores;
    scores.reserve(factors.size());
    for (const auto& f : factors) scores.push_back(fit_subset(table, {f}, config));
    std::stable_sort(scores.begin(), scores.end(), subset_score_before);
    return scores;
}

std::vector<std::vector<std::string>> enumerate_subsets(
    const std::vector<std::string>& factors, const std::vector<ExclusivityGroup>& groups,
    int max_size) {
    if (max_size < 1) throw std::invalid_argument("enumerate_subsets: max_size must be >= 1");
    check_groups(groups, factors);

    // group id per factor, -1 for ungrouped
    std::vector<int> group_of(factors.size(), -1);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (const auto& m : groups[g].members)
            for (std::size_t i = 0; i < factors.size(); ++i)
                if (factors[i] == m) group_of[i] = static_cast<int>(g);

    std::vector<std::vector<std::string>> out;
    std::vector<std::size_t> picked;

    // depth-first over index combinations emits lexicographic order per size
    auto extend = [&](auto&& self, std::size_t start, int remaining) -> void {
        if (remaining == 0) {
            std::vector<std::string> subset;
            subset.reserve(picked.size());
            for (std::size_t i : picked) subset.push_back(factors[i]);
            out.push_back(std::move(subset));
            return;
        }
        for (std::size_t i = start; i < factors.size(); ++i) {
            if (group_of[i] >= 0) {
                bool clash = false;
                for (std::size_t j : picked)
                    if (group_of[j] == group_of[i]) { clash = true; break; }
                if (clash) continue;
            }
            picked.push_back(i);
            self(self, i + 1, remaining - 1);
            picked.pop_back();
        }
    };
    for (int size = 1; size <= max_size; ++size) extend(extend, 0, size);
    return out;
}

namespace {

SelectionResult exhaustive_search(const FactorTable& table,
                                  const std::vector<std::vector<std::string>>& candidates,
                                  const SelectionConfig& config) {
    SelectionResult result;
    result.exhaustive = true;
    for (const auto& subset : candidates)
        result.ranked.push_back(fit_subset(table, subset, config));
    std::stable_sort(result.ranked.begin(), result.ranked.end(), subset_score_before);
    if (!result.ranked.empty() && result.ranked.front().fit_ok &&
        result.ranked.front().all_significant)
        result.winner = result.ranked.front();
    return result;
}

SelectionResult greedy_search(const FactorTable& table, const std::vector<std::string>& factors,
                              const std::vector<int>& group_of, const SelectionConfig& config) {
    SelectionResult result;
    result.exhaustive = false;

    std::vector<std::string> current;
    std::vector<int> used_groups;
    double current_dev = 0.0;

    while (static_cast<int>(current.size()) < config.max_size) {
        std::optional<SubsetScore> best_step;
        for (std::size_t i = 0; i < factors.size(); ++i) {
            if (std::find(current.begin(), current.end(), factors[i]) != current.end()) continue;
            if (group_of[i] >= 0 &&
                std::find(used_groups.begin(), used_groups.end(), group_of[i]) !=
                    used_groups.end())
                continue;
            auto subset = current;
            subset.push_back(factors[i]);
            std::sort(subset.begin(), subset.end());
            SubsetScore score = fit_subset(table, subset, config);
            result.ranked.push_back(score);
            if (!score.fit_ok || !score.all_significant) continue;
            if (!best_step || score.deviance_explained > best_step->deviance_explained)
                best_step = std::move(score);
        }
        if (!best_step || best_step->deviance_explained <= current_dev + 1e-6) break;
        // adopt the winning step
        std::string added;
        for (const auto& f : best_step->factors)
            if (std::find(current.begin(), current.end(), f) == current.end()) added = f;
        current = best_step->factors;
        current_dev = best_step->deviance_explained;
        for (std::size_t i = 0; i < factors.size(); ++i)
            if (factors[i] == added && group_of[i] >= 0) used_groups.push_back(group_of[i]);
        result.winner = std::move(*best_step);
    }
    std::stable_sort(result.ranked.begin(), result.ranked.end(), subset_score_before);
    return result;
}

}  // namespace

SelectionResult search_best_group(const FactorTable& table,
                                  const std::vector<std::string>& factors,
                                  const std::vector<ExclusivityGroup>& groups,
                                  const SelectionConfig& config) {
    const auto candidates = enumerate_subsets(factors, groups, config.max_size);
    if (candidates.empty())
        throw std::invalid_argument("search_best_group: no candidate subsets");

    SelectionResult result;
    if (static_cast<long>(candidates.size()) <= config.budget) {
        result = exhaustive_search(table, candidates, config);
    } else {
        std::vector<int> group_of(factors.size(), -1);
        for (std::size_t g = 0; g < groups.size(); ++g)
            for (const auto& m : groups[g].members)
                for (std::size_t i = 0; i < factors.size(); ++i)
                    if (factors[i] == m) group_of[i] = static_cast<int>(g);
        result = greedy_search(table, factors, group_of, config);
    }
    result.mode =
        config.max_size <= 1 ? SelectionMode::single_factor : SelectionMode::multi_factor;
    return result;
}

}  // namespace geofactor
