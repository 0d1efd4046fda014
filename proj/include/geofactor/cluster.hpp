#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geofactor/common.hpp"
#include "geofactor/ingest.hpp"

namespace geofactor {

enum class CovFamily { spherical, diagonal, full };

std::string to_string(CovFamily f);
CovFamily cov_family_from_string(const std::string& s);

struct EmOptions {
    int max_iterations = 500;
    double rel_tol = 1e-8;   // relative log-likelihood change
    int n_restarts = 10;
    double ridge_factor = 1e-6;  // times mean data variance, added to diagonals
};

struct GmmFit {
    int K = 0;
    CovFamily family = CovFamily::full;
    Eigen::VectorXd weights;                  // simplex
    Eigen::MatrixXd means;                    // K x d
    std::vector<Eigen::MatrixXd> covariances; // K of d x d (structured per family)
    double log_likelihood = 0.0;
    int n_params = 0;
    Eigen::MatrixXd responsibilities;         // n x K, row-stochastic
    std::vector<double> ll_history;           // winning restart, per EM iteration
};

/// Free parameter count: (K-1) weights + K*d means + family covariance terms.
int gmm_param_count(int K, int d, CovFamily family);

/// EM to convergence, best of n_restarts farthest-point initializations
/// derived from `seed`. The log-likelihood is checked in-loop to be
/// non-decreasing on every restart. Throws on K > rows and on data with
/// fewer than K distinct rows.
GmmFit fit_gmm(const Eigen::MatrixXd& data, int K, CovFamily family, std::uint64_t seed,
               const EmOptions& options = {});

/// 2*logL - n_params*ln(n); larger is better.
double bic(const GmmFit& fit, int n_rows);

struct BicCandidate {
    int K = 0;
    CovFamily family = CovFamily::full;
    double bic = 0.0;
    double loglik = 0.0;
    int n_params = 0;
    bool ok = false;
    std::string error;
};

struct ClusterAssignment {
    std::vector<int> labels;  // argmax responsibility per row
    GmmFit fit;
    double bic = 0.0;
    std::vector<BicCandidate> table;  // every (K, family) candidate tried
};

/// Exhaustive (K, family) sweep picking the best BIC. Ties within 1e-9 go
/// to fewer parameters, then smaller K. Candidates whose fit fails are
/// recorded and skipped; only a fully-failed sweep is an error.
/// Per-candidate seeds are derived from (seed, K, family), so results do
/// not depend on evaluation order.
ClusterAssignment select_model(const Eigen::MatrixXd& data, int k_min, int k_max,
                               const std::vector<CovFamily>& families, std::uint64_t seed,
                               const EmOptions& options = {});

struct ProfileStat {
    double mean = 0.0;
    double median = 0.0;
    bool defined = false;
};

struct ClassProfile {
    int class_id = 0;
    std::size_t size = 0;
    std::map<std::string, ProfileStat> factor_stats;
    ProfileStat response_stat;
};

/// Descriptive statistics per class over member rows; labels must align
/// with table rows. Missing cells are skipped; empty classes produce
/// undefined-flagged stats.
std::vector<ClassProfile> class_profiles(const std::vector<int>& labels, int n_classes,
                                         const FactorTable& table);

}  // namespace geofactor
