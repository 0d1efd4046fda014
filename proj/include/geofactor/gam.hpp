#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geofactor/common.hpp"
#include "geofactor/ingest.hpp"

namespace geofactor {

enum class Link { identity, log_link };

std::string to_string(Link link);
Link link_from_string(const std::string& s);

/// Cubic regression spline pieces for one covariate: a cardinal natural
/// cubic spline basis on quantile knots (basis function j is 1 at knot j,
/// 0 at the others) and the integrated squared second derivative penalty
/// in that parametrization. The penalty nullspace is {constant, linear}.
struct SplineBasis {
    Eigen::VectorXd knots;    // strictly increasing, length k
    Eigen::MatrixXd design;   // n x k, evaluated at the input x
    Eigen::MatrixXd penalty;  // k x k, symmetric PSD
};

/// Knots at evenly spaced quantiles of the distinct values of x.
/// Throws ValidationError when x has fewer than k distinct values
/// (the variation-sufficiency failure surfaced by ingest).
SplineBasis build_basis(const Eigen::VectorXd& x, int k);

/// Cardinal basis rows at arbitrary x; linear extrapolation beyond the
/// knot range, as a natural spline extends.
Eigen::MatrixXd spline_design(const Eigen::VectorXd& knots, const Eigen::VectorXd& x);

struct LambdaGrid {
    double min_value = 1e-4;
    double max_value = 1e4;
    int points = 30;

    std::vector<double> values() const;  // log-spaced
};

struct GamConfig {
    int basis_dim = 10;  // k per smooth
    Link link = Link::identity;
    LambdaGrid grid;
    double gcv_rel_tol = 1e-6;  // coordinate-descent stopping rule
    int max_coord_passes = 20;
    int min_rows = 10;
    /// Lambda policy: empty = GCV grid selection; otherwise one fixed
    /// smoothing parameter per term.
    std::optional<std::vector<double>> fixed_lambdas;
};

struct SmoothTerm {
    std::string name;
    int basis_dim = 0;
    Eigen::VectorXd knots;
    Eigen::MatrixXd constraint;    // Z: k x (k-1), orthonormal, centers the term
    Eigen::MatrixXd penalty;       // constrained penalty, (k-1) x (k-1)
    Eigen::VectorXd coefficients;  // constrained coordinates, length k-1
    double lambda = 0.0;
    double edf = 0.0;     // trace of this term's hat block, in [1, k-1]
    double p_value = 1.0; // Wald-type, approximate
    double x_min = 0.0, x_max = 0.0;
    int offset = 0;  // first column in the assembled design
};

struct GamFit {
    Link link = Link::identity;
    double intercept = 0.0;
    std::vector<SmoothTerm> terms;
    double deviance_explained = 0.0;
    double hat_trace = 0.0;  // == 1 + sum of term edfs
    double scale = 0.0;      // residual variance estimate
    double gcv = 0.0;
    double deviance = 0.0;
    double null_deviance = 0.0;
    int n_obs = 0;
    Eigen::VectorXd coefficients;     // full vector, intercept first
    Eigen::MatrixXd coef_covariance;  // posterior covariance of coefficients
    Eigen::VectorXd fitted;           // response scale, used rows
    std::vector<std::size_t> used_rows;  // table rows that entered the fit
    Eigen::MatrixXd design;              // assembled model matrix
    Eigen::VectorXd response;            // response on used rows
};

/// Penalized regression spline fit of table.response on the named factors.
/// Rows with a missing response or a missing value in any used factor are
/// dropped. Identity link solves penalized least squares directly; the log
/// link runs penalized iteratively reweighted least squares.
GamFit fit_gam(const FactorTable& table, const std::vector<std::string>& terms,
               const GamConfig& config = {});

/// Same fit from raw columns (test and tool entry point).
GamFit fit_gam_xy(const std::vector<std::string>& names,
                  const std::vector<Eigen::VectorXd>& xs, const Eigen::VectorXd& y,
                  const GamConfig& config = {});

/// Re-evaluates the smoothing criterion at an arbitrary lambda vector for
/// the model behind `fit`. The stored fit's gcv is the grid argmin of this.
double gam_gcv(const GamFit& fit, const std::vector<double>& lambdas);

double deviance_explained(const GamFit& fit);

/// Centered effect of one smooth at arbitrary covariate values.
Eigen::VectorXd term_effect(const GamFit& fit, const std::string& term,
                            const Eigen::VectorXd& x);

/// Additive prediction on the response scale; xs ordered as fit.terms.
Eigen::VectorXd predict(const GamFit& fit, const std::vector<Eigen::VectorXd>& xs);

struct SmoothCurve {
    Eigen::VectorXd x;
    Eigen::VectorXd fit;    // centered term effect
    Eigen::VectorXd lower;  // fit - 2 se
    Eigen::VectorXd upper;  // fit + 2 se
};

/// Term effect over an even grid on the observed range with +-2 posterior
/// SE bands.
SmoothCurve smooth_curve(const GamFit& fit, const std::string& term, int grid_size = 200);

}  // namespace geofactor
