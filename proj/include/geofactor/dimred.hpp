#pragma once

#include <Eigen/Dense>

#include "geofactor/common.hpp"

namespace geofactor {

/// Covariance PCA of a (pre-standardized) data matrix.
///
/// components stores one orthonormal loading vector per column, eigenvalues
/// in matching descending order. The loading count is capped at
/// min(rows - 1, cols); trailing zero directions of a rank-deficient sample
/// covariance are dropped. Signs are fixed so each loading's
/// largest-magnitude entry is positive, which keeps downstream clustering
/// input reproducible across platforms.
struct PcaModel {
    Eigen::VectorXd means;
    Eigen::MatrixXd components;   // cols x n_components
    Eigen::VectorXd eigenvalues;  // descending, >= 0
};

/// Rows are observations. Requires >= 2 rows and a covariance of rank >= 1.
PcaModel fit_pca(const Eigen::MatrixXd& data);

/// Centered data times the first n loading vectors.
Eigen::MatrixXd project(const PcaModel& model, const Eigen::MatrixXd& data, int n_components);

/// Maps scores (from project) back to the original coordinates.
Eigen::MatrixXd reconstruct(const PcaModel& model, const Eigen::MatrixXd& scores);

/// Fraction of total variance carried by the first n components.
double variance_explained(const PcaModel& model, int n_components);

}  // namespace geofactor
