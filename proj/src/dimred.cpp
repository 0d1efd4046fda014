#include "geofactor/dimred.hpp"

#include <algorithm>
#include <cmath>

namespace geofactor {

PcaModel fit_pca(const Eigen::MatrixXd& data) {
    const auto n = data.rows();
    const auto p = data.cols();
    if (n < 2) throw std::invalid_argument("fit_pca: need >= 2 rows");
    if (p < 1) throw std::invalid_argument("fit_pca: need >= 1 column");
    if (!data.allFinite()) throw ValidationError("fit_pca: data contains non-finite cells");

    PcaModel model;
    model.means = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - model.means.transpose();
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("fit_pca: eigendecomposition failed");

    // ascending from the solver; keep the top min(n-1, p) in descending order
    const auto max_components = std::min<Eigen::Index>(n - 1, p);
    const double top = std::max(solver.eigenvalues().maxCoeff(), 0.0);
    if (top <= 0.0 || solver.eigenvalues().maxCoeff() < 1e-14 * std::max(1.0, cov.trace()))
        throw ValidationError("fit_pca: data has zero variance (rank 0)");

    model.eigenvalues.resize(max_components);
    model.components.resize(p, max_components);
    for (Eigen::Index i = 0; i < max_components; ++i) {
        const Eigen::Index src = p - 1 - i;
        model.eigenvalues(i) = std::max(solver.eigenvalues()(src), 0.0);
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        model.components.col(i) = v;
    }
    return model;
}

Eigen::MatrixXd project(const PcaModel& model, const Eigen::MatrixXd& data, int n_components) {
    if (n_components < 1 || n_components > model.components.cols())
        throw std::invalid_argument("project: n_components out of range");
    if (data.cols() != model.means.size())
        throw std::invalid_argument("project: column count mismatch");
    return (data.rowwise() - model.means.transpose()) * model.components.leftCols(n_components);
}

Eigen::MatrixXd reconstruct(const PcaModel& model, const Eigen::MatrixXd& scores) {
    if (scores.cols() > model.components.cols())
        throw std::invalid_argument("reconstruct: too many score columns");
    return (scores * model.components.leftCols(scores.cols()).transpose()).rowwise() +
           model.means.transpose();
}

double variance_explained(const PcaModel& model, int n_components) {
    if (n_components < 1) throw std::invalid_argument("variance_explained: n must be >= 1");
    const double total = model.eigenvalues.sum();
    if (total <= 0.0) return 0.0;
    const auto n = std::min<Eigen::Index>(n_components, model.eigenvalues.size());
    return model.eigenvalues.head(n).sum() / total;
}

}  // namespace geofactor
