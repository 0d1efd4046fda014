#include "geofactor/gam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <boost/math/distributions/fisher_f.hpp>

namespace geofactor {

std::string to_string(Link link) {
    return link == Link::identity ? "identity" : "log";
}

Link link_from_string(const std::string& s) {
    if (s == "identity") return Link::identity;
    if (s == "log") return Link::log_link;
    throw ValidationError("unknown link '" + s + "'");
}

std::vector<double> LambdaGrid::values() const {
    if (points < 1 || !(min_value > 0.0) || !(max_value >= min_value))
        throw std::invalid_argument("lambda grid: need points >= 1 and 0 < min <= max");
    std::vector<double> out;
    if (points == 1) {
        out.push_back(min_value);
        return out;
    }
    const double lo = std::log(min_value);
    const double hi = std::log(max_value);
    for (int i = 0; i < points; ++i)
        out.push_back(std::exp(lo + (hi - lo) * i / (points - 1)));
    return out;
}

namespace {

/// Natural-spline machinery for knots t_0 < ... < t_{k-1}: the interior
/// second derivatives m of the interpolating natural cubic spline satisfy
/// B m = D gamma, so m = F gamma with F = B^-1 D. The curvature penalty
/// integral of s''(x)^2 equals gamma' D' B^-1 D gamma.
struct SplineInternals {
    Eigen::MatrixXd second_diff;   // D, (k-2) x k
    Eigen::MatrixXd interior_map;  // F = B^-1 D, (k-2) x k
};

SplineInternals spline_internals(const Eigen::VectorXd& knots) {
    const auto k = knots.size();
    const auto m = k - 2;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m, k);
    for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index j = r + 1;  // interior knot
        const double h_lo = knots(j) - knots(j - 1);
        const double h_hi = knots(j + 1) - knots(j);
        B(r, r) = (h_lo + h_hi) / 3.0;
        if (r > 0) B(r, r - 1) = h_lo / 6.0;
        if (r + 1 < m) B(r, r + 1) = h_hi / 6.0;
        D(r, j - 1) = 1.0 / h_lo;
        D(r, j) = -1.0 / h_lo - 1.0 / h_hi;
        D(r, j + 1) = 1.0 / h_hi;
    }
    SplineInternals out;
    out.second_diff = D;
    out.interior_map = B.ldlt().solve(D);
    return out;
}

}  // namespace

Eigen::MatrixXd spline_design(const Eigen::VectorXd& knots, const Eigen::VectorXd& x) {
    const auto k = knots.size();
    if (k < 3) throw std::invalid_argument("spline_design: need >= 3 knots");
    const auto F = spline_internals(knots).interior_map;

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(x.size(), k);
    auto add_curvature = [&](Eigen::Index row, Eigen::Index knot, double coef) {
        // m_0 = m_{k-1} = 0 for a natural spline
        if (knot >= 1 && knot <= k - 2) M.row(row) += coef * F.row(knot - 1);
    };

    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x(i);
        if (xi <= knots(0)) {
            // linear extrapolation with slope s'(t_0)
            const double h = knots(1) - knots(0);
            M(i, 0) += 1.0 - (xi - knots(0)) / h;
            M(i, 1) += (xi - knots(0)) / h;
            add_curvature(i, 1, -(xi - knots(0)) * h / 6.0);
        } else if (xi >= knots(k - 1)) {
            const double h = knots(k - 1) - knots(k - 2);
            M(i, k - 1) += 1.0 + (xi - knots(k - 1)) / h;
            M(i, k - 2) += -(xi - knots(k - 1)) / h;
            add_curvature(i, k - 2, (xi - knots(k - 1)) * h / 6.0);
        } else {
            const auto* begin = knots.data();
            auto j = static_cast<Eigen::Index>(std::upper_bound(begin, begin + k, xi) - begin) - 1;
            j = std::clamp<Eigen::Index>(j, 0, k - 2);
            const double h = knots(j + 1) - knots(j);
            const double t = xi - knots(j);
            const double t1 = knots(j + 1) - xi;
            M(i, j) += t1 / h;
            M(i, j + 1) += t / h;
            add_curvature(i, j, t1 * t1 * t1 / (6.0 * h) - h * t1 / 6.0);
            add_curvature(i, j + 1, t * t * t / (6.0 * h) - h * t / 6.0);
        }
    }
    return M;
}

SplineBasis build_basis(const Eigen::VectorXd& x, int k) {
    if (k < 3) throw std::invalid_argument("build_basis: basis dimension must be >= 3");
    if (!x.allFinite()) throw ValidationError("build_basis: non-finite covariate values");
    std::set<double> distinct(x.data(), x.data() + x.size());
    if (distinct.size() < static_cast<std::size_t>(k))
        throw ValidationError("covariate has " + std::to_string(distinct.size()) +
                              " distinct values, fewer than basis dimension " +
                              std::to_string(k));
    const std::vector<double> sorted(distinct.begin(), distinct.end());

    SplineBasis basis;
    basis.knots.resize(k);
    for (int i = 0; i < k; ++i)
        basis.knots(i) = quantile_sorted(sorted, static_cast<double>(i) / (k - 1));
    for (int i = 1; i < k; ++i)
        if (!(basis.knots(i) > basis.knots(i - 1)))
            throw ValidationError("build_basis: quantile knots are not strictly increasing");

    const auto internals = spline_internals(basis.knots);
    basis.design = spline_design(basis.knots, x);
    const Eigen::MatrixXd S = internals.second_diff.transpose() * internals.interior_map;
    basis.penalty = 0.5 * (S + S.transpose());
    return basis;
}

namespace {

/// Orthonormal basis of the sum-to-zero constraint nullspace: columns Z
/// with (colsum of design) * Z = 0.
Eigen::MatrixXd centering_constraint(const Eigen::MatrixXd& design) {
    const Eigen::VectorXd c = design.colwise().sum();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
    const Eigen::MatrixXd Q = qr.householderQ();
    return Q.rightCols(c.size() - 1);
}

struct TermWork {
    std::string name;
    int k = 0;
    Eigen::VectorXd knots;
    Eigen::MatrixXd Z;
    Eigen::MatrixXd Sc;  // constrained penalty
    int offset = 0;
    double x_min = 0.0, x_max = 0.0;
};

struct Workspace {
    Link link = Link::identity;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<TermWork> terms;
    Eigen::MatrixXd XtX;  // identity-link caches
    Eigen::VectorXd Xty;

    Eigen::Index n() const { return y.size(); }
    Eigen::Index p() const { return X.cols(); }
};

struct Evaluation {
    Eigen::VectorXd beta;
    double deviance = 0.0;
    double tr_h = 0.0;
    double gcv = std::numeric_limits<double>::infinity();
    // populated only for the final evaluation
    Eigen::MatrixXd a_inverse;
    Eigen::MatrixXd edf_matrix;  // (X'WX + S)^-1 X'WX
    Eigen::VectorXd eta;
};

Eigen::MatrixXd total_penalty(const Workspace& ws, const std::vector<double>& lambdas) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(ws.p(), ws.p());
    for (std::size_t j = 0; j < ws.terms.size(); ++j) {
        const auto& t = ws.terms[j];
        S.block(t.offset, t.offset, t.k - 1, t.k - 1) += lambdas[j] * t.Sc;
    }
    return S;
}

void check_solution(const Eigen::MatrixXd& A, const Eigen::VectorXd& beta,
                    const Eigen::VectorXd& b) {
    if (!beta.allFinite())
        throw ValidationError("gam: singular normal equations (collinear terms?)");
    const double scale = A.lpNorm<Eigen::Infinity>() * beta.lpNorm<Eigen::Infinity>() +
                         b.lpNorm<Eigen::Infinity>() + 1.0;
    if ((A * beta - b).lpNorm<Eigen::Infinity>() > 1e-7 * scale)
        throw ValidationError("gam: design is rank deficient or ill-conditioned");
}

double gcv_score(double n, double deviance, double tr_h) {
    const double denom = n - tr_h;
    if (denom < 1e-6) return std::numeric_limits<double>::infinity();
    return n * deviance / (denom * denom);
}

Evaluation evaluate_identity(const Workspace& ws, const std::vector<double>& lambdas,
                             bool full) {
    const auto n = static_cast<double>(ws.n());
    Eigen::MatrixXd A = ws.XtX + total_penalty(ws, lambdas);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);

    Evaluation ev;
    ev.beta = ldlt.solve(ws.Xty);
    check_solution(A, ev.beta, ws.Xty);
    ev.deviance = (ws.y - ws.X * ev.beta).squaredNorm();
    const Eigen::MatrixXd M = ldlt.solve(ws.XtX);
    ev.tr_h = M.trace();
    ev.gcv = gcv_score(n, ev.deviance, ev.tr_h);
    if (full) {
        ev.a_inverse = ldlt.solve(Eigen::MatrixXd::Identity(ws.p(), ws.p()));
        ev.edf_matrix = M;
        ev.eta = ws.X * ev.beta;
    }
    return ev;
}

Evaluation evaluate_log(const Workspace& ws, const std::vector<double>& lambdas, bool full) {
    const auto n = static_cast<double>(ws.n());
    const double ybar = ws.y.mean();
    if (!(ybar > 0.0))
        throw ValidationError("gam: log link needs a positive mean response");

    const Eigen::MatrixXd S = total_penalty(ws, lambdas);
    Eigen::VectorXd mu = ws.y.cwiseMax(0.1 * ybar);
    Eigen::VectorXd eta = mu.array().log();

    Evaluation ev;
    Eigen::MatrixXd A;
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    Eigen::MatrixXd XtWX;
    double dev_prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 50; ++iter) {
        const Eigen::VectorXd w = mu.array().square().max(1e-10);
        const Eigen::VectorXd z = eta.array() + (ws.y - mu).array() / mu.array();
        const Eigen::MatrixXd Xw = w.asDiagonal() * ws.X;
        XtWX = ws.X.transpose() * Xw;
        const Eigen::VectorXd b = Xw.transpose() * z;
        A = XtWX + S;
        ldlt.compute(A);
        ev.beta = ldlt.solve(b);
        check_solution(A, ev.beta, b);
        eta = (ws.X * ev.beta).cwiseMin(50.0).cwiseMax(-50.0);
        mu = eta.array().exp();
        ev.deviance = (ws.y - mu).squaredNorm();
        if (std::abs(ev.deviance - dev_prev) <= 1e-8 * (1.0 + ev.deviance)) break;
        dev_prev = ev.deviance;
    }
    const Eigen::MatrixXd M = ldlt.solve(XtWX);
    ev.tr_h = M.trace();
    ev.gcv = gcv_score(n, ev.deviance, ev.tr_h);
    if (full) {
        ev.a_inverse = ldlt.solve(Eigen::MatrixXd::Identity(ws.p(), ws.p()));
        ev.edf_matrix = M;
        ev.eta = eta;
    }
    return ev;
}

Evaluation evaluate(const Workspace& ws, const std::vector<double>& lambdas, bool full) {
    return ws.link == Link::identity ? evaluate_identity(ws, lambdas, full)
                                     : evaluate_log(ws, lambdas, full);
}

/// Coordinate-wise grid descent of GCV; near-exact ties go to the larger
/// (smoother) lambda. Every coordinate ends on a grid point.
std::vector<double> select_lambdas(const Workspace& ws, const GamConfig& config) {
    const auto grid = config.grid.values();
    std::vector<double> lambdas(ws.terms.size(),
                                std::sqrt(config.grid.min_value * config.grid.max_value));
    if (ws.terms.empty()) return lambdas;

    double current = evaluate(ws, lambdas, false).gcv;
    for (int pass = 0; pass < config.max_coord_passes; ++pass) {
        const double before = current;
        for (std::size_t j = 0; j < ws.terms.size(); ++j) {
            double best_gcv = std::numeric_limits<double>::infinity();
            double best_lambda = lambdas[j];
            for (double g : grid) {
                auto trial = lambdas;
                trial[j] = g;
                const double gcv = evaluate(ws, trial, false).gcv;
                if (gcv < best_gcv * (1.0 + 1e-12) + 1e-300) {  // ascending grid: ties -> larger
                    best_gcv = gcv;
                    best_lambda = g;
                }
            }
            lambdas[j] = best_lambda;
            current = best_gcv;
        }
        if (std::abs(before - current) <= config.gcv_rel_tol * (1.0 + std::abs(before))) break;
    }
    return lambdas;
}

double term_p_value(const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov, double edf,
                    double residual_df) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
    if (es.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
    const auto dim = beta.size();
    const auto rank_target =
        std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::lround(edf)), 1, dim);

    const double max_eig = es.eigenvalues().cwiseAbs().maxCoeff();
    if (max_eig <= 0.0) return 1.0;
    const double tol = 1e-12 * max_eig;

    // rank-truncated pseudo-inverse quadratic form (eigenvalues ascend)
    double stat = 0.0;
    Eigen::Index used = 0;
    for (Eigen::Index i = dim - 1; i >= 0 && used < rank_target; --i) {
        const double eig = es.eigenvalues()(i);
        if (eig <= tol) break;
        const double proj = es.eigenvectors().col(i).dot(beta);
        stat += proj * proj / eig;
        ++used;
    }
    if (used == 0) return 1.0;

    const double df2 = std::max(1.0, residual_df);
    const boost::math::fisher_f dist(static_cast<double>(used), df2);
    return boost::math::cdf(boost::math::complement(dist, stat / static_cast<double>(used)));
}

GamFit finalize(Workspace ws, const std::vector<double>& lambdas, const GamConfig& config) {
    const Evaluation ev = evaluate(ws, lambdas, true);
    const auto n = static_cast<double>(ws.n());

    GamFit fit;
    fit.link = ws.link;
    fit.n_obs = static_cast<int>(ws.n());
    fit.coefficients = ev.beta;
    fit.intercept = ev.beta(0);
    fit.deviance = ev.deviance;
    const double ybar = ws.y.mean();
    fit.null_deviance = (ws.y.array() - ybar).matrix().squaredNorm();
    fit.deviance_explained =
        fit.null_deviance > 0.0 ? 1.0 - fit.deviance / fit.null_deviance : 0.0;
    fit.hat_trace = ev.tr_h;
    fit.scale = ev.deviance / std::max(n - ev.tr_h, 1e-8);
    fit.gcv = ev.gcv;
    fit.coef_covariance = ev.a_inverse * fit.scale;
    fit.fitted = ws.link == Link::identity
                     ? ev.eta
                     : Eigen::VectorXd(ev.eta.array().exp().matrix());
    fit.used_rows.resize(ws.n());
    for (std::size_t i = 0; i < fit.used_rows.size(); ++i) fit.used_rows[i] = i;

    const double residual_df = n - ev.tr_h;
    for (std::size_t j = 0; j < ws.terms.size(); ++j) {
        auto& w = ws.terms[j];
        SmoothTerm term;
        term.name = w.name;
        term.basis_dim = w.k;
        term.knots = std::move(w.knots);
        term.constraint = std::move(w.Z);
        term.penalty = std::move(w.Sc);
        term.offset = w.offset;
        term.lambda = lambdas[j];
        term.x_min = w.x_min;
        term.x_max = w.x_max;
        term.coefficients = ev.beta.segment(w.offset, w.k - 1);
        term.edf = ev.edf_matrix.diagonal().segment(w.offset, w.k - 1).sum();
        term.p_value = term_p_value(
            term.coefficients, fit.coef_covariance.block(w.offset, w.offset, w.k - 1, w.k - 1),
            term.edf, residual_df);
        fit.terms.push_back(std::move(term));
    }
    fit.design = std::move(ws.X);
    fit.response = std::move(ws.y);
    return fit;
}

Workspace assemble(const std::vector<std::string>& names,
                   const std::vector<Eigen::VectorXd>& xs, const Eigen::VectorXd& y,
                   const GamConfig& config) {
    if (names.size() != xs.size())
        throw std::invalid_argument("fit_gam: names and columns do not match");
    if (y.size() < config.min_rows)
        throw ValidationError("fit_gam: only " + std::to_string(y.size()) +
                              " usable rows, need >= " + std::to_string(config.min_rows));
    if (!y.allFinite()) throw ValidationError("fit_gam: non-finite response");
    for (std::size_t j = 0; j < names.size(); ++j)
        for (std::size_t l = j + 1; l < names.size(); ++l)
            if (names[j] == names[l])
                throw std::invalid_argument("fit_gam: duplicate term '" + names[j] + "'");

    Workspace ws;
    ws.link = config.link;
    ws.y = y;
    const auto n = y.size();
    const int k = config.basis_dim;
    ws.X.resize(n, 1 + static_cast<Eigen::Index>(names.size()) * (k - 1));
    ws.X.col(0).setOnes();

    int offset = 1;
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (xs[j].size() != n)
            throw std::invalid_argument("fit_gam: column '" + names[j] + "' length mismatch");
        SplineBasis basis;
        try {
            basis = build_basis(xs[j], k);
        } catch (const ValidationError& e) {
            throw ValidationError("term '" + names[j] + "': " + e.what());
        }
        TermWork w;
        w.name = names[j];
        w.k = k;
        w.knots = basis.knots;
        w.Z = centering_constraint(basis.design);
        w.Sc = w.Z.transpose() * basis.penalty * w.Z;
        w.Sc = 0.5 * (w.Sc + w.Sc.transpose());
        w.offset = offset;
        w.x_min = xs[j].minCoeff();
        w.x_max = xs[j].maxCoeff();

        const Eigen::MatrixXd Xc = basis.design * w.Z;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
        if (qr.rank() < k - 1)
            throw ValidationError("term '" + names[j] + "' is rank deficient after constraints");
        ws.X.block(0, offset, n, k - 1) = Xc;
        offset += k - 1;
        ws.terms.push_back(std::move(w));
    }
    ws.XtX = ws.X.transpose() * ws.X;
    ws.Xty = ws.X.transpose() * ws.y;
    return ws;
}

std::vector<double> pick_lambdas(const Workspace& ws, const GamConfig& config) {
    if (config.fixed_lambdas) {
        if (config.fixed_lambdas->size() != ws.terms.size())
            throw std::invalid_argument("fit_gam: fixed_lambdas size != term count");
        for (double l : *config.fixed_lambdas)
            if (!(l >= 0.0)) throw std::invalid_argument("fit_gam: lambdas must be >= 0");
        return *config.fixed_lambdas;
    }
    return select_lambdas(ws, config);
}

}  // namespace

GamFit fit_gam_xy(const std::vector<std::string>& names,
                  const std::vector<Eigen::VectorXd>& xs, const Eigen::VectorXd& y,
                  const GamConfig& config) {
    Workspace ws = assemble(names, xs, y, config);
    const auto lambdas = pick_lambdas(ws, config);
    return finalize(std::move(ws), lambdas, config);
}

GamFit fit_gam(const FactorTable& table, const std::vector<std::string>& terms,
               const GamConfig& config) {
    const auto rows = table.complete_rows(terms);
    Eigen::VectorXd y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y(i) = table.response[rows[i]];
    std::vector<Eigen::VectorXd> xs;
    for (const auto& name : terms) {
        const auto& col = table.factor(name);
        Eigen::VectorXd x(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) x(i) = col.values[rows[i]];
        xs.push_back(std::move(x));
    }
    GamFit fit = fit_gam_xy(terms, xs, y, config);
    fit.used_rows = rows;
    return fit;
}

double gam_gcv(const GamFit& fit, const std::vector<double>& lambdas) {
    if (lambdas.size() != fit.terms.size())
        throw std::invalid_argument("gam_gcv: lambda count != term count");
    Workspace ws;
    ws.link = fit.link;
    ws.X = fit.design;
    ws.y = fit.response;
    for (const auto& t : fit.terms) {
        TermWork w;
        w.name = t.name;
        w.k = t.basis_dim;
        w.knots = t.knots;
        w.Z = t.constraint;
        w.Sc = t.penalty;
        w.offset = t.offset;
        ws.terms.push_back(std::move(w));
    }
    ws.XtX = ws.X.transpose() * ws.X;
    ws.Xty = ws.X.transpose() * ws.y;
    return evaluate(ws, lambdas, false).gcv;
}

double deviance_explained(const GamFit& fit) {
    if (fit.null_deviance <= 0.0) return 0.0;
    return 1.0 - fit.deviance / fit.null_deviance;
}

namespace {

const SmoothTerm& find_term(const GamFit& fit, const std::string& name) {
    for (const auto& t : fit.terms)
        if (t.name == name) return t;
    throw ValidationError("unknown smooth term '" + name + "'");
}

}  // namespace

Eigen::VectorXd term_effect(const GamFit& fit, const std::string& term,
                            const Eigen::VectorXd& x) {
    const auto& t = find_term(fit, term);
    return spline_design(t.knots, x) * t.constraint * t.coefficients;
}

Eigen::VectorXd predict(const GamFit& fit, const std::vector<Eigen::VectorXd>& xs) {
    if (xs.size() != fit.terms.size())
        throw std::invalid_argument("predict: column count != term count");
    const auto n = xs.empty() ? Eigen::Index{0} : xs[0].size();
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(std::max<Eigen::Index>(n, 0), fit.intercept);
    for (std::size_t j = 0; j < xs.size(); ++j) {
        if (xs[j].size() != eta.size())
            throw std::invalid_argument("predict: ragged covariate columns");
        eta += term_effect(fit, fit.terms[j].name, xs[j]);
    }
    if (fit.link == Link::log_link) return eta.array().exp();
    return eta;
}

SmoothCurve smooth_curve(const GamFit& fit, const std::string& term, int grid_size) {
    if (grid_size < 2) throw std::invalid_argument("smooth_curve: grid_size must be >= 2");
    const auto& t = find_term(fit, term);

    SmoothCurve curve;
    curve.x.resize(grid_size);
    for (int i = 0; i < grid_size; ++i)
        curve.x(i) = t.x_min + (t.x_max - t.x_min) * i / (grid_size - 1);

    const Eigen::MatrixXd A = spline_design(t.knots, curve.x) * t.constraint;
    curve.fit = A * t.coefficients;
    const Eigen::MatrixXd cov =
        fit.coef_covariance.block(t.offset, t.offset, t.basis_dim - 1, t.basis_dim - 1);
    curve.lower.resize(grid_size);
    curve.upper.resize(grid_size);
    for (int i = 0; i < grid_size; ++i) {
        const double var = A.row(i) * cov * A.row(i).transpose();
        const double se = std::sqrt(std::max(var, 0.0));
        curve.lower(i) = curve.fit(i) - 2.0 * se;
        curve.upper(i) = curve.fit(i) + 2.0 * se;
    }
    return curve;
}

}  // namespace geofactor
