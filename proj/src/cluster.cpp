#include "geofactor/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geofactor/rng.hpp"

namespace geofactor {

std::string to_string(CovFamily f) {
    switch (f) {
        case CovFamily::spherical: return "spherical";
        case CovFamily::diagonal: return "diagonal";
        case CovFamily::full: return "full";
    }
    return "full";
}

CovFamily cov_family_from_string(const std::string& s) {
    if (s == "spherical") return CovFamily::spherical;
    if (s == "diagonal") return CovFamily::diagonal;
    if (s == "full") return CovFamily::full;
    throw ValidationError("unknown covariance family '" + s + "'");
}

int gmm_param_count(int K, int d, CovFamily family) {
    int cov = 0;
    switch (family) {
        case CovFamily::spherical: cov = K; break;
        case CovFamily::diagonal: cov = K * d; break;
        case CovFamily::full: cov = K * d * (d + 1) / 2; break;
    }
    return (K - 1) + K * d + cov;
}

namespace {

struct Component {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    // cached factorization pieces
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_det = 0.0;
    bool ok = false;
};

void refresh_factorization(Component& c) {
    c.llt.compute(c.cov);
    c.ok = c.llt.info() == Eigen::Success;
    if (!c.ok) return;
    c.log_det = 0.0;
    for (Eigen::Index i = 0; i < c.cov.rows(); ++i)
        c.log_det += 2.0 * std::log(c.llt.matrixL()(i, i));
}

double log_gauss(const Component& c, const Eigen::VectorXd& x) {
    const auto d = static_cast<double>(x.size());
    const Eigen::VectorXd diff = x - c.mean;
    const Eigen::VectorXd z = c.llt.matrixL().solve(diff);
    return -0.5 * (d * std::log(2.0 * M_PI) + c.log_det + z.squaredNorm());
}

/// Structure the covariance according to the family, then regularize.
Eigen::MatrixXd shape_covariance(const Eigen::MatrixXd& raw, CovFamily family, double ridge) {
    const auto d = raw.rows();
    Eigen::MatrixXd out;
    switch (family) {
        case CovFamily::spherical: {
            const double avg = raw.trace() / static_cast<double>(d);
            out = avg * Eigen::MatrixXd::Identity(d, d);
            break;
        }
        case CovFamily::diagonal:
            out = raw.diagonal().asDiagonal();
            break;
        case CovFamily::full:
            out = raw;
            break;
    }
    out.diagonal().array() += ridge;
    return out;
}

std::size_t distinct_row_count(const Eigen::MatrixXd& data) {
    std::vector<std::vector<double>> rows(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        rows[i].assign(data.row(i).begin(), data.row(i).end());
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    return rows.size();
}

/// Farthest-point seeding: random first center, then repeatedly the row
/// farthest from the chosen set (lowest index on ties).
std::vector<Eigen::Index> farthest_point_centers(const Eigen::MatrixXd& data, int K, Rng& rng) {
    const Eigen::Index n = data.rows();
    std::vector<Eigen::Index> centers;
    centers.push_back(static_cast<Eigen::Index>(rng.uniform_int(n)));
    Eigen::VectorXd min_dist(n);
    for (Eigen::Index i = 0; i < n; ++i)
        min_dist(i) = (data.row(i) - data.row(centers[0])).squaredNorm();
    while (static_cast<int>(centers.size()) < K) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < n; ++i)
            if (min_dist(i) > min_dist(best)) best = i;
        centers.push_back(best);
        for (Eigen::Index i = 0; i < n; ++i)
            min_dist(i) = std::min(min_dist(i), (data.row(i) - data.row(best)).squaredNorm());
    }
    return centers;
}

struct EmRun {
    Eigen::VectorXd weights;
    std::vector<Component> components;
    Eigen::MatrixXd responsibilities;
    double log_likelihood = -std::numeric_limits<double>::infinity();
    std::vector<double> ll_history;
};

class DegenerateRun : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One EM run from a farthest-point start. Throws DegenerateRun when a
/// component collapses (vanishing weight or non-PD covariance).
EmRun run_em(const Eigen::MatrixXd& data, int K, CovFamily family, double ridge,
             const EmOptions& options, std::uint64_t seed) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    Rng rng(seed);

    EmRun run;
    run.weights = Eigen::VectorXd::Constant(K, 1.0 / K);
    run.components.resize(K);
    run.responsibilities = Eigen::MatrixXd::Zero(n, K);

    // hard-assign to the seeded centers, then a first M-step
    const auto centers = farthest_point_centers(data, K, rng);
    std::vector<int> assign(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
            const double dist = (data.row(i) - data.row(centers[k])).squaredNorm();
            if (dist < best_d) { best_d = dist; best = k; }
        }
        assign[i] = best;
        run.responsibilities(i, best) = 1.0;
    }

    auto m_step = [&]() {
        const Eigen::VectorXd nk = run.responsibilities.colwise().sum();
        for (int k = 0; k < K; ++k) {
            if (nk(k) < 1e-8)
                throw DegenerateRun("component " + std::to_string(k) + " collapsed");
            run.weights(k) = nk(k) / static_cast<double>(n);
            Eigen::VectorXd mu =
                (run.responsibilities.col(k).transpose() * data).transpose() / nk(k);
            Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
            for (Eigen::Index i = 0; i < n; ++i) {
                const Eigen::VectorXd diff = data.row(i).transpose() - mu;
                scatter.noalias() += run.responsibilities(i, k) * diff * diff.transpose();
            }
            run.components[k].mean = std::move(mu);
            run.components[k].cov = shape_covariance(scatter / nk(k), family, ridge);
            refresh_factorization(run.components[k]);
            if (!run.components[k].ok)
                throw DegenerateRun("component covariance not positive definite");
        }
    };

    // E-step returning the observed-data log-likelihood
    Eigen::MatrixXd log_resp(n, K);
    auto e_step = [&]() {
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int k = 0; k < K; ++k)
                log_resp(i, k) =
                    std::log(run.weights(k)) + log_gauss(run.components[k], data.row(i).transpose());
            const double mx = log_resp.row(i).maxCoeff();
            const double lse = mx + std::log((log_resp.row(i).array() - mx).exp().sum());
            run.responsibilities.row(i) = (log_resp.row(i).array() - lse).exp();
            ll += lse;
        }
        return ll;
    };

    m_step();
    double prev_ll = e_step();
    run.ll_history.push_back(prev_ll);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        m_step();
        const double ll = e_step();
        if (ll < prev_ll - 1e-9 * (1.0 + std::abs(prev_ll)))
            throw std::logic_error("EM log-likelihood decreased: " + format_double(prev_ll) +
                                   " -> " + format_double(ll));
        run.ll_history.push_back(ll);
        const double rel = std::abs(ll - prev_ll) / (1.0 + std::abs(prev_ll));
        prev_ll = ll;
        if (rel < options.rel_tol) break;
    }
    run.log_likelihood = prev_ll;
    return run;
}

}  // namespace

GmmFit fit_gmm(const Eigen::MatrixXd& data, int K, CovFamily family, std::uint64_t seed,
               const EmOptions& options) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    if (K < 1) throw std::invalid_argument("fit_gmm: K must be >= 1");
    if (n < K) throw std::invalid_argument("fit_gmm: K exceeds row count");
    if (d < 1) throw std::invalid_argument("fit_gmm: need >= 1 column");
    if (!data.allFinite()) throw ValidationError("fit_gmm: data contains non-finite cells");
    if (K > 1 && distinct_row_count(data) < static_cast<std::size_t>(K))
        throw ValidationError("fit_gmm: degenerate fit, fewer than K distinct rows");

    // overall per-dimension variance sets the regularization scale
    const Eigen::RowVectorXd col_mean = data.colwise().mean();
    const double mean_var =
        (data.rowwise() - col_mean).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1)) /
        static_cast<double>(d);
    const double ridge = options.ridge_factor * std::max(mean_var, 1e-300);

    std::optional<EmRun> best;
    std::string last_error = "no restarts ran";
    for (int r = 0; r < options.n_restarts; ++r) {
        try {
            EmRun run = run_em(data, K, family, ridge, options, derive_seed(seed, r));
            if (!best || run.log_likelihood > best->log_likelihood) best = std::move(run);
        } catch (const DegenerateRun& e) {
            last_error = e.what();
        }
    }
    if (!best)
        throw ValidationError("fit_gmm: degenerate fit on every restart (" + last_error + ")");

    GmmFit fit;
    fit.K = K;
    fit.family = family;
    fit.weights = best->weights;
    fit.means.resize(K, d);
    for (int k = 0; k < K; ++k) {
        fit.means.row(k) = best->components[k].mean.transpose();
        fit.covariances.push_back(best->components[k].cov);
    }
    fit.log_likelihood = best->log_likelihood;
    fit.n_params = gmm_param_count(K, static_cast<int>(d), family);
    fit.responsibilities = best->responsibilities;
    fit.ll_history = best->ll_history;
    return fit;
}

double bic(const GmmFit& fit, int n_rows) {
    if (n_rows < 1) throw std::invalid_argument("bic: n_rows must be >= 1");
    return 2.0 * fit.log_likelihood - fit.n_params * std::log(static_cast<double>(n_rows));
}

ClusterAssignment select_model(const Eigen::MatrixXd& data, int k_min, int k_max,
                               const std::vector<CovFamily>& families, std::uint64_t seed,
                               const EmOptions& options) {
    if (k_min < 1 || k_max < k_min) throw std::invalid_argument("select_model: bad K range");
    if (families.empty()) throw std::invalid_argument("select_model: no families");

    ClusterAssignment out;
    std::optional<GmmFit> best;
    double best_bic = 0.0;
    for (int K = k_min; K <= k_max; ++K) {
        for (std::size_t fi = 0; fi < families.size(); ++fi) {
            const CovFamily family = families[fi];
            BicCandidate cand;
            cand.K = K;
            cand.family = family;
            cand.n_params = gmm_param_count(K, static_cast<int>(data.cols()), family);
            try {
                GmmFit fit =
                    fit_gmm(data, K, family, derive_seed(seed, K, fi), options);
                cand.loglik = fit.log_likelihood;
                cand.bic = bic(fit, static_cast<int>(data.rows()));
                cand.ok = true;
                const bool better =
                    !best || cand.bic > best_bic + 1e-9 ||
                    (std::abs(cand.bic - best_bic) <= 1e-9 &&
                     (cand.n_params < best->n_params ||
                      (cand.n_params == best->n_params && K < best->K)));
                if (better) {
                    best = std::move(fit);
                    best_bic = cand.bic;
                }
            } catch (const std::exception& e) {
                cand.error = e.what();
            }
            out.table.push_back(std::move(cand));
        }
    }
    if (!best) throw ValidationError("select_model: every candidate failed");

    out.fit = std::move(*best);
    out.bic = best_bic;
    out.labels.resize(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        Eigen::Index arg = 0;
        out.fit.responsibilities.row(i).maxCoeff(&arg);
        out.labels[i] = static_cast<int>(arg);
    }
    return out;
}

std::vector<ClassProfile> class_profiles(const std::vector<int>& labels, int n_classes,
                                         const FactorTable& table) {
    if (labels.size() != table.n_rows())
        throw std::invalid_argument("class_profiles: labels do not align with table rows");

    std::vector<ClassProfile> out(n_classes);
    for (int c = 0; c < n_classes; ++c) out[c].class_id = c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes)
            throw std::invalid_argument("class_profiles: label out of range");
        ++out[labels[i]].size;
    }

    auto summarize = [](std::vector<double> vals) {
        ProfileStat s;
        if (!vals.empty()) {
            s.mean = mean(vals);
            s.median = median(std::move(vals));
            s.defined = true;
        }
        return s;
    };

    for (int c = 0; c < n_classes; ++c) {
        std::vector<double> resp;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c && !table.response_missing[i]) resp.push_back(table.response[i]);
        out[c].response_stat = summarize(std::move(resp));
        for (const auto& f : table.factors) {
            std::vector<double> vals;
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (labels[i] == c && !f.missing[i]) vals.push_back(f.values[i]);
            out[c].factor_stats[f.name] = summarize(std::move(vals));
        }
    }
    return out;
}

}  // namespace geofactor
