#include "geofactor/plume.hpp"

#include <cmath>
#include <limits>

namespace geofactor {

namespace {

constexpr double kEarthRadiusKm = 6371.0088;

double deg2rad(double d) { return d * M_PI / 180.0; }

}  // namespace

void check_params(const PlumeParams& params) {
    if (params.mu_km < 0.0) throw std::invalid_argument("plume: mu_km must be >= 0");
    if (!(params.sigma_km > 0.0)) throw std::invalid_argument("plume: sigma_km must be > 0");
    if (!(params.epsilon > 0.0)) throw std::invalid_argument("plume: epsilon must be > 0");
}

double facility_tep(const FacilityRecord& facility) {
    double total = 0.0;
    for (double v : facility.tep_values) {
        if (v < 0.0)
            throw ValidationError("facility '" + facility.facility_id +
                                  "' has a negative TEP entry");
        total += v;
    }
    return total;
}

double distance_density(double d_km, const PlumeParams& params) {
    if (d_km < 0.0) throw std::invalid_argument("distance_density: d_km must be >= 0");
    check_params(params);
    const double z = (d_km - params.mu_km) / params.sigma_km;
    return std::exp(-0.5 * z * z) / (params.sigma_km * std::sqrt(2.0 * M_PI));
}

double wind_weight(const WindRose& rose, double bearing_deg) {
    if (bearing_deg < 0.0 || bearing_deg >= 360.0)
        throw std::invalid_argument("wind_weight: bearing must be in [0, 360)");
    check_windrose(rose);
    for (const auto& s : rose.sectors) {
        if (bearing_deg >= s.start_deg && bearing_deg < s.end_deg) {
            const double uniform = (s.end_deg - s.start_deg) / 360.0;
            return s.frequency / uniform;
        }
    }
    throw ValidationError("wind_weight: no sector contains bearing " +
                          format_double(bearing_deg));
}

double great_circle_km(double lat1, double lon1, double lat2, double lon2) {
    const double p1 = deg2rad(lat1), p2 = deg2rad(lat2);
    const double dp = deg2rad(lat2 - lat1), dl = deg2rad(lon2 - lon1);
    const double a =
        std::sin(dp / 2) * std::sin(dp / 2) +
        std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
    return 2.0 * kEarthRadiusKm * std::atan2(std::sqrt(a), std::sqrt(1.0 - a));
}

double initial_bearing_deg(double lat1, double lon1, double lat2, double lon2) {
    const double p1 = deg2rad(lat1), p2 = deg2rad(lat2);
    const double dl = deg2rad(lon2 - lon1);
    const double y = std::sin(dl) * std::cos(p2);
    const double x = std::cos(p1) * std::sin(p2) - std::sin(p1) * std::cos(p2) * std::cos(dl);
    double deg = std::atan2(y, x) * 180.0 / M_PI;
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0) deg -= 360.0;
    return deg;
}

double neighborhood_risk(std::span<const FacilityRecord> facilities, double lat, double lon,
                         const WindRose* rose, const PlumeParams& params) {
    check_params(params);
    if (rose) check_windrose(*rose);
    double total = 0.0;
    for (const auto& fac : facilities) {
        const double tep = facility_tep(fac);
        const double d = great_circle_km(fac.lat, fac.lon, lat, lon);
        double w = 1.0;
        if (rose) {
            // coincident source and target have no bearing; leave neutral
            if (d > 1e-12)
                w = wind_weight(*rose, initial_bearing_deg(fac.lat, fac.lon, lat, lon));
        }
        total += tep * distance_density(d, params) * w;
    }
    return std::log(params.epsilon + total);
}

std::vector<RiskScore> risk_scores(std::span<const FacilityRecord> facilities,
                                   const FactorTable& table, const WindRose* rose,
                                   const PlumeParams& params) {
    std::vector<RiskScore> out;
    out.reserve(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i)
        out.push_back({table.ids[i],
                       neighborhood_risk(facilities, table.lat[i], table.lon[i], rose, params)});
    return out;
}

SigmaTuning tune_sigma(std::span<const FacilityRecord> facilities, const FactorTable& table,
                       const WindRose* rose, const std::vector<int>& candidates,
                       const PlumeParams& base) {
    if (candidates.empty()) throw std::invalid_argument("tune_sigma: no candidates");
    const auto rows = table.rows_with_response();
    if (rows.size() < 3)
        throw ValidationError("tune_sigma: need >= 3 rows with a response, have " +
                              std::to_string(rows.size()));
    std::vector<double> response;
    response.reserve(rows.size());
    for (std::size_t r : rows) response.push_back(table.response[r]);
    if (!(sample_sd(response) > 0.0))
        throw ValidationError("tune_sigma: response is constant; correlation undefined");

    SigmaTuning result;
    double best_corr = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (int cand : candidates) {
        PlumeParams params = base;
        params.sigma_km = static_cast<double>(cand);
        std::vector<double> risk;
        risk.reserve(rows.size());
        for (std::size_t r : rows)
            risk.push_back(
                neighborhood_risk(facilities, table.lat[r], table.lon[r], rose, params));
        const double corr = pearson(risk, response);
        result.candidates.push_back({params.sigma_km, corr});
        if (std::isnan(corr)) continue;
        if (!any || corr > best_corr ||
            (corr == best_corr && params.sigma_km < result.best_sigma)) {
            best_corr = corr;
            result.best_sigma = params.sigma_km;
            any = true;
        }
    }
    if (!any)
        throw ValidationError("tune_sigma: correlation undefined for every candidate");
    return result;
}

}  // namespace geofactor
