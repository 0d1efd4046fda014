#pragma once

#include <span>
#include <string>
#include <vector>

#include "geofactor/ingest.hpp"

namespace geofactor {

/// Gaussian falloff of pollutant density with distance, plus the softened
/// log applied to the aggregate.
struct PlumeParams {
    double mu_km = 2.5;     // distance of peak density
    double sigma_km = 1.0;  // falloff scale
    double epsilon = 1.0;   // log softening; keeps zero-exposure risk finite (log eps)
};

void check_params(const PlumeParams& params);  // throws std::invalid_argument

struct RiskScore {
    std::string neighborhood_id;
    double value = 0.0;
};

/// Total toxic equivalency potential of one facility (sum over pollutants).
/// Throws ValidationError on a negative entry.
double facility_tep(const FacilityRecord& facility);

/// Gaussian pdf of distance d_km with mean mu_km and sd sigma_km.
double distance_density(double d_km, const PlumeParams& params);

/// Directional weight: sector frequency at the bearing divided by the
/// frequency a uniform rose would put on that sector, so "no wind data"
/// and a uniform rose both act as the neutral weight 1.
/// Bearing must lie in [0, 360).
double wind_weight(const WindRose& rose, double bearing_deg);

/// Great-circle distance in km on a sphere of radius 6371.0088 km.
double great_circle_km(double lat1, double lon1, double lat2, double lon2);

/// Initial bearing from point 1 toward point 2, degrees in [0, 360).
double initial_bearing_deg(double lat1, double lon1, double lat2, double lon2);

/// log(epsilon + sum_A tep_A * density(dist) * wind(bearing)), the
/// per-location exposure proxy. rose == nullptr means no wind weighting.
double neighborhood_risk(std::span<const FacilityRecord> facilities, double lat, double lon,
                         const WindRose* rose, const PlumeParams& params);

/// neighborhood_risk evaluated at every table centroid.
std::vector<RiskScore> risk_scores(std::span<const FacilityRecord> facilities,
                                   const FactorTable& table, const WindRose* rose,
                                   const PlumeParams& params);

struct SigmaCandidate {
    double sigma_km = 0.0;
    double correlation = 0.0;  // NaN when undefined for this candidate
};

struct SigmaTuning {
    double best_sigma = 0.0;
    std::vector<SigmaCandidate> candidates;
};

/// Picks the candidate sigma whose risk scores correlate best (Pearson)
/// with the table's response; ties go to the smaller sigma. Needs >= 3
/// rows with a response; a constant response is an error.
SigmaTuning tune_sigma(std::span<const FacilityRecord> facilities, const FactorTable& table,
                       const WindRose* rose, const std::vector<int>& candidates,
                       const PlumeParams& base = {});

}  // namespace geofactor
