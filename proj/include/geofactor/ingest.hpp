#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geofactor/common.hpp"

namespace geofactor {

enum class FactorGroup { disease, built_env, natural_env, non_env };

std::string to_string(FactorGroup g);
FactorGroup factor_group_from_string(const std::string& s);

struct FactorColumn {
    std::string name;
    std::string description;  // unit/description, never empty (defaults to name)
    FactorGroup group = FactorGroup::non_env;
    std::vector<double> values;    // aligned with table rows; undefined where missing
    std::vector<std::uint8_t> missing;
};

/// Per-neighborhood response + factor matrix. Immutable by convention once
/// built; transforms return fresh tables.
struct FactorTable {
    std::vector<std::string> ids;    // unique neighborhood ids
    std::vector<std::string> names;
    std::vector<double> lat;
    std::vector<double> lon;
    std::vector<double> response;    // rate per 100,000; >= 0 where present
    std::vector<std::uint8_t> response_missing;
    std::vector<FactorColumn> factors;

    std::size_t n_rows() const { return ids.size(); }
    std::optional<std::size_t> factor_index(const std::string& name) const;
    const FactorColumn& factor(const std::string& name) const;  // throws ValidationError

    /// Row indices with a usable (non-missing) response.
    std::vector<std::size_t> rows_with_response() const;
    /// Rows where the response and every named factor are present.
    std::vector<std::size_t> complete_rows(const std::vector<std::string>& factor_names) const;
};

/// Structural invariants: unique ids, non-negative responses, aligned
/// column lengths, non-empty descriptions. Throws ValidationError.
void check_table(const FactorTable& table);

struct ColumnInfo {
    std::string description;
    FactorGroup group = FactorGroup::non_env;
};

struct TableSchema {
    std::string id_column = "neighborhood_id";
    std::string name_column = "name";
    std::string lat_column = "lat";
    std::string lon_column = "lon";
    std::string response_column = "response";
    std::map<std::string, ColumnInfo> columns;  // optional metadata per factor
};

/// Loads `neighborhood_id,name,lat,lon,response,<factor...>`.
/// Empty cell = missing (allowed for response and factors only).
FactorTable load_factor_table(const std::string& path, const TableSchema& schema = {});
void write_factor_table(const FactorTable& table, const std::string& path,
                        const TableSchema& schema = {});

struct FactorMeta {
    std::string name;
    FactorGroup group = FactorGroup::non_env;
    std::size_t unique_value_count = 0;
    bool variation_sufficient = false;
};

/// Flags factors with fewer than `basis_dim` distinct non-missing values;
/// those cannot support a smooth with that many degrees of freedom.
/// Report-only: nothing is removed from the table. Requires basis_dim >= 3.
std::vector<FactorMeta> validate_variation(const FactorTable& table, int basis_dim);

struct ColumnMoments {
    std::string name;
    double mean = 0.0;
    double sd = 1.0;
};

/// Z-scores the named columns over their non-missing rows (n-1 sd).
/// Zero-variance columns raise ValidationError naming the column.
FactorTable standardize(const FactorTable& table, const std::vector<std::string>& columns,
                        std::vector<ColumnMoments>* moments = nullptr);

/// Copy restricted to the given rows (order preserved, duplicates allowed).
FactorTable subset_rows(const FactorTable& table, const std::vector<std::size_t>& rows);

/// Appends a derived factor column; row count must match.
FactorTable with_factor(const FactorTable& table, FactorColumn column);

// ---- pollution-source inputs ----

struct FacilityRecord {
    std::string facility_id;
    double lat = 0.0;
    double lon = 0.0;
    int year = 0;  // 0 = pooled across years
    std::vector<double> tep_values;  // toxic equivalency potentials, >= 0
};

/// `facility_id,lat,lon,year,pollutant,tep_value`, one row per pollutant.
/// Produces one record per (facility_id, year).
std::vector<FacilityRecord> load_facilities(const std::string& path);

/// Merges all vintages of a facility into one record (TEP lists
/// concatenated, year set to 0). First-seen order preserved.
std::vector<FacilityRecord> pool_facilities(const std::vector<FacilityRecord>& records);

struct WindSector {
    double start_deg = 0.0;
    double end_deg = 0.0;
    double frequency = 0.0;  // in [0,1]
};

/// Directional frequency histogram. Sectors must tile [0, 360) exactly
/// and frequencies must sum to 1 +- 1e-6.
struct WindRose {
    std::vector<WindSector> sectors;
};

void check_windrose(const WindRose& rose);
WindRose load_windrose(const std::string& path);
WindRose uniform_windrose(int n_sectors);

}  // namespace geofactor
