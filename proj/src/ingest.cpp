#include "geofactor/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "geofactor/csv.hpp"

namespace geofactor {

std::string to_string(FactorGroup g) {
    switch (g) {
        case FactorGroup::disease: return "disease";
        case FactorGroup::built_env: return "built_env";
        case FactorGroup::natural_env: return "natural_env";
        case FactorGroup::non_env: return "non_env";
    }
    return "non_env";
}

FactorGroup factor_group_from_string(const std::string& s) {
    if (s == "disease") return FactorGroup::disease;
    if (s == "built_env") return FactorGroup::built_env;
    if (s == "natural_env") return FactorGroup::natural_env;
    if (s == "non_env") return FactorGroup::non_env;
    throw ValidationError("unknown factor group '" + s + "'");
}

std::optional<std::size_t> FactorTable::factor_index(const std::string& name) const {
    for (std::size_t i = 0; i < factors.size(); ++i)
        if (factors[i].name == name) return i;
    return std::nullopt;
}

const FactorColumn& FactorTable::factor(const std::string& name) const {
    const auto idx = factor_index(name);
    if (!idx) throw ValidationError("unknown factor '" + name + "'");
    return factors[*idx];
}

std::vector<std::size_t> FactorTable::rows_with_response() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_rows(); ++i)
        if (!response_missing[i]) out.push_back(i);
    return out;
}

std::vector<std::size_t> FactorTable::complete_rows(
    const std::vector<std::string>& factor_names) const {
    std::vector<const FactorColumn*> cols;
    cols.reserve(factor_names.size());
    for (const auto& n : factor_names) cols.push_back(&factor(n));
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_rows(); ++i) {
        if (response_missing[i]) continue;
        bool ok = true;
        for (const auto* c : cols)
            if (c->missing[i]) { ok = false; break; }
        if (ok) out.push_back(i);
    }
    return out;
}

void check_table(const FactorTable& table) {
    const std::size_t n = table.n_rows();
    if (table.names.size() != n || table.lat.size() != n || table.lon.size() != n ||
        table.response.size() != n || table.response_missing.size() != n)
        throw ValidationError("table columns have inconsistent lengths");
    std::unordered_set<std::string> seen;
    for (const auto& id : table.ids)
        if (!seen.insert(id).second)
            throw ValidationError("duplicate neighborhood_id '" + id + "'");
    for (std::size_t i = 0; i < n; ++i)
        if (!table.response_missing[i] && table.response[i] < 0.0)
            throw ValidationError("negative response for neighborhood '" + table.ids[i] + "'");
    for (const auto& f : table.factors) {
        if (f.values.size() != n || f.missing.size() != n)
            throw ValidationError("factor '" + f.name + "' has inconsistent length");
        if (f.description.empty())
            throw ValidationError("factor '" + f.name + "' lacks a unit/description");
    }
}

FactorTable load_factor_table(const std::string& path, const TableSchema& schema) {
    const CsvTable csv = read_csv(path);
    const std::size_t id_c = csv.column(schema.id_column);
    const std::size_t name_c = csv.column(schema.name_column);
    const std::size_t lat_c = csv.column(schema.lat_column);
    const std::size_t lon_c = csv.column(schema.lon_column);
    const std::size_t resp_c = csv.column(schema.response_column);

    FactorTable table;
    std::vector<std::size_t> factor_cols;
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
        if (c == id_c || c == name_c || c == lat_c || c == lon_c || c == resp_c) continue;
        factor_cols.push_back(c);
        FactorColumn col;
        col.name = csv.header[c];
        if (auto it = schema.columns.find(col.name); it != schema.columns.end()) {
            col.description = it->second.description.empty() ? col.name : it->second.description;
            col.group = it->second.group;
        } else {
            col.description = col.name;
        }
        table.factors.push_back(std::move(col));
    }

    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string ctx = path + ":" + std::to_string(r + 2);
        table.ids.push_back(row[id_c]);
        table.names.push_back(row[name_c]);
        table.lat.push_back(parse_double_strict(row[lat_c], ctx + " (" + schema.lat_column + ")"));
        table.lon.push_back(parse_double_strict(row[lon_c], ctx + " (" + schema.lon_column + ")"));
        if (row[resp_c].empty()) {
            table.response.push_back(0.0);
            table.response_missing.push_back(1);
        } else {
            table.response.push_back(
                parse_double_strict(row[resp_c], ctx + " (" + schema.response_column + ")"));
            table.response_missing.push_back(0);
        }
        for (std::size_t k = 0; k < factor_cols.size(); ++k) {
            auto& col = table.factors[k];
            const std::string& cell = row[factor_cols[k]];
            if (cell.empty()) {
                col.values.push_back(0.0);
                col.missing.push_back(1);
            } else {
                col.values.push_back(parse_double_strict(cell, ctx + " (" + col.name + ")"));
                col.missing.push_back(0);
            }
        }
    }

    check_table(table);
    return table;
}

void write_factor_table(const FactorTable& table, const std::string& path,
                        const TableSchema& schema) {
    std::vector<std::string> header = {schema.id_column, schema.name_column, schema.lat_column,
                                       schema.lon_column, schema.response_column};
    for (const auto& f : table.factors) header.push_back(f.name);

    std::vector<std::vector<std::string>> rows;
    rows.reserve(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        std::vector<std::string> row = {table.ids[i], table.names[i], format_double(table.lat[i]),
                                        format_double(table.lon[i]),
                                        table.response_missing[i] ? std::string()
                                                                  : format_double(table.response[i])};
        for (const auto& f : table.factors)
            row.push_back(f.missing[i] ? std::string() : format_double(f.values[i]));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

std::vector<FactorMeta> validate_variation(const FactorTable& table, int basis_dim) {
    if (basis_dim < 3)
        throw std::invalid_argument("validate_variation: basis dimension must be >= 3");
    std::vector<FactorMeta> out;
    out.reserve(table.factors.size());
    for (const auto& f : table.factors) {
        std::set<double> distinct;
        for (std::size_t i = 0; i < f.values.size(); ++i)
            if (!f.missing[i]) distinct.insert(f.values[i]);
        FactorMeta meta;
        meta.name = f.name;
        meta.group = f.group;
        meta.unique_value_count = distinct.size();
        meta.variation_sufficient = distinct.size() >= static_cast<std::size_t>(basis_dim);
        out.push_back(std::move(meta));
    }
    return out;
}

FactorTable standardize(const FactorTable& table, const std::vector<std::string>& columns,
                        std::vector<ColumnMoments>* moments) {
    FactorTable out = table;
    if (moments) moments->clear();
    for (const auto& name : columns) {
        const auto idx = out.factor_index(name);
        if (!idx) throw ValidationError("standardize: unknown column '" + name + "'");
        auto& col = out.factors[*idx];
        std::vector<double> present;
        for (std::size_t i = 0; i < col.values.size(); ++i)
            if (!col.missing[i]) present.push_back(col.values[i]);
        const double m = mean(present);
        const double sd = sample_sd(present);
        if (!(sd > 0.0))
            throw ValidationError("standardize: column '" + name + "' has zero variance");
        for (std::size_t i = 0; i < col.values.size(); ++i)
            if (!col.missing[i]) col.values[i] = (col.values[i] - m) / sd;
        if (moments) moments->push_back({name, m, sd});
    }
    return out;
}

FactorTable subset_rows(const FactorTable& table, const std::vector<std::size_t>& rows) {
    FactorTable out;
    out.factors.reserve(table.factors.size());
    for (const auto& f : table.factors) {
        FactorColumn col;
        col.name = f.name;
        col.description = f.description;
        col.group = f.group;
        out.factors.push_back(std::move(col));
    }
    for (std::size_t r : rows) {
        if (r >= table.n_rows()) throw std::out_of_range("subset_rows: bad row index");
        out.ids.push_back(table.ids[r]);
        out.names.push_back(table.names[r]);
        out.lat.push_back(table.lat[r]);
        out.lon.push_back(table.lon[r]);
        out.response.push_back(table.response[r]);
        out.response_missing.push_back(table.response_missing[r]);
        for (std::size_t k = 0; k < table.factors.size(); ++k) {
            out.factors[k].values.push_back(table.factors[k].values[r]);
            out.factors[k].missing.push_back(table.factors[k].missing[r]);
        }
    }
    return out;
}

FactorTable with_factor(const FactorTable& table, FactorColumn column) {
    if (column.values.size() != table.n_rows() || column.missing.size() != table.n_rows())
        throw ValidationError("with_factor: column length does not match table");
    if (table.factor_index(column.name))
        throw ValidationError("with_factor: factor '" + column.name + "' already exists");
    if (column.description.empty()) column.description = column.name;
    FactorTable out = table;
    out.factors.push_back(std::move(column));
    return out;
}

std::vector<FacilityRecord> load_facilities(const std::string& path) {
    const CsvTable csv = read_csv(path);
    const std::size_t id_c = csv.column("facility_id");
    const std::size_t lat_c = csv.column("lat");
    const std::size_t lon_c = csv.column("lon");
    const std::size_t year_c = csv.column("year");
    const std::size_t tep_c = csv.column("tep_value");

    std::vector<FacilityRecord> out;
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string ctx = path + ":" + std::to_string(r + 2);
        const int year = static_cast<int>(parse_double_strict(row[year_c], ctx + " (year)"));
        const double tep = parse_double_strict(row[tep_c], ctx + " (tep_value)");
        if (tep < 0.0)
            throw ValidationError(ctx + ": negative tep_value for facility '" + row[id_c] + "'");
        const auto key = std::make_pair(row[id_c], year);
        auto it = index.find(key);
        if (it == index.end()) {
            FacilityRecord rec;
            rec.facility_id = row[id_c];
            rec.lat = parse_double_strict(row[lat_c], ctx + " (lat)");
            rec.lon = parse_double_strict(row[lon_c], ctx + " (lon)");
            rec.year = year;
            rec.tep_values.push_back(tep);
            index.emplace(key, out.size());
            out.push_back(std::move(rec));
        } else {
            out[it->second].tep_values.push_back(tep);
        }
    }
    return out;
}

std::vector<FacilityRecord> pool_facilities(const std::vector<FacilityRecord>& records) {
    std::vector<FacilityRecord> out;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& rec : records) {
        auto it = index.find(rec.facility_id);
        if (it == index.end()) {
            FacilityRecord pooled = rec;
            pooled.year = 0;
            index.emplace(rec.facility_id, out.size());
            out.push_back(std::move(pooled));
        } else {
            auto& pooled = out[it->second];
            pooled.tep_values.insert(pooled.tep_values.end(), rec.tep_values.begin(),
                                     rec.tep_values.end());
        }
    }
    return out;
}

void check_windrose(const WindRose& rose) {
    if (rose.sectors.empty()) throw ValidationError("wind rose has no sectors");
    auto sorted = rose.sectors;
    std::sort(sorted.begin(), sorted.end(),
              [](const WindSector& a, const WindSector& b) { return a.start_deg < b.start_deg; });
    double total = 0.0;
    double cursor = 0.0;
    for (const auto& s : sorted) {
        if (s.frequency < 0.0 || s.frequency > 1.0)
            throw ValidationError("wind rose frequency outside [0,1]");
        if (std::abs(s.start_deg - cursor) > 1e-9)
            throw ValidationError("wind rose sectors do not tile [0,360): gap or overlap at " +
                                  format_double(s.start_deg));
        if (s.end_deg <= s.start_deg)
            throw ValidationError("wind rose sector with non-positive width");
        cursor = s.end_deg;
        total += s.frequency;
    }
    if (std::abs(cursor - 360.0) > 1e-9)
        throw ValidationError("wind rose sectors do not reach 360");
    if (std::abs(total - 1.0) > 1e-6)
        throw ValidationError("wind rose frequencies sum to " + format_double(total) +
                              ", expected 1");
}

WindRose load_windrose(const std::string& path) {
    const CsvTable csv = read_csv(path);
    const std::size_t s_c = csv.column("sector_start_deg");
    const std::size_t e_c = csv.column("sector_end_deg");
    const std::size_t f_c = csv.column("frequency");
    WindRose rose;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const std::string ctx = path + ":" + std::to_string(r + 2);
        WindSector sec;
        sec.start_deg = parse_double_strict(csv.rows[r][s_c], ctx);
        sec.end_deg = parse_double_strict(csv.rows[r][e_c], ctx);
        sec.frequency = parse_double_strict(csv.rows[r][f_c], ctx);
        rose.sectors.push_back(sec);
    }
    check_windrose(rose);
    return rose;
}

WindRose uniform_windrose(int n_sectors) {
    if (n_sectors < 1) throw std::invalid_argument("uniform_windrose: need >= 1 sector");
    WindRose rose;
    const double width = 360.0 / n_sectors;
    for (int i = 0; i < n_sectors; ++i)
        rose.sectors.push_back({i * width, (i + 1) * width, 1.0 / n_sectors});
    return rose;
}

}  // namespace geofactor
