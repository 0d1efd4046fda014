#include "geofactor/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <nlohmann/json.hpp>

#include "geofactor/csv.hpp"
#include "geofactor/dimred.hpp"
#include "geofactor/synthetic.hpp"
#include "geofactor/version.hpp"

namespace geofactor {

using ordered_json = nlohmann::ordered_json;

namespace {

namespace fs = std::filesystem;

// ---- config ----

RunConfig parse_config(const ordered_json& j, const std::string& origin) {
    RunConfig cfg;
    try {
        const auto& inputs = j.at("inputs");
        cfg.neighborhoods_path = inputs.value("neighborhoods", "");
        cfg.synthetic_spec_path = inputs.value("synthetic_spec", "");
        cfg.facilities_path = inputs.value("facilities", "");
        cfg.windrose_path = inputs.value("windrose", "");

        if (j.contains("response")) cfg.schema.response_column = j.at("response").get<std::string>();
        if (j.contains("cluster_features"))
            cfg.cluster_features = j.at("cluster_features").get<std::vector<std::string>>();
        if (j.contains("exclusivity_groups")) {
            for (const auto& jg : j.at("exclusivity_groups")) {
                GroupConfig g;
                g.group.name = jg.at("name").get<std::string>();
                g.group.members = jg.at("members").get<std::vector<std::string>>();
                const std::string scope = jg.value("scope", "always");
                if (scope == "always") g.scope = GroupConfig::Scope::always;
                else if (scope == "all_neighborhoods") g.scope = GroupConfig::Scope::all_neighborhoods;
                else throw ValidationError("unknown group scope '" + scope + "'");
                cfg.groups.push_back(std::move(g));
            }
        }
        if (j.contains("plume")) {
            const auto& jp = j.at("plume");
            cfg.plume.params.mu_km = jp.value("mu_km", cfg.plume.params.mu_km);
            cfg.plume.params.sigma_km = jp.value("sigma_km", cfg.plume.params.sigma_km);
            cfg.plume.params.epsilon = jp.value("epsilon", cfg.plume.params.epsilon);
            cfg.plume.tune = jp.value("tune", false);
            if (jp.contains("sigma_candidates"))
                cfg.plume.sigma_candidates = jp.at("sigma_candidates").get<std::vector<int>>();
            cfg.plume.risk_factor_name = jp.value("risk_factor_name", cfg.plume.risk_factor_name);
        }
        if (j.contains("gam")) {
            const auto& jg = j.at("gam");
            cfg.gam.basis_dim = jg.value("basis_dim", cfg.gam.basis_dim);
            cfg.gam.link = link_from_string(jg.value("link", "identity"));
            cfg.gam.grid.min_value = jg.value("lambda_min", cfg.gam.grid.min_value);
            cfg.gam.grid.max_value = jg.value("lambda_max", cfg.gam.grid.max_value);
            cfg.gam.grid.points = jg.value("lambda_points", cfg.gam.grid.points);
            cfg.gam.min_rows = jg.value("min_rows", cfg.gam.min_rows);
        }
        if (j.contains("selection")) {
            const auto& js = j.at("selection");
            cfg.selection.p_threshold = js.value("p_threshold", cfg.selection.p_threshold);
            cfg.selection.max_size = js.value("max_size", cfg.selection.max_size);
            cfg.selection.budget = js.value("budget", cfg.selection.budget);
            cfg.min_multifactor_rows =
                js.value("min_multifactor_rows", cfg.min_multifactor_rows);
        }
        cfg.pca_components = j.value("pca_components", cfg.pca_components);
        if (j.contains("cluster")) {
            const auto& jc = j.at("cluster");
            cfg.cluster.k_min = jc.value("k_min", cfg.cluster.k_min);
            cfg.cluster.k_max = jc.value("k_max", cfg.cluster.k_max);
            if (jc.contains("families")) {
                cfg.cluster.families.clear();
                for (const auto& f : jc.at("families"))
                    cfg.cluster.families.push_back(cov_family_from_string(f.get<std::string>()));
            }
            cfg.cluster.em.n_restarts = jc.value("restarts", cfg.cluster.em.n_restarts);
        }
        if (!j.contains("seed"))
            throw ValidationError("config requires an explicit seed");
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.output_dir = j.value("output_dir", cfg.output_dir);
    } catch (const ordered_json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }

    if (cfg.neighborhoods_path.empty() == cfg.synthetic_spec_path.empty())
        throw ValidationError(origin +
                              ": exactly one of inputs.neighborhoods / inputs.synthetic_spec "
                              "must be set");
    cfg.selection.gam = cfg.gam;
    return cfg;
}

}  // namespace

RunConfig run_config_from_json(const std::string& text, const std::string& origin) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const ordered_json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    return parse_config(j, origin);
}

RunConfig run_config_from_json_file(const std::string& path) {
    return run_config_from_json(read_text_file(path), path);
}

std::string canonical_config_json(const RunConfig& cfg) {
    ordered_json j;
    j["inputs"] = {{"neighborhoods", cfg.neighborhoods_path},
                   {"synthetic_spec", cfg.synthetic_spec_path},
                   {"facilities", cfg.facilities_path},
                   {"windrose", cfg.windrose_path}};
    j["response"] = cfg.schema.response_column;
    j["cluster_features"] = cfg.cluster_features;
    j["exclusivity_groups"] = ordered_json::array();
    for (const auto& g : cfg.groups)
        j["exclusivity_groups"].push_back(
            {{"name", g.group.name},
             {"members", g.group.members},
             {"scope", g.scope == GroupConfig::Scope::always ? "always" : "all_neighborhoods"}});
    j["plume"] = {{"mu_km", cfg.plume.params.mu_km},
                  {"sigma_km", cfg.plume.params.sigma_km},
                  {"epsilon", cfg.plume.params.epsilon},
                  {"tune", cfg.plume.tune},
                  {"sigma_candidates", cfg.plume.sigma_candidates},
                  {"risk_factor_name", cfg.plume.risk_factor_name}};
    j["gam"] = {{"basis_dim", cfg.gam.basis_dim},
                {"link", to_string(cfg.gam.link)},
                {"lambda_min", cfg.gam.grid.min_value},
                {"lambda_max", cfg.gam.grid.max_value},
                {"lambda_points", cfg.gam.grid.points},
                {"min_rows", cfg.gam.min_rows}};
    j["selection"] = {{"p_threshold", cfg.selection.p_threshold},
                      {"max_size", cfg.selection.max_size},
                      {"budget", cfg.selection.budget},
                      {"min_multifactor_rows", cfg.min_multifactor_rows}};
    j["pca_components"] = cfg.pca_components;
    ordered_json families = ordered_json::array();
    for (const auto f : cfg.cluster.families) families.push_back(to_string(f));
    j["cluster"] = {{"k_min", cfg.cluster.k_min},
                    {"k_max", cfg.cluster.k_max},
                    {"families", families},
                    {"restarts", cfg.cluster.em.n_restarts}};
    j["seed"] = cfg.seed;
    return j.dump();
}

std::string config_hash(const RunConfig& cfg) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_config_json(cfg))));
    return buf;
}

namespace {

// ---- buffered stage output: all files land at stage end or not at all ----

struct StageFiles {
    std::vector<std::pair<std::string, std::string>> files;

    void add(const std::string& relpath, const std::string& content) {
        files.emplace_back(relpath, content);
    }
    void add_csv(const std::string& relpath, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
        std::string out;
        auto append_row = [&out](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) out += ',';
                out += csv_escape(r[i]);
            }
            out += '\n';
        };
        append_row(header);
        for (const auto& r : rows) append_row(r);
        add(relpath, out);
    }
    void add_json(const std::string& relpath, const ordered_json& j) {
        add(relpath, j.dump(2) + "\n");
    }
    void flush(const std::string& out_dir) const {
        for (const auto& [rel, content] : files)
            write_text_file((fs::path(out_dir) / rel).string(), content);
    }
};

std::string artifact_path(const RunConfig& cfg, const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
}

void require_artifact(const RunConfig& cfg, const std::string& name, const std::string& stage) {
    if (!fs::exists(artifact_path(cfg, name)))
        throw ValidationError("expected file '" + artifact_path(cfg, name) +
                              "' not found; run the " + stage + " stage first");
}

// ---- shared loading helpers ----

FactorTable load_input_table(const RunConfig& cfg) {
    if (!cfg.synthetic_spec_path.empty()) {
        const auto spec = synthetic_spec_from_json_file(cfg.synthetic_spec_path);
        return generate_synthetic(spec).table;
    }
    return load_factor_table(cfg.neighborhoods_path, cfg.schema);
}

FactorTable load_ingested(const RunConfig& cfg) {
    require_artifact(cfg, "ingested.csv", "ingest");
    return load_factor_table(artifact_path(cfg, "ingested.csv"), cfg.schema);
}

/// The table downstream stages analyze: ingested rows plus the pollution
/// risk column when the pollution stage has run.
FactorTable analysis_table(const RunConfig& cfg) {
    FactorTable table = load_ingested(cfg);
    const auto risk_path = artifact_path(cfg, "pollution_risk.csv");
    if (fs::exists(risk_path)) {
        const CsvTable csv = read_csv(risk_path);
        const std::size_t id_c = csv.column("neighborhood_id");
        const std::size_t risk_c = csv.column("risk");
        std::map<std::string, double> risk;
        for (std::size_t r = 0; r < csv.rows.size(); ++r)
            risk[csv.rows[r][id_c]] =
                parse_double_strict(csv.rows[r][risk_c], risk_path + ":" + std::to_string(r + 2));
        FactorColumn col;
        col.name = cfg.plume.risk_factor_name;
        col.description = "wind-weighted industrial pollution risk (log-scale)";
        col.group = FactorGroup::built_env;
        for (std::size_t i = 0; i < table.n_rows(); ++i) {
            auto it = risk.find(table.ids[i]);
            if (it == risk.end())
                throw ValidationError(risk_path + ": no risk value for neighborhood '" +
                                      table.ids[i] + "'");
            col.values.push_back(it->second);
            col.missing.push_back(0);
        }
        table = with_factor(table, std::move(col));
    }
    return table;
}

std::vector<std::string> sufficient_factors(const FactorTable& table, int basis_dim) {
    std::vector<std::string> out;
    for (const auto& meta : validate_variation(table, basis_dim))
        if (meta.variation_sufficient) out.push_back(meta.name);
    return out;
}

struct PlumeChoice {
    PlumeParams params;
    std::optional<SigmaTuning> tuning;
};

PlumeChoice choose_plume_params(const RunConfig& cfg, const FactorTable& table,
                                const std::vector<FacilityRecord>& facilities,
                                const WindRose* rose) {
    PlumeChoice choice;
    choice.params = cfg.plume.params;
    if (cfg.plume.tune) {
        choice.tuning =
            tune_sigma(facilities, table, rose, cfg.plume.sigma_candidates, cfg.plume.params);
        choice.params.sigma_km = choice.tuning->best_sigma;
    }
    return choice;
}

struct PollutionInputs {
    std::vector<FacilityRecord> facilities;  // pooled across vintages
    std::optional<WindRose> rose;
};

PollutionInputs load_pollution_inputs(const RunConfig& cfg) {
    PollutionInputs in;
    in.facilities = pool_facilities(load_facilities(cfg.facilities_path));
    if (!cfg.windrose_path.empty()) in.rose = load_windrose(cfg.windrose_path);
    return in;
}

// ---- JSON builders ----

ordered_json subset_score_json(const SubsetScore& s) {
    ordered_json j;
    j["factors"] = s.factors;
    j["fit_ok"] = s.fit_ok;
    if (!s.fit_ok) {
        j["error"] = s.error;
        return j;
    }
    j["deviance_explained"] = s.deviance_explained;
    j["all_significant"] = s.all_significant;
    ordered_json terms = ordered_json::array();
    for (const auto& t : s.terms)
        terms.push_back(
            {{"factor", t.name}, {"edf", t.edf}, {"p_value", t.p_value}, {"lambda", t.lambda}});
    j["terms"] = terms;
    return j;
}

ordered_json selection_result_json(const SelectionResult& r) {
    ordered_json j;
    j["mode"] = to_string(r.mode);
    j["exhaustive"] = r.exhaustive;
    j["winner"] = r.winner ? subset_score_json(*r.winner) : ordered_json(nullptr);
    ordered_json ranked = ordered_json::array();
    for (const auto& s : r.ranked) ranked.push_back(subset_score_json(s));
    j["ranked"] = ranked;
    return j;
}

ordered_json gamfit_json(const GamFit& fit) {
    ordered_json j;
    j["link"] = to_string(fit.link);
    j["n_obs"] = fit.n_obs;
    j["intercept"] = fit.intercept;
    j["deviance_explained"] = fit.deviance_explained;
    j["hat_trace"] = fit.hat_trace;
    j["scale"] = fit.scale;
    j["gcv"] = fit.gcv;
    ordered_json terms = ordered_json::array();
    for (const auto& t : fit.terms)
        terms.push_back({{"factor", t.name},
                         {"edf", t.edf},
                         {"p_value", t.p_value},
                         {"lambda", t.lambda},
                         {"basis_dim", t.basis_dim}});
    j["terms"] = terms;
    return j;
}

// ---- stage cores (throwing) ----

void stage_ingest(const RunConfig& cfg) {
    FactorTable raw = load_input_table(cfg);
    // rows without a response carry no signal for any downstream fit
    const FactorTable table = subset_rows(raw, raw.rows_with_response());
    if (table.n_rows() == 0) throw ValidationError("no rows with a response");
    const auto meta = validate_variation(table, cfg.gam.basis_dim);

    StageFiles out;
    {
        std::vector<std::string> header = {cfg.schema.id_column, cfg.schema.name_column,
                                           cfg.schema.lat_column, cfg.schema.lon_column,
                                           cfg.schema.response_column};
        for (const auto& f : table.factors) header.push_back(f.name);
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < table.n_rows(); ++i) {
            std::vector<std::string> row = {table.ids[i], table.names[i],
                                            format_double(table.lat[i]),
                                            format_double(table.lon[i]),
                                            format_double(table.response[i])};
            for (const auto& f : table.factors)
                row.push_back(f.missing[i] ? std::string() : format_double(f.values[i]));
            rows.push_back(std::move(row));
        }
        out.add_csv("ingested.csv", header, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& m : meta)
            rows.push_back({m.name, to_string(m.group), std::to_string(m.unique_value_count),
                            m.variation_sufficient ? "true" : "false"});
        out.add_csv("factor_meta.csv", {"factor", "group", "unique_values", "variation_sufficient"},
                    rows);
    }
    out.flush(cfg.output_dir);
}

void stage_pollution(const RunConfig& cfg) {
    if (cfg.facilities_path.empty())
        throw ValidationError("pollution stage requires inputs.facilities");
    const FactorTable table = load_ingested(cfg);
    const PollutionInputs in = load_pollution_inputs(cfg);
    const WindRose* rose = in.rose ? &*in.rose : nullptr;
    const PlumeChoice choice = choose_plume_params(cfg, table, in.facilities, rose);
    const auto scores = risk_scores(in.facilities, table, rose, choice.params);

    StageFiles out;
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : scores) rows.push_back({s.neighborhood_id, format_double(s.value)});
    out.add_csv("pollution_risk.csv", {"neighborhood_id", "risk"}, rows);
    out.flush(cfg.output_dir);
}

void stage_scan(const RunConfig& cfg) {
    const FactorTable table = analysis_table(cfg);
    std::vector<std::string> factors;
    for (const auto& f : table.factors) factors.push_back(f.name);
    const auto scores = single_factor_scan(table, factors, cfg.selection);

    ordered_json j;
    j["schema_version"] = 1;
    ordered_json ranked = ordered_json::array();
    for (const auto& s : scores) ranked.push_back(subset_score_json(s));
    j["ranked"] = ranked;

    StageFiles out;
    out.add_json("scan.json", j);
    out.flush(cfg.output_dir);
}

struct ClusterInputs {
    std::vector<std::string> features;
    std::vector<std::size_t> rows;  // analysis-table rows that entered clustering
    Eigen::MatrixXd matrix;         // standardized feature matrix
};

ClusterInputs cluster_inputs(const RunConfig& cfg, const FactorTable& table) {
    ClusterInputs in;
    in.features = cfg.cluster_features.empty() ? sufficient_factors(table, cfg.gam.basis_dim)
                                               : cfg.cluster_features;
    if (in.features.empty()) throw ValidationError("no variation-sufficient clustering features");
    in.rows = table.complete_rows(in.features);
    if (in.rows.size() < 2) throw ValidationError("fewer than 2 rows with complete features");
    const FactorTable sub = standardize(subset_rows(table, in.rows), in.features);
    in.matrix.resize(in.rows.size(), in.features.size());
    for (std::size_t k = 0; k < in.features.size(); ++k) {
        const auto& col = sub.factor(in.features[k]);
        for (std::size_t i = 0; i < in.rows.size(); ++i) in.matrix(i, k) = col.values[i];
    }
    return in;
}

void stage_cluster(const RunConfig& cfg) {
    const FactorTable table = analysis_table(cfg);
    const ClusterInputs in = cluster_inputs(cfg, table);

    const PcaModel pca = fit_pca(in.matrix);
    const int n_comp = std::min<int>(cfg.pca_components, static_cast<int>(pca.components.cols()));
    const Eigen::MatrixXd scores = project(pca, in.matrix, n_comp);
    const ClusterAssignment assignment =
        select_model(scores, cfg.cluster.k_min, cfg.cluster.k_max, cfg.cluster.families,
                     cfg.seed, cfg.cluster.em);

    StageFiles out;
    {
        std::vector<std::string> header = {"neighborhood_id"};
        for (int c = 1; c <= n_comp; ++c) header.push_back("pc" + std::to_string(c));
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < in.rows.size(); ++i) {
            std::vector<std::string> row = {table.ids[in.rows[i]]};
            for (int c = 0; c < n_comp; ++c) row.push_back(format_double(scores(i, c)));
            rows.push_back(std::move(row));
        }
        out.add_csv("pca_scores.csv", header, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < in.rows.size(); ++i)
            rows.push_back({table.ids[in.rows[i]], std::to_string(assignment.labels[i])});
        out.add_csv("clusters.csv", {"neighborhood_id", "class_label"}, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : assignment.table) {
            rows.push_back({std::to_string(c.K), to_string(c.family),
                            c.ok ? format_double(c.bic) : std::string(),
                            c.ok ? format_double(c.loglik) : std::string(),
                            std::to_string(c.n_params)});
        }
        out.add_csv("bic_table.csv", {"K", "family", "bic", "loglik", "n_params"}, rows);
    }
    out.flush(cfg.output_dir);
}

std::vector<ExclusivityGroup> groups_for(const RunConfig& cfg, bool all_neighborhoods) {
    std::vector<ExclusivityGroup> out;
    for (const auto& g : cfg.groups)
        if (g.scope == GroupConfig::Scope::always || all_neighborhoods)
            out.push_back(g.group);
    return out;
}

std::map<std::string, int> load_labels(const RunConfig& cfg) {
    require_artifact(cfg, "clusters.csv", "cluster");
    const auto path = artifact_path(cfg, "clusters.csv");
    const CsvTable csv = read_csv(path);
    const std::size_t id_c = csv.column("neighborhood_id");
    const std::size_t lab_c = csv.column("class_label");
    std::map<std::string, int> out;
    for (std::size_t r = 0; r < csv.rows.size(); ++r)
        out[csv.rows[r][id_c]] = static_cast<int>(
            parse_double_strict(csv.rows[r][lab_c], path + ":" + std::to_string(r + 2)));
    return out;
}

void stage_select(const RunConfig& cfg) {
    const FactorTable table = analysis_table(cfg);
    const auto labels = load_labels(cfg);

    ordered_json j;
    j["schema_version"] = 1;

    {
        const auto factors = sufficient_factors(table, cfg.gam.basis_dim);
        if (factors.empty()) throw ValidationError("no variation-sufficient factors to select from");
        const auto result =
            search_best_group(table, factors, groups_for(cfg, true), cfg.selection);
        j["all_neighborhoods"] = selection_result_json(result);
    }

    int n_classes = 0;
    for (const auto& [id, label] : labels) n_classes = std::max(n_classes, label + 1);
    ordered_json classes = ordered_json::array();
    for (int c = 0; c < n_classes; ++c) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < table.n_rows(); ++i) {
            auto it = labels.find(table.ids[i]);
            if (it != labels.end() && it->second == c) rows.push_back(i);
        }
        ordered_json jc;
        jc["label"] = c;
        jc["size"] = rows.size();
        const FactorTable class_table = subset_rows(table, rows);
        SelectionConfig sel = cfg.selection;
        if (static_cast<int>(rows.size()) < cfg.min_multifactor_rows) sel.max_size = 1;
        std::vector<std::string> factors;
        if (static_cast<int>(rows.size()) >= cfg.gam.min_rows)
            factors = sufficient_factors(class_table, cfg.gam.basis_dim);
        if (factors.empty()) {
            jc["skipped"] = true;
            jc["reason"] = "class too small for any smooth fit";
        } else {
            jc["skipped"] = false;
            const auto result =
                search_best_group(class_table, factors, groups_for(cfg, false), sel);
            jc["selection"] = selection_result_json(result);
        }
        classes.push_back(std::move(jc));
    }
    j["classes"] = classes;

    StageFiles out;
    out.add_json("selection.json", j);
    out.flush(cfg.output_dir);
}

void stage_fit(const RunConfig& cfg, const std::vector<std::string>& factors) {
    if (factors.empty()) throw std::invalid_argument("fit stage: no factors given");
    const FactorTable table = analysis_table(cfg);
    const GamFit fit = fit_gam(table, factors, cfg.gam);

    StageFiles out;
    out.add_json("gamfit.json", gamfit_json(fit));
    for (const auto& term : fit.terms) {
        const SmoothCurve curve = smooth_curve(fit, term.name);
        std::vector<std::vector<std::string>> rows;
        for (Eigen::Index i = 0; i < curve.x.size(); ++i)
            rows.push_back({format_double(curve.x(i)), format_double(curve.fit(i)),
                            format_double(curve.lower(i)), format_double(curve.upper(i))});
        out.add_csv("curves/" + term.name + ".csv", {"x", "fit", "lo", "hi"}, rows);
    }
    out.flush(cfg.output_dir);
}

ordered_json read_json_artifact(const RunConfig& cfg, const std::string& name) {
    return ordered_json::parse(read_text_file(artifact_path(cfg, name)));
}

void write_report(const RunConfig& cfg) {
    const FactorTable table = analysis_table(cfg);

    ordered_json report;
    report["schema_version"] = 1;
    report["generator"] = {{"name", "geofactor"},
                           {"version", kVersion},
                           {"config_hash", config_hash(cfg)},
                           {"seed", cfg.seed}};
    report["inputs"] = {{"neighborhoods", cfg.neighborhoods_path},
                        {"synthetic_spec", cfg.synthetic_spec_path},
                        {"facilities", cfg.facilities_path},
                        {"windrose", cfg.windrose_path}};
    report["table"] = {{"n_rows", table.n_rows()}, {"n_factors", table.factors.size()}};

    ordered_json variation = ordered_json::array();
    for (const auto& m : validate_variation(table, cfg.gam.basis_dim))
        variation.push_back({{"factor", m.name},
                             {"group", to_string(m.group)},
                             {"unique_values", m.unique_value_count},
                             {"variation_sufficient", m.variation_sufficient}});
    report["variation"] = variation;

    if (!cfg.facilities_path.empty()) {
        const PollutionInputs in = load_pollution_inputs(cfg);
        const WindRose* rose = in.rose ? &*in.rose : nullptr;
        const PlumeChoice choice = choose_plume_params(cfg, table, in.facilities, rose);
        ordered_json jp = {{"enabled", true},
                           {"mu_km", choice.params.mu_km},
                           {"sigma_km", choice.params.sigma_km},
                           {"epsilon", choice.params.epsilon},
                           {"wind_weighted", rose != nullptr},
                           {"n_facilities", in.facilities.size()}};
        if (choice.tuning) {
            ordered_json jt = ordered_json::array();
            for (const auto& c : choice.tuning->candidates)
                jt.push_back({{"sigma_km", c.sigma_km}, {"correlation", c.correlation}});
            jp["tuning"] = jt;
        }
        report["pollution"] = jp;
    } else {
        report["pollution"] = {{"enabled", false}};
    }

    report["scan"] = read_json_artifact(cfg, "scan.json")["ranked"];

    {
        const ClusterInputs in = cluster_inputs(cfg, table);
        const PcaModel pca = fit_pca(in.matrix);
        const int n_comp =
            std::min<int>(cfg.pca_components, static_cast<int>(pca.components.cols()));
        const auto labels = load_labels(cfg);
        int n_classes = 0;
        for (const auto& [id, label] : labels) n_classes = std::max(n_classes, label + 1);

        std::vector<int> row_labels(table.n_rows(), -1);
        std::vector<std::size_t> labeled_rows;
        for (std::size_t i = 0; i < table.n_rows(); ++i) {
            auto it = labels.find(table.ids[i]);
            if (it != labels.end()) {
                row_labels[i] = it->second;
                labeled_rows.push_back(i);
            }
        }
        std::vector<int> sub_labels;
        for (std::size_t i : labeled_rows) sub_labels.push_back(row_labels[i]);
        const auto profiles =
            class_profiles(sub_labels, n_classes, subset_rows(table, labeled_rows));

        // display letters by ascending response mean: A = lowest-rate class
        std::vector<int> order(n_classes);
        for (int c = 0; c < n_classes; ++c) order[c] = c;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return profiles[a].response_stat.mean < profiles[b].response_stat.mean;
        });
        std::vector<std::string> display(n_classes);
        for (int rank = 0; rank < n_classes; ++rank)
            display[order[rank]] = std::string(1, static_cast<char>('A' + rank));

        ordered_json jc;
        jc["n_classes"] = n_classes;
        jc["pca_components"] = n_comp;
        jc["pca_variance_explained"] = variance_explained(pca, n_comp);
        ordered_json sizes = ordered_json::array();
        ordered_json jprofiles = ordered_json::array();
        for (int c = 0; c < n_classes; ++c) {
            sizes.push_back(profiles[c].size);
            ordered_json jp;
            jp["label"] = c;
            jp["display"] = display[c];
            jp["size"] = profiles[c].size;
            jp["response"] = {{"mean", profiles[c].response_stat.mean},
                              {"median", profiles[c].response_stat.median},
                              {"defined", profiles[c].response_stat.defined}};
            ordered_json jf;
            for (const auto& [name, stat] : profiles[c].factor_stats)
                jf[name] = {{"mean", stat.mean}, {"median", stat.median}, {"defined", stat.defined}};
            jp["factors"] = jf;
            jprofiles.push_back(std::move(jp));
        }
        jc["class_sizes"] = sizes;
        report["clustering"] = jc;
        report["profiles"] = jprofiles;
    }

    report["selection"] = read_json_artifact(cfg, "selection.json");

    StageFiles out;
    out.add_json("report.json", report);
    out.flush(cfg.output_dir);
}

int guarded(int code, const char* stage, const std::function<void()>& body) {
    try {
        body();
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << stage << ": " << e.what() << "\n";
        return code;
    }
}

}  // namespace

int run_stage_ingest(const RunConfig& cfg) {
    return guarded(kIngestError, "ingest", [&] { stage_ingest(cfg); });
}
int run_stage_pollution(const RunConfig& cfg) {
    return guarded(kPlumeError, "pollution", [&] { stage_pollution(cfg); });
}
int run_stage_scan(const RunConfig& cfg) {
    return guarded(kScanError, "scan", [&] { stage_scan(cfg); });
}
int run_stage_cluster(const RunConfig& cfg) {
    return guarded(kClusterError, "cluster", [&] { stage_cluster(cfg); });
}
int run_stage_fit(const RunConfig& cfg, const std::vector<std::string>& factors) {
    return guarded(kFitError, "fit", [&] { stage_fit(cfg, factors); });
}
int run_stage_select(const RunConfig& cfg) {
    return guarded(kSelectError, "select", [&] { stage_select(cfg); });
}

int run_pipeline(const RunConfig& cfg) {
    if (int rc = run_stage_ingest(cfg)) return rc;
    if (!cfg.facilities_path.empty())
        if (int rc = run_stage_pollution(cfg)) return rc;
    if (int rc = run_stage_scan(cfg)) return rc;
    if (int rc = run_stage_cluster(cfg)) return rc;
    if (int rc = run_stage_select(cfg)) return rc;

    // fit + curves for the all-neighborhood winner, when there is one
    try {
        const auto selection = read_json_artifact(cfg, "selection.json");
        const auto& winner = selection.at("all_neighborhoods").at("winner");
        if (!winner.is_null()) {
            const auto factors = winner.at("factors").get<std::vector<std::string>>();
            if (int rc = run_stage_fit(cfg, factors)) return rc;
        }
    } catch (const std::exception& e) {
        std::cerr << "fit: " << e.what() << "\n";
        return kFitError;
    }

    return guarded(kSelectError, "report", [&] { write_report(cfg); });
}

}  // namespace geofactor
