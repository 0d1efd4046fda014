#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geofactor/pipeline.hpp"
#include "geofactor/version.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "Run configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("-s,--seed", opts.seed, "Override the config seed");
    cmd->add_option("-o,--out", opts.out_dir, "Override the config output directory");
}

int load_config(const CommonOpts& opts, geofactor::RunConfig& cfg) {
    try {
        cfg = geofactor::run_config_from_json_file(opts.config_path);
    } catch (const std::exception& e) {
        std::cerr << "config: " << e.what() << "\n";
        return geofactor::kConfigError;
    }
    if (opts.seed) cfg.seed = *opts.seed;
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    return geofactor::kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neighborhood disease-factor analysis pipeline"};
    app.set_version_flag("--version", geofactor::kVersion);
    app.require_subcommand(1);

    CommonOpts run_o, ingest_o, pollution_o, scan_o, cluster_o, fit_o, select_o;
    std::vector<std::string> fit_factors;

    auto* run = app.add_subcommand("run", "Full pipeline: ingest through report.json");
    add_common(run, run_o);
    auto* ingest = app.add_subcommand("ingest", "Load/synthesize, validate and write the table");
    add_common(ingest, ingest_o);
    auto* pollution =
        app.add_subcommand("pollution", "Facility + wind inputs -> pollution_risk.csv");
    add_common(pollution, pollution_o);
    auto* scan = app.add_subcommand("scan", "Single-factor smooth scan -> scan.json");
    add_common(scan, scan_o);
    auto* cluster =
        app.add_subcommand("cluster", "PCA + mixture model selection -> clusters.csv");
    add_common(cluster, cluster_o);
    auto* fit = app.add_subcommand("fit", "Fit one smooth model -> gamfit.json + curves/");
    add_common(fit, fit_o);
    fit->add_option("-f,--factors", fit_factors, "Factors to smooth (comma separated)")
        ->required()
        ->delimiter(',');
    auto* select =
        app.add_subcommand("select", "Factor-group search per class -> selection.json");
    add_common(select, select_o);

    CLI11_PARSE(app, argc, argv);

    geofactor::RunConfig cfg;
    if (run->parsed()) {
        if (int rc = load_config(run_o, cfg)) return rc;
        return geofactor::run_pipeline(cfg);
    }
    if (ingest->parsed()) {
        if (int rc = load_config(ingest_o, cfg)) return rc;
        return geofactor::run_stage_ingest(cfg);
    }
    if (pollution->parsed()) {
        if (int rc = load_config(pollution_o, cfg)) return rc;
        return geofactor::run_stage_pollution(cfg);
    }
    if (scan->parsed()) {
        if (int rc = load_config(scan_o, cfg)) return rc;
        return geofactor::run_stage_scan(cfg);
    }
    if (cluster->parsed()) {
        if (int rc = load_config(cluster_o, cfg)) return rc;
        return geofactor::run_stage_cluster(cfg);
    }
    if (fit->parsed()) {
        if (int rc = load_config(fit_o, cfg)) return rc;
        return geofactor::run_stage_fit(cfg, fit_factors);
    }
    if (select->parsed()) {
        if (int rc = load_config(select_o, cfg)) return rc;
        return geofactor::run_stage_select(cfg);
    }
    return geofactor::kConfigError;
}
