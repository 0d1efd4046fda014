#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geofactor/cluster.hpp"
#include "geofactor/gam.hpp"
#include "geofactor/ingest.hpp"
#include "geofactor/plume.hpp"
#include "geofactor/select.hpp"

namespace geofactor {

/// Stage failure exit codes. 1 is reserved for config/setup problems.
enum StageCode : int {
    kOk = 0,
    kConfigError = 1,
    kIngestError = 10,
    kPlumeError = 20,
    kScanError = 30,
    kClusterError = 40,
    kFitError = 50,
    kSelectError = 60,
};

struct PlumeStageConfig {
    PlumeParams params;
    bool tune = false;                         // sweep sigma_candidates for best correlation
    std::vector<int> sigma_candidates = {1, 2, 3};
    std::string risk_factor_name = "industrial_pollution";
};

struct ClusterStageConfig {
    int k_min = 1;
    int k_max = 9;
    std::vector<CovFamily> families = {CovFamily::spherical, CovFamily::diagonal,
                                       CovFamily::full};
    EmOptions em;
};

/// Exclusivity groups can be scoped: the dwelling-style constraint applies
/// only to the all-neighborhood search, the age-style one everywhere.
struct GroupConfig {
    ExclusivityGroup group;
    enum class Scope { always, all_neighborhoods } scope = Scope::always;
};

struct RunConfig {
    // exactly one of the first two
    std::string neighborhoods_path;
    std::string synthetic_spec_path;
    std::string facilities_path;  // optional; enables the pollution stage
    std::string windrose_path;    // optional

    TableSchema schema;
    std::vector<std::string> cluster_features;  // empty = all variation-sufficient factors
    std::vector<GroupConfig> groups;
    PlumeStageConfig plume;
    GamConfig gam;
    SelectionConfig selection;  // selection.gam kept equal to gam
    int min_multifactor_rows = 30;  // below this a class gets single-factor mode
    int pca_components = 2;
    ClusterStageConfig cluster;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
};

RunConfig run_config_from_json(const std::string& text, const std::string& origin);
RunConfig run_config_from_json_file(const std::string& path);

/// Canonical serialization of the semantic fields (output_dir excluded);
/// identical configs hash identically regardless of source formatting.
std::string canonical_config_json(const RunConfig& config);
std::string config_hash(const RunConfig& config);

/// Stage entry points. Each stage reads its upstream artifacts from
/// config.output_dir and writes its own files there in one batch at stage
/// end, so a failed stage leaves no partial outputs. Returns the stage
/// exit code and prints the failure reason to stderr.
int run_stage_ingest(const RunConfig& config);
int run_stage_pollution(const RunConfig& config);
int run_stage_scan(const RunConfig& config);
int run_stage_cluster(const RunConfig& config);
int run_stage_fit(const RunConfig& config, const std::vector<std::string>& factors);
int run_stage_select(const RunConfig& config);

/// ingest -> pollution (if facilities given) -> scan -> cluster -> select
/// -> winner fit -> report.json. Identical (config, seed) gives a
/// byte-identical report tree.
int run_pipeline(const RunConfig& config);

}  // namespace geofactor
