#pragma once

#include "koopman/data.hpp"
#include "koopman/metrics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace koopman::hyp {

using nlohmann::json;

/// Candidate values per hyperparameter name. A scalar config value is one
/// candidate; an array is a list of candidates (so list-valued
/// hyperparameters, e.g. encoder_hidden_layers, sweep as arrays of arrays).
struct HypOptions {
    std::map<std::string, std::vector<json>> options;

    static HypOptions from_json(const json& j, const std::string& model_kind);
};

/// Cartesian product in key-sorted order (last key varies fastest);
/// configuration id is the position in this enumeration.
std::vector<json> enumerate_configs(const HypOptions& opts);

/// All ids when numruns >= total; otherwise a seeded uniform sample without
/// replacement, returned ascending.
std::vector<int64_t> sample_runs(int64_t total, int64_t numruns, std::uint64_t seed);

struct SearchResultRow {
    int64_t config_id = 0;
    std::string status; // "completed" or "failed: <error>"
    json resolved;      // full hyperparameter set for the run
    std::map<std::string, double> summary; // {final|avg}_{recon|lin|pred}_{loss|anae}_{tr|va}
    double runtime_s = 0.0;

    bool completed() const { return status == "completed"; }
};

const std::vector<std::string>& sort_key_vocabulary();

struct SearchDataset {
    std::optional<data::SnapshotDataset> snapshots;    // statepred
    std::optional<data::TrajectoryDataset> trajectories; // trajpred
};

struct SearchSpec {
    std::string model_kind; // "statepred" | "trajpred"
    json base_hyperparameters;
    HypOptions options;
    int64_t numruns = -1; // -1: all configurations
    std::string sort_key = "avg_pred_anae_va";
    int64_t workers = 1;
    std::uint64_t master_seed = 0;
    std::filesystem::path results_csv;
    std::filesystem::path summary_json;
};

/// Runs the sampled configurations (each with seed = mix(master_seed, id)),
/// appending every finished row to the results CSV immediately so partial
/// results survive interruption. Returns completed rows ranked ascending by
/// sort_key, ties broken by configuration id; failed runs are recorded in the
/// CSV but excluded from the ranking.
std::vector<SearchResultRow> run_hyp_search(const SearchDataset& ds, const SearchSpec& spec);

} // namespace koopman::hyp
