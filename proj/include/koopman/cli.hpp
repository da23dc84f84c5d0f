#pragma once

#include "koopman/metrics.hpp"
#include "koopman/statepred.hpp"
#include "koopman/trajpred.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace koopman::cli {

using nlohmann::json;

json load_json_file(const std::filesystem::path& path);

/// Hyperparameter names accepted in the "hyperparameters" section (and as
/// hyp_options keys) for a model kind.
const std::set<std::string>& known_hyperparameters(const std::string& model_kind);

/// Lenient field extraction: absent keys keep their defaults; validation
/// happens when a model is constructed. Unknown keys raise ConfigError.
statepred::StatePredConfig statepred_config_from_json(const json& hyp);
trajpred::TrajPredConfig trajpred_config_from_json(const json& hyp);

json statepred_config_to_json(const statepred::StatePredConfig& cfg);
json trajpred_config_to_json(const trajpred::TrajPredConfig& cfg);

/// Config seed, overridden by the KOOPMAN_SEED environment variable.
std::uint64_t resolve_seed(const json& cfg);

struct FitOutputs {
    std::filesystem::path checkpoint;
    std::filesystem::path stats_csv;
    std::filesystem::path summary;
    metrics::RunStats stats;
};

/// Trains the configured model and writes checkpoint.json, stats.csv and
/// summary.json under output_dir. Paths in the config resolve against
/// base_dir (the config file's directory).
FitOutputs run_fit(const json& cfg, const std::filesystem::path& base_dir);

void run_predict_indexes(const std::filesystem::path& checkpoint_path,
                         const std::vector<double>& indexes,
                         const std::filesystem::path& out_csv);

void run_predict_trajectories(const std::filesystem::path& checkpoint_path,
                              const std::filesystem::path& x0_csv, int64_t steps,
                              const std::filesystem::path& out_ndjson);

void run_gen_data(const std::string& kind, const json& params,
                  const std::filesystem::path& out_dir);

void run_plot_data(const std::filesystem::path& stats_csv,
                   const std::filesystem::path& out_csv);

/// Delegates to hyp::run_hyp_search and prints the top-5 ranked configurations.
void run_hypsearch(const json& cfg, const std::filesystem::path& base_dir);

} // namespace koopman::cli
