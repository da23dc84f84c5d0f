#pragma once

#include "koopman/metrics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace koopman::stats {

/// stats.csv column layout, identical for StatePred and TrajPred runs:
/// epoch, then {recon,lin,pred}_loss, total_loss, {recon,lin,pred}_anae for
/// the tr split, then the same for va. Missing validation values are empty
/// cells, never omitted columns.
std::vector<std::string> stats_header();

void write_stats_csv(const std::filesystem::path& path, const metrics::RunStats& stats);

/// Raw CSV cells (used by plot-data and the pivot tests).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

struct LongRow {
    int64_t epoch = 0;
    std::string split;  // "tr" | "va"
    std::string metric; // {recon|lin|pred}_{loss|anae}
    double value = 0.0;
};

/// Tidy long-format reshape of a stats.csv: one row per (epoch, split, metric)
/// for the six sort-key metrics; empty cells and total_loss are skipped.
std::vector<LongRow> reshape_long(const std::filesystem::path& stats_csv);

void write_long_csv(const std::filesystem::path& path, const std::vector<LongRow>& rows);

nlohmann::json split_to_json(const metrics::SplitMetrics& m);

} // namespace koopman::stats
