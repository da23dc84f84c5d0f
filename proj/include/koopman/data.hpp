#pragma once

#include "koopman/tensor.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace koopman::data {

/// Affine map between original indexes t and internal integer indexes:
/// internal = (t - t0) / dt. Training indexes are rounded onto the grid;
/// prediction indexes are mapped without rounding.
struct IndexMap {
    double t0 = 0.0;
    double dt = 1.0;
    bool established = false;

    double map_new_index(double t) const;
};

struct NormalizedIndexes {
    IndexMap map;
    std::vector<int64_t> internal; // distinct integers, min is 0
};

/// t0 = min(ttr); dt = median of consecutive differences of sorted ttr;
/// internal = round((t - t0)/dt), half away from zero. Rejects fewer than two
/// distinct indexes and collisions after rounding.
NormalizedIndexes normalize_indexes(const std::vector<double>& ttr);

struct SnapshotSplit {
    Tensor X;              // d x n, one column per snapshot
    std::vector<double> t; // length n
};

struct SnapshotDataset {
    SnapshotSplit train; // sorted by t, internal indexes in `internal`
    std::optional<SnapshotSplit> val;
    std::optional<SnapshotSplit> test;
    IndexMap index_map;
    std::vector<int64_t> internal; // internal integer indexes of train columns

    int64_t dim() const { return train.X.rows(); }
    int64_t n_train() const { return train.X.cols(); }
};

/// Builds the dataset: sorts the training split by index, normalizes indexes.
SnapshotDataset make_snapshot_dataset(SnapshotSplit train,
                                      std::optional<SnapshotSplit> val = std::nullopt,
                                      std::optional<SnapshotSplit> test = std::nullopt);

struct TrajectoryDataset {
    // Each trajectory is d x (m+1): one column per step.
    std::vector<Tensor> train;
    std::vector<Tensor> val;
    std::vector<Tensor> test;

    int64_t dim() const { return train.empty() ? 0 : train[0].rows(); }
    int64_t steps() const { return train.empty() ? 0 : train[0].cols() - 1; } // m
    void validate() const; // equal lengths, consistent dim, finite
};

/// Per-feature min-max scaling to [-1, 1], fitted on the training split only.
class Scaler {
  public:
    static Scaler fit(const Tensor& train_X); // train_X is d x n
    static Scaler identity(int64_t dim);

    Tensor transform(const Tensor& X) const;
    Tensor inverse(const Tensor& X) const;

    const std::vector<double>& shifts() const { return shift_; }
    const std::vector<double>& scales() const { return scale_; }

    static Scaler from_params(std::vector<double> shift, std::vector<double> scale);

  private:
    std::vector<double> shift_;
    std::vector<double> scale_; // > 0
};

// File formats ---------------------------------------------------------------
//
// Snapshot CSV: UTF-8 header row, column "t" then feature columns f0..f{d-1}.
// Trajectory NDJSON: one {"traj": [[state0], [state1], ...]} record per line;
// alternatively a directory of per-trajectory CSVs without a "t" column.

SnapshotSplit load_snapshot_csv(const std::filesystem::path& path);
void save_snapshot_csv(const std::filesystem::path& path, const SnapshotSplit& split);

std::vector<Tensor> load_trajectories(const std::filesystem::path& path);
void save_trajectories_ndjson(const std::filesystem::path& path,
                              const std::vector<Tensor>& trajs);

/// States-only CSV (feature columns, no "t"): initial states for trajectory
/// prediction, one state per row. Returns d x n.
Tensor load_states_csv(const std::filesystem::path& path);

} // namespace koopman::data
