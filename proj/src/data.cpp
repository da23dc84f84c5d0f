#include "koopman/data.hpp"

#include "koopman/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace koopman::data {

using nlohmann::json;

double IndexMap::map_new_index(double t) const {
    if (!established) {
        throw NoIndexMap("map_new_index: no index map established (dataset not loaded?)");
    }
    return (t - t0) / dt;
}

NormalizedIndexes normalize_indexes(const std::vector<double>& ttr) {
    std::vector<double> sorted = ttr;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() < 2) {
        throw DegenerateIndexes("normalize_indexes: need at least 2 distinct indexes, got " +
                                std::to_string(sorted.size()));
    }

    std::vector<double> diffs(sorted.size() - 1);
    for (size_t i = 0; i + 1 < sorted.size(); ++i) {
        diffs[i] = sorted[i + 1] - sorted[i];
    }
    std::sort(diffs.begin(), diffs.end());
    // Median spacing is robust to a single off-grid sample.
    double dt;
    const size_t h = diffs.size() / 2;
    if (diffs.size() % 2 == 1) {
        dt = diffs[h];
    } else {
        dt = 0.5 * (diffs[h - 1] + diffs[h]);
    }
    if (!(dt > 0.0)) {
        throw DegenerateIndexes("normalize_indexes: non-positive index spacing");
    }

    NormalizedIndexes out;
    out.map.t0 = sorted.front();
    out.map.dt = dt;
    out.map.established = true;

    out.internal.reserve(ttr.size());
    for (double t : ttr) {
        // round half away from zero
        out.internal.push_back(static_cast<int64_t>(std::round((t - out.map.t0) / dt)));
    }
    std::vector<int64_t> check = out.internal;
    std::sort(check.begin(), check.end());
    if (std::adjacent_find(check.begin(), check.end()) != check.end()) {
        throw DegenerateIndexes(
            "normalize_indexes: two indexes round to the same internal index");
    }
    return out;
}

SnapshotDataset make_snapshot_dataset(SnapshotSplit train, std::optional<SnapshotSplit> val,
                                      std::optional<SnapshotSplit> test) {
    auto check_split = [](const SnapshotSplit& s, const char* name) {
        if (s.X.cols() != static_cast<int64_t>(s.t.size())) {
            throw ShapeMismatch(std::string(name) + ": " + std::to_string(s.t.size()) +
                                " indexes for " + std::to_string(s.X.cols()) + " snapshots");
        }
        if (!s.X.all_finite()) {
            throw NonFiniteValue(std::string(name) + ": non-finite state value");
        }
    };
    check_split(train, "train split");
    if (val) {
        check_split(*val, "val split");
    }
    if (test) {
        check_split(*test, "test split");
    }

    // Sort training columns by index.
    std::vector<int64_t> order(static_cast<size_t>(train.X.cols()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int64_t a, int64_t b) { return train.t[a] < train.t[b]; });
    SnapshotSplit sorted;
    sorted.X = Tensor(train.X.rows(), train.X.cols());
    sorted.t.resize(train.t.size());
    for (size_t k = 0; k < order.size(); ++k) {
        sorted.t[k] = train.t[static_cast<size_t>(order[k])];
        for (int64_t i = 0; i < train.X.rows(); ++i) {
            sorted.X.at(i, static_cast<int64_t>(k)) = train.X.at(i, order[k]);
        }
    }

    NormalizedIndexes norm = normalize_indexes(sorted.t);

    SnapshotDataset ds;
    ds.train = std::move(sorted);
    ds.val = std::move(val);
    ds.test = std::move(test);
    ds.index_map = norm.map;
    ds.internal = std::move(norm.internal);
    if (ds.val && ds.val->X.rows() != ds.train.X.rows()) {
        throw ShapeMismatch("val split dimension differs from train");
    }
    if (ds.test && ds.test->X.rows() != ds.train.X.rows()) {
        throw ShapeMismatch("test split dimension differs from train");
    }
    return ds;
}

void TrajectoryDataset::validate() const {
    if (train.empty()) {
        throw InvalidParams("TrajectoryDataset: no training trajectories");
    }
    const int64_t d = train[0].rows();
    const int64_t len = train[0].cols();
    if (len < 2) {
        throw InvalidParams("TrajectoryDataset: trajectories need at least 2 states");
    }
    auto check = [&](const std::vector<Tensor>& set, const char* name) {
        for (size_t j = 0; j < set.size(); ++j) {
            if (set[j].rows() != d || set[j].cols() != len) {
                throw RaggedTrajectories(std::string(name) + " trajectory " +
                                         std::to_string(j) + " is " + set[j].shape_str() +
                                         ", expected (" + std::to_string(d) + " x " +
                                         std::to_string(len) + ")");
            }
            if (!set[j].all_finite()) {
                throw NonFiniteValue(std::string(name) + " trajectory " + std::to_string(j) +
                                     ": non-finite state value");
            }
        }
    };
    check(train, "train");
    check(val, "val");
    check(test, "test");
}

Scaler Scaler::fit(const Tensor& train_X) {
    Scaler s;
    const int64_t d = train_X.rows();
    s.shift_.resize(static_cast<size_t>(d));
    s.scale_.resize(static_cast<size_t>(d));
    for (int64_t i = 0; i < d; ++i) {
        double lo = train_X.at(i, 0), hi = train_X.at(i, 0);
        for (int64_t j = 1; j < train_X.cols(); ++j) {
            lo = std::min(lo, train_X.at(i, j));
            hi = std::max(hi, train_X.at(i, j));
        }
        const double half = 0.5 * (hi - lo);
        s.shift_[static_cast<size_t>(i)] = lo;
        s.scale_[static_cast<size_t>(i)] = half > 0.0 ? half : 1.0;
    }
    return s;
}

Scaler Scaler::identity(int64_t dim) {
    Scaler s;
    s.shift_.assign(static_cast<size_t>(dim), -1.0); // transform(x) = x for shift -1, scale 1
    s.scale_.assign(static_cast<size_t>(dim), 1.0);
    return s;
}

Scaler Scaler::from_params(std::vector<double> shift, std::vector<double> scale) {
    for (double v : scale) {
        if (!(v > 0.0)) {
            throw InvalidParams("Scaler: scale must be > 0");
        }
    }
    Scaler s;
    s.shift_ = std::move(shift);
    s.scale_ = std::move(scale);
    return s;
}

Tensor Scaler::transform(const Tensor& X) const {
    if (X.rows() != static_cast<int64_t>(shift_.size())) {
        throw ShapeMismatch("Scaler::transform: dimension mismatch");
    }
    Tensor out = X;
    for (int64_t i = 0; i < X.rows(); ++i) {
        for (int64_t j = 0; j < X.cols(); ++j) {
            out.at(i, j) = (X.at(i, j) - shift_[static_cast<size_t>(i)]) /
                               scale_[static_cast<size_t>(i)] -
                           1.0;
        }
    }
    return out;
}

Tensor Scaler::inverse(const Tensor& X) const {
    if (X.rows() != static_cast<int64_t>(shift_.size())) {
        throw ShapeMismatch("Scaler::inverse: dimension mismatch");
    }
    Tensor out = X;
    for (int64_t i = 0; i < X.rows(); ++i) {
        for (int64_t j = 0; j < X.cols(); ++j) {
            out.at(i, j) =
                (X.at(i, j) + 1.0) * scale_[static_cast<size_t>(i)] +
                shift_[static_cast<size_t>(i)];
        }
    }
    return out;
}

// -----------------------------------------------------------------------------
// CSV / NDJSON
// -----------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& s, const std::string& where) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) {
            ++pos;
        }
        if (pos != s.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return v;
    } catch (const std::exception&) {
        throw ParseError("not a number at " + where + ": '" + s + "'");
    }
}

void check_finite(double v, const std::string& where) {
    if (!std::isfinite(v)) {
        throw NonFiniteValue("non-finite value at " + where);
    }
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path.string() + ": empty file");
    }
    table.header = split_csv_line(line);
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != table.header.size()) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(table.header.size()) + " columns, got " +
                             std::to_string(cells.size()));
        }
        std::vector<double> row(cells.size());
        for (size_t c = 0; c < cells.size(); ++c) {
            const std::string where =
                path.string() + ":" + std::to_string(lineno) + " col " + std::to_string(c);
            row[c] = parse_number(cells[c], where);
            check_finite(row[c], where);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

SnapshotSplit load_snapshot_csv(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    if (table.header.empty() || table.header[0] != "t") {
        throw ParseError(path.string() + ": first column must be 't'");
    }
    const int64_t d = static_cast<int64_t>(table.header.size()) - 1;
    if (d < 1) {
        throw ParseError(path.string() + ": no feature columns");
    }
    for (int64_t c = 0; c < d; ++c) {
        const std::string expected = "f" + std::to_string(c);
        if (table.header[static_cast<size_t>(c) + 1] != expected) {
            throw ParseError(path.string() + ": feature column " + std::to_string(c) +
                             " must be named '" + expected + "'");
        }
    }
    SnapshotSplit split;
    const int64_t n = static_cast<int64_t>(table.rows.size());
    split.X = Tensor(d, n);
    split.t.resize(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) {
        split.t[static_cast<size_t>(j)] = table.rows[static_cast<size_t>(j)][0];
        for (int64_t i = 0; i < d; ++i) {
            split.X.at(i, j) = table.rows[static_cast<size_t>(j)][static_cast<size_t>(i) + 1];
        }
    }
    return split;
}

void save_snapshot_csv(const std::filesystem::path& path, const SnapshotSplit& split) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "t";
    for (int64_t i = 0; i < split.X.rows(); ++i) {
        out << ",f" << i;
    }
    out << "\n";
    for (int64_t j = 0; j < split.X.cols(); ++j) {
        out << format_double(split.t[static_cast<size_t>(j)]);
        for (int64_t i = 0; i < split.X.rows(); ++i) {
            out << "," << format_double(split.X.at(i, j));
        }
        out << "\n";
    }
}

namespace {

Tensor trajectory_from_json(const json& states, const std::string& where) {
    if (!states.is_array() || states.empty()) {
        throw ParseError(where + ": 'traj' must be a non-empty array of states");
    }
    const size_t len = states.size();
    size_t d = 0;
    for (size_t s = 0; s < len; ++s) {
        if (!states[s].is_array() || states[s].empty()) {
            throw ParseError(where + ": state " + std::to_string(s) + " must be an array");
        }
        if (s == 0) {
            d = states[s].size();
        } else if (states[s].size() != d) {
            throw RaggedTrajectories(where + ": state " + std::to_string(s) + " has " +
                                     std::to_string(states[s].size()) + " features, expected " +
                                     std::to_string(d));
        }
    }
    Tensor traj(static_cast<int64_t>(d), static_cast<int64_t>(len));
    for (size_t s = 0; s < len; ++s) {
        for (size_t i = 0; i < d; ++i) {
            if (!states[s][i].is_number()) {
                throw ParseError(where + ": state " + std::to_string(s) + " element " +
                                 std::to_string(i) + " is not a number");
            }
            const double v = states[s][i].get<double>();
            check_finite(v, where + " state " + std::to_string(s) + " element " +
                               std::to_string(i));
            traj.at(static_cast<int64_t>(i), static_cast<int64_t>(s)) = v;
        }
    }
    return traj;
}

std::vector<Tensor> load_trajectories_ndjson(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    std::vector<Tensor> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!rec.is_object() || !rec.contains("traj")) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected {\"traj\": [...]}");
        }
        out.push_back(
            trajectory_from_json(rec["traj"], path.string() + ":" + std::to_string(lineno)));
    }
    // Equal lengths across records.
    for (size_t j = 1; j < out.size(); ++j) {
        if (out[j].cols() != out[0].cols() || out[j].rows() != out[0].rows()) {
            throw RaggedTrajectories(path.string() + ": trajectory " + std::to_string(j) +
                                     " is " + out[j].shape_str() + ", first is " +
                                     out[0].shape_str());
        }
    }
    return out;
}

std::vector<Tensor> load_trajectories_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    if (files.empty()) {
        throw ParseError(dir.string() + ": no per-trajectory CSV files");
    }
    std::sort(files.begin(), files.end());
    std::vector<Tensor> out;
    for (const auto& f : files) {
        Tensor states = load_states_csv(f); // d x steps, ordered rows = ordered steps
        out.push_back(std::move(states));
    }
    for (size_t j = 1; j < out.size(); ++j) {
        if (out[j].cols() != out[0].cols() || out[j].rows() != out[0].rows()) {
            throw RaggedTrajectories(dir.string() + ": trajectory file " + std::to_string(j) +
                                     " is " + out[j].shape_str() + ", first is " +
                                     out[0].shape_str());
        }
    }
    return out;
}

} // namespace

std::vector<Tensor> load_trajectories(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) {
        return load_trajectories_dir(path);
    }
    return load_trajectories_ndjson(path);
}

void save_trajectories_ndjson(const std::filesystem::path& path,
                              const std::vector<Tensor>& trajs) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    for (const Tensor& traj : trajs) {
        out << "{\"traj\":[";
        for (int64_t s = 0; s < traj.cols(); ++s) {
            out << (s ? ",[" : "[");
            for (int64_t i = 0; i < traj.rows(); ++i) {
                out << (i ? "," : "") << format_double(traj.at(i, s));
            }
            out << "]";
        }
        out << "]}\n";
    }
}

Tensor load_states_csv(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    if (table.header.empty() || table.header[0] == "t") {
        throw ParseError(path.string() + ": states-only CSV must not have a 't' column");
    }
    const int64_t d = static_cast<int64_t>(table.header.size());
    for (int64_t c = 0; c < d; ++c) {
        const std::string expected = "f" + std::to_string(c);
        if (table.header[static_cast<size_t>(c)] != expected) {
            throw ParseError(path.string() + ": feature column " + std::to_string(c) +
                             " must be named '" + expected + "'");
        }
    }
    const int64_t n = static_cast<int64_t>(table.rows.size());
    if (n == 0) {
        throw ParseError(path.string() + ": no state rows");
    }
    Tensor out(d, n);
    for (int64_t j = 0; j < n; ++j) {
        for (int64_t i = 0; i < d; ++i) {
            out.at(i, j) = table.rows[static_cast<size_t>(j)][static_cast<size_t>(i)];
        }
    }
    return out;
}

} // namespace koopman::data
