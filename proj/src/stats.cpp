#include "koopman/stats.hpp"

#include "koopman/errors.hpp"

#include <cstdio>
#include <fstream>

namespace koopman::stats {

namespace {

const char* kMetricNames[] = {"recon_loss", "lin_loss",   "pred_loss", "total_loss",
                              "recon_anae", "lin_anae",   "pred_anae"};

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> split_values(const metrics::SplitMetrics& m) {
    return {m.recon_loss, m.lin_loss,   m.pred_loss, m.total_loss,
            m.recon_anae, m.lin_anae,   m.pred_anae};
}

} // namespace

std::vector<std::string> stats_header() {
    std::vector<std::string> h;
    h.push_back("epoch");
    for (const char* split : {"tr", "va"}) {
        for (const char* name : kMetricNames) {
            h.push_back(std::string(name) + "_" + split);
        }
    }
    return h;
}

void write_stats_csv(const std::filesystem::path& path, const metrics::RunStats& stats) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    const std::vector<std::string> header = stats_header();
    for (size_t i = 0; i < header.size(); ++i) {
        out << (i ? "," : "") << header[i];
    }
    out << "\n";
    for (size_t e = 0; e < stats.epochs.size(); ++e) {
        out << e;
        for (double v : split_values(stats.epochs[e].train)) {
            out << "," << format_double(v);
        }
        if (stats.epochs[e].val) {
            for (double v : split_values(*stats.epochs[e].val)) {
                out << "," << format_double(v);
            }
        } else {
            for (size_t k = 0; k < 7; ++k) {
                out << ",";
            }
        }
        out << "\n";
    }
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() && !first) {
            continue;
        }
        std::vector<std::string> cells;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        cells.push_back(cur);
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != table.header.size()) {
                throw ParseError(path.string() + ": ragged CSV row");
            }
            table.rows.push_back(std::move(cells));
        }
    }
    if (first) {
        throw ParseError(path.string() + ": empty file");
    }
    return table;
}

std::vector<LongRow> reshape_long(const std::filesystem::path& stats_csv) {
    const CsvTable table = read_csv(stats_csv);
    if (table.header.empty() || table.header[0] != "epoch") {
        throw ParseError(stats_csv.string() + ": first column must be 'epoch'");
    }
    std::vector<LongRow> out;
    for (const auto& row : table.rows) {
        int64_t epoch = 0;
        try {
            epoch = std::stoll(row[0]);
        } catch (const std::exception&) {
            throw ParseError(stats_csv.string() + ": bad epoch value '" + row[0] + "'");
        }
        for (size_t c = 1; c < table.header.size(); ++c) {
            const std::string& col = table.header[c];
            const size_t us = col.rfind('_');
            if (us == std::string::npos) {
                throw ParseError(stats_csv.string() + ": unrecognized column '" + col + "'");
            }
            const std::string metric = col.substr(0, us);
            const std::string split = col.substr(us + 1);
            if (metric == "total_loss") {
                continue; // not part of the sort-key metric vocabulary
            }
            if (row[c].empty()) {
                continue;
            }
            LongRow lr;
            lr.epoch = epoch;
            lr.split = split;
            lr.metric = metric;
            try {
                lr.value = std::stod(row[c]);
            } catch (const std::exception&) {
                throw ParseError(stats_csv.string() + ": bad value '" + row[c] + "' in " + col);
            }
            out.push_back(std::move(lr));
        }
    }
    return out;
}

void write_long_csv(const std::filesystem::path& path, const std::vector<LongRow>& rows) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "epoch,split,metric,value\n";
    for (const LongRow& r : rows) {
        out << r.epoch << "," << r.split << "," << r.metric << "," << format_double(r.value)
            << "\n";
    }
}

nlohmann::json split_to_json(const metrics::SplitMetrics& m) {
    nlohmann::json j;
    j["recon_loss"] = m.recon_loss;
    j["lin_loss"] = m.lin_loss;
    j["pred_loss"] = m.pred_loss;
    j["total_loss"] = m.total_loss;
    j["recon_anae"] = m.recon_anae;
    j["lin_anae"] = m.lin_anae;
    j["pred_anae"] = m.pred_anae;
    return j;
}

} // namespace koopman::stats
