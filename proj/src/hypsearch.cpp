#include "koopman/hypsearch.hpp"

#include "koopman/cli.hpp"
#include "koopman/nets.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace koopman::hyp {

HypOptions HypOptions::from_json(const json& j, const std::string& model_kind) {
    if (!j.is_object()) {
        throw ConfigError("hyp_options must be an object");
    }
    const std::set<std::string>& known = cli::known_hyperparameters(model_kind);
    HypOptions out;
    for (const auto& [key, value] : j.items()) {
        if (known.find(key) == known.end()) {
            throw UnknownHyperparameter("hyp_options: '" + key + "' is not a " + model_kind +
                                        " hyperparameter");
        }
        std::vector<json> candidates;
        if (value.is_array()) {
            for (const json& v : value) {
                candidates.push_back(v);
            }
            if (candidates.empty()) {
                throw InvalidParams("hyp_options: '" + key + "' has an empty candidate list");
            }
        } else {
            candidates.push_back(value);
        }
        out.options.emplace(key, std::move(candidates));
    }
    return out;
}

std::vector<json> enumerate_configs(const HypOptions& opts) {
    int64_t total = 1;
    for (const auto& [key, cands] : opts.options) {
        total *= static_cast<int64_t>(cands.size());
        if (total > 1000000) {
            throw InvalidParams("hyp_options: more than 1e6 configurations");
        }
    }
    std::vector<json> out;
    out.reserve(static_cast<size_t>(total));
    for (int64_t id = 0; id < total; ++id) {
        json cfg = json::object();
        int64_t rem = id;
        // Key-sorted enumeration, last key varying fastest.
        int64_t stride = total;
        for (const auto& [key, cands] : opts.options) {
            stride /= static_cast<int64_t>(cands.size());
            const int64_t pick = rem / stride;
            rem %= stride;
            cfg[key] = cands[static_cast<size_t>(pick)];
        }
        out.push_back(std::move(cfg));
    }
    return out;
}

std::vector<int64_t> sample_runs(int64_t total, int64_t numruns, std::uint64_t seed) {
    std::vector<int64_t> ids(static_cast<size_t>(total));
    std::iota(ids.begin(), ids.end(), 0);
    if (numruns < 0 || numruns >= total) {
        return ids;
    }
    if (numruns == 0) {
        return {};
    }
    nets::Rng rng(seed);
    for (int64_t i = 0; i < numruns; ++i) {
        const int64_t j = i + rng.below(total - i);
        std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
    }
    ids.resize(static_cast<size_t>(numruns));
    std::sort(ids.begin(), ids.end());
    return ids;
}

const std::vector<std::string>& sort_key_vocabulary() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> v;
        for (const char* agg : {"final", "avg"}) {
            for (const char* part : {"recon", "lin", "pred"}) {
                for (const char* kind : {"loss", "anae"}) {
                    for (const char* split : {"tr", "va"}) {
                        v.push_back(std::string(agg) + "_" + part + "_" + kind + "_" + split);
                    }
                }
            }
        }
        return v;
    }();
    return keys;
}

namespace {

void add_summary(std::map<std::string, double>& out, const std::string& part,
                 const std::string& kind, const std::string& split,
                 const std::vector<double>& series) {
    if (series.empty()) {
        return;
    }
    out["final_" + part + "_" + kind + "_" + split] = series.back();
    const double sum = std::accumulate(series.begin(), series.end(), 0.0);
    out["avg_" + part + "_" + kind + "_" + split] = sum / static_cast<double>(series.size());
}

std::map<std::string, double> summarize(const metrics::RunStats& stats) {
    std::map<std::string, double> out;
    auto collect = [&](const char* part, auto pick_loss, auto pick_anae) {
        std::vector<double> loss_tr, anae_tr, loss_va, anae_va;
        bool all_val = !stats.epochs.empty();
        for (const metrics::EpochMetrics& em : stats.epochs) {
            loss_tr.push_back(pick_loss(em.train));
            anae_tr.push_back(pick_anae(em.train));
            if (em.val) {
                loss_va.push_back(pick_loss(*em.val));
                anae_va.push_back(pick_anae(*em.val));
            } else {
                all_val = false;
            }
        }
        add_summary(out, part, "loss", "tr", loss_tr);
        add_summary(out, part, "anae", "tr", anae_tr);
        if (all_val) {
            add_summary(out, part, "loss", "va", loss_va);
            add_summary(out, part, "anae", "va", anae_va);
        }
    };
    collect("recon", [](const metrics::SplitMetrics& m) { return m.recon_loss; },
            [](const metrics::SplitMetrics& m) { return m.recon_anae; });
    collect("lin", [](const metrics::SplitMetrics& m) { return m.lin_loss; },
            [](const metrics::SplitMetrics& m) { return m.lin_anae; });
    collect("pred", [](const metrics::SplitMetrics& m) { return m.pred_loss; },
            [](const metrics::SplitMetrics& m) { return m.pred_anae; });
    return out;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out += "\"";
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

metrics::RunStats run_one(const SearchDataset& ds, const std::string& kind, const json& hyp) {
    if (kind == "statepred") {
        if (!ds.snapshots) {
            throw ConfigError("hypsearch: statepred requires snapshot data");
        }
        statepred::StatePredConfig cfg = cli::statepred_config_from_json(hyp);
        cfg.seed = hyp.at("seed").get<std::uint64_t>();
        statepred::StatePred model(*ds.snapshots, cfg);
        return model.train_net();
    }
    if (kind == "trajpred") {
        if (!ds.trajectories) {
            throw ConfigError("hypsearch: trajpred requires trajectory data");
        }
        trajpred::TrajPredConfig cfg = cli::trajpred_config_from_json(hyp);
        cfg.seed = hyp.at("seed").get<std::uint64_t>();
        trajpred::TrajPred model(*ds.trajectories, cfg);
        return model.train_net();
    }
    throw ConfigError("hypsearch: unknown model kind '" + kind + "'");
}

} // namespace

std::vector<SearchResultRow> run_hyp_search(const SearchDataset& ds, const SearchSpec& spec) {
    const auto& vocab = sort_key_vocabulary();
    if (std::find(vocab.begin(), vocab.end(), spec.sort_key) == vocab.end()) {
        throw UnknownSortKey("sort_key '" + spec.sort_key + "' is not one of "
                             "{final|avg}_{recon|lin|pred}_{loss|anae}_{tr|va}");
    }

    const std::vector<json> grid = enumerate_configs(spec.options);
    const std::vector<int64_t> sampled =
        sample_runs(static_cast<int64_t>(grid.size()), spec.numruns, spec.master_seed);

    // Resolve each sampled configuration: fixed hyperparameters overlaid with
    // the swept values, plus its derived seed.
    std::vector<json> resolved(sampled.size());
    for (size_t k = 0; k < sampled.size(); ++k) {
        json cfg = spec.base_hyperparameters.is_object() ? spec.base_hyperparameters
                                                         : json::object();
        for (const auto& [key, value] : grid[static_cast<size_t>(sampled[k])].items()) {
            cfg[key] = value;
        }
        cfg["seed"] = nets::Rng::mix(spec.master_seed,
                                     static_cast<std::uint64_t>(sampled[k]));
        resolved[k] = std::move(cfg);
    }

    // Stable column set across rows.
    std::set<std::string> hyp_keys;
    for (const json& cfg : resolved) {
        for (const auto& [key, value] : cfg.items()) {
            (void)value;
            hyp_keys.insert(key);
        }
    }

    std::FILE* csv = std::fopen(spec.results_csv.string().c_str(), "wb");
    if (csv == nullptr) {
        throw Error("cannot write " + spec.results_csv.string());
    }
    {
        std::string header = "config_id,status";
        for (const std::string& k : hyp_keys) {
            header += "," + k;
        }
        for (const std::string& k : vocab) {
            header += "," + k;
        }
        header += ",runtime_s\n";
        std::fwrite(header.data(), 1, header.size(), csv);
        std::fflush(csv);
    }

    std::vector<SearchResultRow> rows(sampled.size());
    std::mutex write_mutex;
    std::atomic<size_t> next{0};
    size_t done = 0;

    auto write_row = [&](const SearchResultRow& row) {
        // One buffered write per row so an interrupted process never leaves a
        // torn line behind.
        std::string line = std::to_string(row.config_id) + "," + csv_escape(row.status);
        for (const std::string& k : hyp_keys) {
            line += ",";
            if (row.resolved.contains(k)) {
                line += csv_escape(row.resolved[k].dump());
            }
        }
        for (const std::string& k : vocab) {
            line += ",";
            const auto it = row.summary.find(k);
            if (it != row.summary.end()) {
                line += format_double(it->second);
            }
        }
        line += "," + format_double(row.runtime_s) + "\n";
        std::fwrite(line.data(), 1, line.size(), csv);
        std::fflush(csv);
    };

    auto rewrite_summary = [&](size_t completed_so_far) {
        json j;
        j["total_configurations"] = grid.size();
        j["sampled"] = sampled.size();
        j["completed"] = completed_so_far;
        j["sort_key"] = spec.sort_key;
        json ranked = json::array();
        std::vector<const SearchResultRow*> good;
        for (size_t k = 0; k < rows.size(); ++k) {
            if (rows[k].completed() && rows[k].summary.count(spec.sort_key) > 0) {
                good.push_back(&rows[k]);
            }
        }
        std::sort(good.begin(), good.end(), [&](const auto* a, const auto* b) {
            const double va = a->summary.at(spec.sort_key);
            const double vb = b->summary.at(spec.sort_key);
            if (va != vb) {
                return va < vb;
            }
            return a->config_id < b->config_id;
        });
        for (const SearchResultRow* r : good) {
            json e;
            e["config_id"] = r->config_id;
            e[spec.sort_key] = r->summary.at(spec.sort_key);
            e["hyperparameters"] = r->resolved;
            ranked.push_back(std::move(e));
        }
        j["ranked"] = std::move(ranked);
        std::ofstream out(spec.summary_json);
        out << j.dump(2) << "\n";
    };

    auto worker = [&] {
        while (true) {
            const size_t k = next.fetch_add(1);
            if (k >= sampled.size()) {
                return;
            }
            SearchResultRow row;
            row.config_id = sampled[k];
            row.resolved = resolved[k];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const metrics::RunStats stats = run_one(ds, spec.model_kind, resolved[k]);
                row.summary = summarize(stats);
                row.status = "completed";
            } catch (const std::exception& e) {
                row.status = std::string("failed: ") + e.what();
            }
            row.runtime_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            std::lock_guard<std::mutex> lock(write_mutex);
            rows[k] = std::move(row);
            ++done;
            write_row(rows[k]);
            rewrite_summary(done);
        }
    };

    const int64_t nworkers = std::max<int64_t>(1, std::min<int64_t>(spec.workers,
                                               static_cast<int64_t>(sampled.size())));
    if (nworkers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int64_t w = 0; w < nworkers; ++w) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }
    std::fclose(csv);

    std::vector<SearchResultRow> ranked;
    for (const SearchResultRow& r : rows) {
        if (r.completed() && r.summary.count(spec.sort_key) > 0) {
            ranked.push_back(r);
        }
    }
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        const double va = a.summary.at(spec.sort_key);
        const double vb = b.summary.at(spec.sort_key);
        if (va != vb) {
            return va < vb;
        }
        return a.config_id < b.config_id;
    });
    return ranked;
}

} // namespace koopman::hyp
