#include "koopman/cli.hpp"

#include "koopman/checkpoint.hpp"
#include "koopman/datagen.hpp"
#include "koopman/hypsearch.hpp"
#include "koopman/nets.hpp"
#include "koopman/stats.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace koopman::cli {

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

const std::set<std::string>& known_hyperparameters(const std::string& model_kind) {
    static const std::set<std::string> statepred_keys = {
        "rank",          "encoded_size",       "encoder_hidden_layers",
        "decoder_hidden_layers", "activation", "use_bias",
        "numepochs",     "decoder_loss_weight", "weight_decay",
        "Kreg",          "learning_rate",      "eigenvector_mode",
        "detach_eig_gradient", "scale_features", "anae_zero_epsilon",
        "seed"};
    static const std::set<std::string> trajpred_keys = {
        "encoded_size",  "encoder_hidden_layers", "decoder_hidden_layers",
        "activation",    "use_bias",              "numepochs",
        "batch_size",    "decoder_loss_weight",   "weight_decay",
        "learning_rate", "scale_features",        "anae_zero_epsilon",
        "seed"};
    if (model_kind == "statepred") {
        return statepred_keys;
    }
    if (model_kind == "trajpred") {
        return trajpred_keys;
    }
    throw ConfigError("unknown model kind '" + model_kind + "' (statepred | trajpred)");
}

namespace {

int64_t get_int(const json& j, const std::string& key) {
    if (!j.at(key).is_number_integer()) {
        throw ConfigError("'" + key + "' must be an integer");
    }
    return j.at(key).get<int64_t>();
}

double get_num(const json& j, const std::string& key) {
    if (!j.at(key).is_number()) {
        throw ConfigError("'" + key + "' must be a number");
    }
    return j.at(key).get<double>();
}

bool get_bool(const json& j, const std::string& key) {
    if (!j.at(key).is_boolean()) {
        throw ConfigError("'" + key + "' must be a boolean");
    }
    return j.at(key).get<bool>();
}

std::vector<int64_t> get_int_list(const json& j, const std::string& key) {
    if (!j.at(key).is_array()) {
        throw ConfigError("'" + key + "' must be a list of layer sizes");
    }
    std::vector<int64_t> out;
    for (const json& v : j.at(key)) {
        if (!v.is_number_integer()) {
            throw ConfigError("'" + key + "' must contain integers");
        }
        out.push_back(v.get<int64_t>());
    }
    return out;
}

void check_known(const json& hyp, const std::string& kind) {
    const std::set<std::string>& known = known_hyperparameters(kind);
    for (const auto& [key, value] : hyp.items()) {
        (void)value;
        if (known.find(key) == known.end()) {
            throw ConfigError("unknown " + kind + " hyperparameter '" + key + "'");
        }
    }
}

} // namespace

statepred::StatePredConfig statepred_config_from_json(const json& hyp) {
    check_known(hyp, "statepred");
    statepred::StatePredConfig cfg;
    if (hyp.contains("rank")) {
        cfg.rank = get_int(hyp, "rank");
    }
    if (hyp.contains("encoded_size")) {
        cfg.encoded_size = get_int(hyp, "encoded_size");
    }
    if (hyp.contains("encoder_hidden_layers")) {
        cfg.encoder_hidden_layers = get_int_list(hyp, "encoder_hidden_layers");
    }
    if (hyp.contains("decoder_hidden_layers")) {
        cfg.decoder_hidden_layers = get_int_list(hyp, "decoder_hidden_layers");
    }
    if (hyp.contains("activation")) {
        cfg.activation = nets::activation_from_string(hyp.at("activation").get<std::string>());
    }
    if (hyp.contains("use_bias")) {
        cfg.use_bias = get_bool(hyp, "use_bias");
    }
    if (hyp.contains("numepochs")) {
        cfg.numepochs = get_int(hyp, "numepochs");
    }
    if (hyp.contains("decoder_loss_weight")) {
        cfg.weights.alpha = get_num(hyp, "decoder_loss_weight");
    }
    if (hyp.contains("weight_decay")) {
        cfg.weights.beta = get_num(hyp, "weight_decay");
    }
    if (hyp.contains("Kreg")) {
        cfg.weights.gamma = get_num(hyp, "Kreg");
    }
    if (hyp.contains("learning_rate")) {
        cfg.learning_rate = get_num(hyp, "learning_rate");
    }
    if (hyp.contains("eigenvector_mode")) {
        cfg.eigenvector_mode =
            statepred::eig_mode_from_string(hyp.at("eigenvector_mode").get<std::string>());
    }
    if (hyp.contains("detach_eig_gradient")) {
        cfg.detach_eig_gradient = get_bool(hyp, "detach_eig_gradient");
    }
    if (hyp.contains("scale_features")) {
        cfg.scale_features = get_bool(hyp, "scale_features");
    }
    if (hyp.contains("anae_zero_epsilon")) {
        cfg.anae_zero_epsilon = get_num(hyp, "anae_zero_epsilon");
    }
    if (hyp.contains("seed")) {
        cfg.seed = hyp.at("seed").get<std::uint64_t>();
    }
    return cfg;
}

trajpred::TrajPredConfig trajpred_config_from_json(const json& hyp) {
    check_known(hyp, "trajpred");
    trajpred::TrajPredConfig cfg;
    if (hyp.contains("encoded_size")) {
        cfg.encoded_size = get_int(hyp, "encoded_size");
    }
    if (hyp.contains("encoder_hidden_layers")) {
        cfg.encoder_hidden_layers = get_int_list(hyp, "encoder_hidden_layers");
    }
    if (hyp.contains("decoder_hidden_layers")) {
        cfg.decoder_hidden_layers = get_int_list(hyp, "decoder_hidden_layers");
    }
    if (hyp.contains("activation")) {
        cfg.activation = nets::activation_from_string(hyp.at("activation").get<std::string>());
    }
    if (hyp.contains("use_bias")) {
        cfg.use_bias = get_bool(hyp, "use_bias");
    }
    if (hyp.contains("numepochs")) {
        cfg.numepochs = get_int(hyp, "numepochs");
    }
    if (hyp.contains("batch_size")) {
        cfg.batch_size = get_int(hyp, "batch_size");
    }
    if (hyp.contains("decoder_loss_weight")) {
        cfg.alpha = get_num(hyp, "decoder_loss_weight");
    }
    if (hyp.contains("weight_decay")) {
        cfg.beta = get_num(hyp, "weight_decay");
    }
    if (hyp.contains("learning_rate")) {
        cfg.learning_rate = get_num(hyp, "learning_rate");
    }
    if (hyp.contains("scale_features")) {
        cfg.scale_features = get_bool(hyp, "scale_features");
    }
    if (hyp.contains("anae_zero_epsilon")) {
        cfg.anae_zero_epsilon = get_num(hyp, "anae_zero_epsilon");
    }
    if (hyp.contains("seed")) {
        cfg.seed = hyp.at("seed").get<std::uint64_t>();
    }
    return cfg;
}

json statepred_config_to_json(const statepred::StatePredConfig& cfg) {
    json j;
    j["rank"] = cfg.rank;
    j["encoded_size"] = cfg.encoded_size;
    j["encoder_hidden_layers"] = cfg.encoder_hidden_layers;
    if (cfg.decoder_hidden_layers) {
        j["decoder_hidden_layers"] = *cfg.decoder_hidden_layers;
    }
    j["activation"] = nets::to_string(cfg.activation);
    j["use_bias"] = cfg.use_bias;
    j["numepochs"] = cfg.numepochs;
    j["decoder_loss_weight"] = cfg.weights.alpha;
    j["weight_decay"] = cfg.weights.beta;
    j["Kreg"] = cfg.weights.gamma;
    j["learning_rate"] = cfg.learning_rate;
    j["eigenvector_mode"] = statepred::to_string(cfg.eigenvector_mode);
    j["detach_eig_gradient"] = cfg.detach_eig_gradient;
    j["scale_features"] = cfg.scale_features;
    j["anae_zero_epsilon"] = cfg.anae_zero_epsilon;
    j["seed"] = cfg.seed;
    return j;
}

json trajpred_config_to_json(const trajpred::TrajPredConfig& cfg) {
    json j;
    j["encoded_size"] = cfg.encoded_size;
    j["encoder_hidden_layers"] = cfg.encoder_hidden_layers;
    if (cfg.decoder_hidden_layers) {
        j["decoder_hidden_layers"] = *cfg.decoder_hidden_layers;
    }
    j["activation"] = nets::to_string(cfg.activation);
    j["use_bias"] = cfg.use_bias;
    j["numepochs"] = cfg.numepochs;
    j["batch_size"] = cfg.batch_size;
    j["decoder_loss_weight"] = cfg.alpha;
    j["weight_decay"] = cfg.beta;
    j["learning_rate"] = cfg.learning_rate;
    j["scale_features"] = cfg.scale_features;
    j["anae_zero_epsilon"] = cfg.anae_zero_epsilon;
    j["seed"] = cfg.seed;
    return j;
}

std::uint64_t resolve_seed(const json& cfg) {
    if (const char* env = std::getenv("KOOPMAN_SEED")) {
        try {
            return static_cast<std::uint64_t>(std::stoull(env));
        } catch (const std::exception&) {
            throw ConfigError("KOOPMAN_SEED is not an unsigned integer: '" +
                              std::string(env) + "'");
        }
    }
    if (cfg.contains("seed")) {
        if (!cfg.at("seed").is_number_integer() && !cfg.at("seed").is_number_unsigned()) {
            throw ConfigError("'seed' must be an integer");
        }
        return cfg.at("seed").get<std::uint64_t>();
    }
    return 0;
}

namespace {

std::filesystem::path resolve_path(const std::filesystem::path& base,
                                   const std::string& rel) {
    std::filesystem::path p(rel);
    return p.is_absolute() ? p : base / p;
}

data::SnapshotDataset load_snapshot_dataset(const json& cfg,
                                            const std::filesystem::path& base_dir) {
    if (!cfg.contains("data") || !cfg.at("data").contains("train")) {
        throw ConfigError("config: data.train is required");
    }
    const json& d = cfg.at("data");
    data::SnapshotSplit train =
        data::load_snapshot_csv(resolve_path(base_dir, d.at("train").get<std::string>()));
    std::optional<data::SnapshotSplit> val, test;
    if (d.contains("val")) {
        val = data::load_snapshot_csv(resolve_path(base_dir, d.at("val").get<std::string>()));
    }
    if (d.contains("test")) {
        test =
            data::load_snapshot_csv(resolve_path(base_dir, d.at("test").get<std::string>()));
    }
    return data::make_snapshot_dataset(std::move(train), std::move(val), std::move(test));
}

data::TrajectoryDataset load_trajectory_dataset(const json& cfg,
                                                const std::filesystem::path& base_dir) {
    if (!cfg.contains("data") || !cfg.at("data").contains("train")) {
        throw ConfigError("config: data.train is required");
    }
    const json& d = cfg.at("data");
    data::TrajectoryDataset ds;
    ds.train = data::load_trajectories(resolve_path(base_dir, d.at("train").get<std::string>()));
    if (d.contains("val")) {
        ds.val = data::load_trajectories(resolve_path(base_dir, d.at("val").get<std::string>()));
    }
    if (d.contains("test")) {
        ds.test =
            data::load_trajectories(resolve_path(base_dir, d.at("test").get<std::string>()));
    }
    ds.validate();
    return ds;
}

std::string model_kind(const json& cfg) {
    if (!cfg.contains("model")) {
        throw ConfigError("config: 'model' is required (statepred | trajpred)");
    }
    const std::string kind = cfg.at("model").get<std::string>();
    if (kind != "statepred" && kind != "trajpred") {
        throw ConfigError("config: unknown model '" + kind + "'");
    }
    return kind;
}

std::filesystem::path output_dir(const json& cfg, const std::filesystem::path& base_dir) {
    if (!cfg.contains("output_dir")) {
        throw ConfigError("config: 'output_dir' is required");
    }
    const std::filesystem::path dir =
        resolve_path(base_dir, cfg.at("output_dir").get<std::string>());
    std::filesystem::create_directories(dir);
    return dir;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

FitOutputs run_fit(const json& cfg, const std::filesystem::path& base_dir) {
    const std::string kind = model_kind(cfg);
    const std::filesystem::path out_dir = output_dir(cfg, base_dir);
    const std::uint64_t seed = resolve_seed(cfg);
    const json hyp = cfg.value("hyperparameters", json::object());

    FitOutputs out;
    out.checkpoint = out_dir / "checkpoint.json";
    out.stats_csv = out_dir / "stats.csv";
    out.summary = out_dir / "summary.json";

    const auto t0 = std::chrono::steady_clock::now();
    json echo;
    echo["model"] = kind;
    echo["seed"] = seed;

    if (kind == "statepred") {
        statepred::StatePredConfig mc = statepred_config_from_json(hyp);
        mc.seed = seed;
        echo["hyperparameters"] = statepred_config_to_json(mc);
        statepred::StatePred model(load_snapshot_dataset(cfg, base_dir), mc);
        out.stats = model.train_net();
        checkpoint::save_statepred(out.checkpoint, model, echo);
    } else {
        trajpred::TrajPredConfig mc = trajpred_config_from_json(hyp);
        mc.seed = seed;
        echo["hyperparameters"] = trajpred_config_to_json(mc);
        trajpred::TrajPred model(load_trajectory_dataset(cfg, base_dir), mc);
        out.stats = model.train_net();
        checkpoint::save_trajpred(out.checkpoint, model, echo);
    }
    stats::write_stats_csv(out.stats_csv, out.stats);

    json summary;
    summary["config"] = echo;
    summary["epochs_run"] = out.stats.epochs.size();
    if (!out.stats.epochs.empty()) {
        summary["final_train"] = stats::split_to_json(out.stats.epochs.back().train);
        if (out.stats.epochs.back().val) {
            summary["final_val"] = stats::split_to_json(*out.stats.epochs.back().val);
        }
    }
    if (out.stats.test) {
        summary["test"] = stats::split_to_json(*out.stats.test);
    }
    summary["runtime_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream sf(out.summary);
    sf << summary.dump(2) << "\n";
    return out;
}

void run_predict_indexes(const std::filesystem::path& checkpoint_path,
                         const std::vector<double>& indexes,
                         const std::filesystem::path& out_csv) {
    checkpoint::Loaded loaded = checkpoint::load(checkpoint_path);
    if (loaded.kind != "statepred") {
        throw ConfigError("predict: index requests need a statepred checkpoint, this one is '" +
                          loaded.kind + "'");
    }
    const Tensor pred = loaded.statepred->predict_new(indexes); // rows = indexes
    std::ofstream out(out_csv);
    if (!out) {
        throw Error("cannot write " + out_csv.string());
    }
    out << "t";
    for (int64_t i = 0; i < pred.cols(); ++i) {
        out << ",f" << i;
    }
    out << "\n";
    for (int64_t r = 0; r < pred.rows(); ++r) {
        out << format_double(indexes[static_cast<size_t>(r)]);
        for (int64_t c = 0; c < pred.cols(); ++c) {
            out << "," << format_double(pred.at(r, c));
        }
        out << "\n";
    }
}

void run_predict_trajectories(const std::filesystem::path& checkpoint_path,
                              const std::filesystem::path& x0_csv, int64_t steps,
                              const std::filesystem::path& out_ndjson) {
    checkpoint::Loaded loaded = checkpoint::load(checkpoint_path);
    if (loaded.kind != "trajpred") {
        throw ConfigError("predict: initial-state requests need a trajpred checkpoint, this "
                          "one is '" + loaded.kind + "'");
    }
    const Tensor x0 = data::load_states_csv(x0_csv); // d x B
    const int64_t m = steps > 0 ? steps : loaded.trajpred->train_steps();
    const std::vector<Tensor> preds = loaded.trajpred->predict_new(x0, m);

    std::ofstream out(out_ndjson);
    if (!out) {
        throw Error("cannot write " + out_ndjson.string());
    }
    for (size_t k = 0; k < preds.size(); ++k) {
        out << "{\"x0\":[";
        for (int64_t i = 0; i < x0.rows(); ++i) {
            out << (i ? "," : "") << format_double(x0.at(i, static_cast<int64_t>(k)));
        }
        out << "],\"traj\":[";
        for (int64_t s = 0; s < preds[k].cols(); ++s) {
            out << (s ? ",[" : "[");
            for (int64_t i = 0; i < preds[k].rows(); ++i) {
                out << (i ? "," : "") << format_double(preds[k].at(i, s));
            }
            out << "]";
        }
        out << "]}\n";
    }
}

namespace {

/// Deterministic seeded split of n items into train/val/test counts.
std::vector<std::vector<int64_t>> split_ids(int64_t n, const std::vector<int64_t>& counts,
                                            std::uint64_t seed) {
    int64_t total = 0;
    for (int64_t c : counts) {
        if (c < 0) {
            throw InvalidParams("gen-data: negative split count");
        }
        total += c;
    }
    if (total > n) {
        throw InvalidParams("gen-data: split counts exceed generated count");
    }
    std::vector<int64_t> ids(static_cast<size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    nets::Rng rng(nets::Rng::mix(seed, 0x5EED5));
    for (int64_t i = n - 1; i > 0; --i) {
        std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(rng.below(i + 1))]);
    }
    std::vector<std::vector<int64_t>> out;
    size_t pos = 0;
    for (int64_t c : counts) {
        std::vector<int64_t> part(ids.begin() + static_cast<int64_t>(pos),
                                  ids.begin() + static_cast<int64_t>(pos) + c);
        std::sort(part.begin(), part.end());
        out.push_back(std::move(part));
        pos += static_cast<size_t>(c);
    }
    return out;
}

Tensor tensor_from_json_matrix(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw InvalidParams("gen-data: '" + what + "' must be a matrix (list of rows)");
    }
    std::vector<std::vector<double>> rows;
    for (const json& r : j) {
        rows.push_back(r.get<std::vector<double>>());
    }
    return Tensor::from_rows(rows);
}

} // namespace

void run_gen_data(const std::string& kind, const json& params,
                  const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::uint64_t seed = params.value("seed", 0ULL);
    json provenance;
    provenance["kind"] = kind;
    provenance["params"] = params;
    std::vector<std::string> files;

    if (kind == "poly-manifold") {
        datagen::PolyManifoldParams p;
        p.mu = params.value("mu", p.mu);
        p.lambda = params.value("lambda", p.lambda);
        p.dt = params.value("dt", p.dt);
        p.steps = params.value("steps", p.steps);
        if (params.contains("box")) {
            const auto box = params.at("box").get<std::vector<double>>();
            if (box.size() != 2) {
                throw InvalidParams("gen-data: 'box' must be [lo, hi]");
            }
            p.box_lo = box[0];
            p.box_hi = box[1];
        }
        p.count = params.value("count", static_cast<int64_t>(1));
        p.seed = seed;
        const std::vector<Tensor> trajs = datagen::gen_poly_manifold(p);

        std::vector<int64_t> counts =
            params.value("splits", std::vector<int64_t>{p.count, 0, 0});
        if (counts.size() != 3) {
            throw InvalidParams("gen-data: 'splits' must be [train, val, test]");
        }
        const auto parts = split_ids(p.count, counts, seed);
        const char* names[] = {"train.ndjson", "val.ndjson", "test.ndjson"};
        for (size_t s = 0; s < 3; ++s) {
            if (counts[s] == 0) {
                continue;
            }
            std::vector<Tensor> subset;
            for (int64_t id : parts[s]) {
                subset.push_back(trajs[static_cast<size_t>(id)]);
            }
            data::save_trajectories_ndjson(out_dir / names[s], subset);
            files.push_back(names[s]);
        }
    } else if (kind == "linear") {
        if (!params.contains("A")) {
            throw InvalidParams("gen-data: 'A' (system matrix) is required");
        }
        const Tensor A = tensor_from_json_matrix(params.at("A"), "A");
        const int64_t m = params.value("steps", static_cast<int64_t>(50));
        const std::string output = params.value("output", std::string("snapshots"));

        std::vector<Tensor> x0s;
        if (params.contains("x0")) {
            const Tensor given = tensor_from_json_matrix(params.at("x0"), "x0");
            for (int64_t r = 0; r < given.rows(); ++r) {
                Tensor x(A.rows(), 1);
                for (int64_t i = 0; i < A.rows(); ++i) {
                    x[i] = given.at(r, i);
                }
                x0s.push_back(std::move(x));
            }
        } else {
            const int64_t count = params.value("count", static_cast<int64_t>(1));
            std::vector<double> box =
                params.value("box", std::vector<double>{-1.0, 1.0});
            if (box.size() != 2 || !(box[0] < box[1])) {
                throw InvalidParams("gen-data: 'box' must be [lo, hi]");
            }
            nets::Rng rng(seed);
            for (int64_t k = 0; k < count; ++k) {
                Tensor x(A.rows(), 1);
                for (int64_t i = 0; i < A.rows(); ++i) {
                    x[i] = rng.uniform(box[0], box[1]);
                }
                x0s.push_back(std::move(x));
            }
        }

        if (output == "snapshots") {
            if (x0s.size() != 1) {
                throw InvalidParams("gen-data: snapshot output needs exactly one x0");
            }
            data::SnapshotSplit all = datagen::gen_linear_snapshots(A, x0s[0], m);
            std::vector<int64_t> counts =
                params.value("splits", std::vector<int64_t>{m + 1, 0, 0});
            if (counts.size() != 3) {
                throw InvalidParams("gen-data: 'splits' must be [train, val, test]");
            }
            const auto parts = split_ids(m + 1, counts, seed);
            const char* names[] = {"train.csv", "val.csv", "test.csv"};
            for (size_t s = 0; s < 3; ++s) {
                if (counts[s] == 0) {
                    continue;
                }
                data::SnapshotSplit sub;
                sub.X = Tensor(all.X.rows(), static_cast<int64_t>(parts[s].size()));
                for (size_t k = 0; k < parts[s].size(); ++k) {
                    sub.t.push_back(all.t[static_cast<size_t>(parts[s][k])]);
                    for (int64_t i = 0; i < all.X.rows(); ++i) {
                        sub.X.at(i, static_cast<int64_t>(k)) = all.X.at(i, parts[s][k]);
                    }
                }
                data::save_snapshot_csv(out_dir / names[s], sub);
                files.push_back(names[s]);
            }
        } else if (output == "trajectories") {
            const std::vector<Tensor> trajs = datagen::gen_linear_trajectories(A, x0s, m);
            const int64_t count = static_cast<int64_t>(trajs.size());
            std::vector<int64_t> counts =
                params.value("splits", std::vector<int64_t>{count, 0, 0});
            if (counts.size() != 3) {
                throw InvalidParams("gen-data: 'splits' must be [train, val, test]");
            }
            const auto parts = split_ids(count, counts, seed);
            const char* names[] = {"train.ndjson", "val.ndjson", "test.ndjson"};
            for (size_t s = 0; s < 3; ++s) {
                if (counts[s] == 0) {
                    continue;
                }
                std::vector<Tensor> subset;
                for (int64_t id : parts[s]) {
                    subset.push_back(trajs[static_cast<size_t>(id)]);
                }
                data::save_trajectories_ndjson(out_dir / names[s], subset);
                files.push_back(names[s]);
            }
        } else {
            throw InvalidParams("gen-data: 'output' must be snapshots or trajectories");
        }
    } else {
        throw InvalidParams("gen-data: unknown kind '" + kind +
                            "' (linear | poly-manifold)");
    }

    provenance["files"] = files;
    std::ofstream pf(out_dir / "provenance.json");
    pf << provenance.dump(2) << "\n";
}

void run_plot_data(const std::filesystem::path& stats_csv,
                   const std::filesystem::path& out_csv) {
    stats::write_long_csv(out_csv, stats::reshape_long(stats_csv));
}

void run_hypsearch(const json& cfg, const std::filesystem::path& base_dir) {
    const std::string kind = model_kind(cfg);
    const std::filesystem::path out_dir = output_dir(cfg, base_dir);
    if (!cfg.contains("hyp_options")) {
        throw ConfigError("config: 'hyp_options' is required for hypsearch");
    }

    hyp::SearchSpec spec;
    spec.model_kind = kind;
    spec.base_hyperparameters = cfg.value("hyperparameters", json::object());
    check_known(spec.base_hyperparameters, kind);
    spec.options = hyp::HypOptions::from_json(cfg.at("hyp_options"), kind);
    spec.numruns = cfg.value("numruns", static_cast<int64_t>(-1));
    spec.sort_key = cfg.value("sort_key", std::string("avg_pred_anae_va"));
    spec.workers = cfg.value("workers", static_cast<int64_t>(1));
    spec.master_seed = resolve_seed(cfg);
    spec.results_csv = out_dir / "results.csv";
    spec.summary_json = out_dir / "summary.json";

    hyp::SearchDataset ds;
    if (kind == "statepred") {
        ds.snapshots = load_snapshot_dataset(cfg, base_dir);
    } else {
        ds.trajectories = load_trajectory_dataset(cfg, base_dir);
    }

    const std::vector<hyp::SearchResultRow> ranked = hyp::run_hyp_search(ds, spec);
    std::cout << "results: " << spec.results_csv.string() << "\n";
    std::cout << "top configurations by " << spec.sort_key << ":\n";
    const size_t top = std::min<size_t>(5, ranked.size());
    for (size_t i = 0; i < top; ++i) {
        std::cout << "  " << (i + 1) << ". config " << ranked[i].config_id << "  "
                  << spec.sort_key << " = " << ranked[i].summary.at(spec.sort_key) << "  "
                  << ranked[i].resolved.dump() << "\n";
    }
    if (ranked.empty()) {
        std::cout << "  (no completed runs)\n";
    }
}

} // namespace koopman::cli
