#include "koopman/checkpoint.hpp"

#include "koopman/cli.hpp"

#include <cstring>
#include <fstream>

namespace koopman::checkpoint {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

} // namespace

std::string encode_base64(const double* data, size_t count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    const size_t nbytes = count * sizeof(double);
    std::string out;
    out.reserve((nbytes + 2) / 3 * 4);
    for (size_t i = 0; i < nbytes; i += 3) {
        unsigned int chunk = bytes[i] << 16;
        if (i + 1 < nbytes) {
            chunk |= bytes[i + 1] << 8;
        }
        if (i + 2 < nbytes) {
            chunk |= bytes[i + 2];
        }
        out.push_back(kAlphabet[(chunk >> 18) & 0x3F]);
        out.push_back(kAlphabet[(chunk >> 12) & 0x3F]);
        out.push_back(i + 1 < nbytes ? kAlphabet[(chunk >> 6) & 0x3F] : '=');
        out.push_back(i + 2 < nbytes ? kAlphabet[chunk & 0x3F] : '=');
    }
    return out;
}

std::vector<double> decode_base64(const std::string& text) {
    if (text.size() % 4 != 0) {
        throw ParseError("base64 payload length is not a multiple of 4");
    }
    static int rev[256];
    static bool init = [] {
        for (int& v : rev) {
            v = -1;
        }
        for (int i = 0; i < 64; ++i) {
            rev[static_cast<unsigned char>(kAlphabet[i])] = i;
        }
        return true;
    }();
    (void)init;

    std::vector<unsigned char> bytes;
    bytes.reserve(text.size() / 4 * 3);
    for (size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + static_cast<size_t>(k)];
            if (c == '=') {
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = rev[static_cast<unsigned char>(c)];
                if (vals[k] < 0 || pad > 0) {
                    throw ParseError("invalid base64 character in payload");
                }
            }
        }
        const unsigned int chunk = (static_cast<unsigned int>(vals[0]) << 18) |
                                   (static_cast<unsigned int>(vals[1]) << 12) |
                                   (static_cast<unsigned int>(vals[2]) << 6) |
                                   static_cast<unsigned int>(vals[3]);
        bytes.push_back((chunk >> 16) & 0xFF);
        if (pad < 2) {
            bytes.push_back((chunk >> 8) & 0xFF);
        }
        if (pad < 1) {
            bytes.push_back(chunk & 0xFF);
        }
    }
    if (bytes.size() % sizeof(double) != 0) {
        throw ParseError("base64 payload is not a whole number of float64 values");
    }
    std::vector<double> out(bytes.size() / sizeof(double));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

namespace {

json tensor_to_json(const Tensor& t) {
    json j;
    j["rows"] = t.rows();
    j["cols"] = t.cols();
    j["kind"] = t.is_real() ? "real64" : "complex128";
    j["data"] = encode_base64(t.raw().data(), t.raw().size());
    return j;
}

Tensor tensor_from_json(const json& j) {
    const int64_t rows = j.at("rows").get<int64_t>();
    const int64_t cols = j.at("cols").get<int64_t>();
    const std::string kind = j.at("kind").get<std::string>();
    Tensor t(rows, cols, kind == "complex128" ? Scalar::Complex128 : Scalar::Real64);
    std::vector<double> data = decode_base64(j.at("data").get<std::string>());
    if (data.size() != t.raw().size()) {
        throw ParseError("checkpoint tensor payload size mismatch");
    }
    t.raw() = std::move(data);
    return t;
}

json spec_to_json(const nets::MlpSpec& s) {
    json j;
    j["input_size"] = s.input_size;
    j["hidden_layers"] = s.hidden_layers;
    j["output_size"] = s.output_size;
    j["activation"] = nets::to_string(s.activation);
    j["use_bias"] = s.use_bias;
    return j;
}

nets::MlpSpec spec_from_json(const json& j) {
    nets::MlpSpec s;
    s.input_size = j.at("input_size").get<int64_t>();
    s.hidden_layers = j.at("hidden_layers").get<std::vector<int64_t>>();
    s.output_size = j.at("output_size").get<int64_t>();
    s.activation = nets::activation_from_string(j.at("activation").get<std::string>());
    s.use_bias = j.at("use_bias").get<bool>();
    return s;
}

json mlp_to_json(const nets::MlpParams& p) {
    json j;
    j["spec"] = spec_to_json(p.spec);
    json layers = json::array();
    for (const nets::DenseLayer& l : p.layers) {
        json jl;
        jl["W"] = tensor_to_json(l.W);
        if (p.spec.use_bias) {
            jl["b"] = tensor_to_json(l.b);
        }
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    return j;
}

nets::MlpParams mlp_from_json(const json& j) {
    nets::MlpParams p;
    p.spec = spec_from_json(j.at("spec"));
    for (const json& jl : j.at("layers")) {
        nets::DenseLayer l;
        l.W = tensor_from_json(jl.at("W"));
        if (p.spec.use_bias) {
            l.b = tensor_from_json(jl.at("b"));
        }
        p.layers.push_back(std::move(l));
    }
    return p;
}

json scaler_to_json(const data::Scaler& s) {
    json j;
    j["shift"] = encode_base64(s.shifts().data(), s.shifts().size());
    j["scale"] = encode_base64(s.scales().data(), s.scales().size());
    return j;
}

data::Scaler scaler_from_json(const json& j) {
    return data::Scaler::from_params(decode_base64(j.at("shift").get<std::string>()),
                                     decode_base64(j.at("scale").get<std::string>()));
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << j.dump(2) << "\n";
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} // namespace

void save_statepred(const std::filesystem::path& path, const statepred::StatePred& model,
                    const json& config_echo) {
    if (!model.trained()) {
        throw NotTrained("save_statepred: model is not trained");
    }
    const statepred::KoopmanEigen& ke = model.koopman();
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "statepred";
    j["config"] = config_echo;
    j["autoencoder"] = {{"encoder", mlp_to_json(model.params().encoder)},
                        {"decoder", mlp_to_json(model.params().decoder)}};
    j["koopman"] = {{"rank", ke.rank},
                    {"W", tensor_to_json(ke.W)},
                    {"Lambda", tensor_to_json(ke.Lambda)},
                    {"Omega", tensor_to_json(ke.Omega)},
                    {"b", tensor_to_json(ke.b)}};
    j["scaler"] = scaler_to_json(model.scaler());
    // dt/t0 are emitted by nlohmann's shortest-round-trip formatting, which is
    // exact for doubles.
    j["index_map"] = {{"t0", model.index_map().t0}, {"dt", model.index_map().dt}};
    write_json(path, j);
}

void save_trajpred(const std::filesystem::path& path, const trajpred::TrajPred& model,
                   const json& config_echo) {
    if (!model.trained()) {
        throw NotTrained("save_trajpred: model is not trained");
    }
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "trajpred";
    j["config"] = config_echo;
    j["autoencoder"] = {{"encoder", mlp_to_json(model.params().encoder)},
                        {"decoder", mlp_to_json(model.params().decoder)}};
    j["koopman_layer"] = tensor_to_json(model.koopman_matrix());
    j["train_steps"] = model.train_steps();
    j["scaler"] = scaler_to_json(model.scaler());
    write_json(path, j);
}

Loaded load(const std::filesystem::path& path) {
    const json j = read_json(path);
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
        throw ConfigError(path.string() + ": missing schema_version");
    }
    if (j["schema_version"].get<int>() != kSchemaVersion) {
        throw ConfigError(path.string() + ": unsupported schema version " +
                          j["schema_version"].dump());
    }
    Loaded out;
    out.kind = j.at("kind").get<std::string>();
    out.config = j.value("config", json::object());

    nets::AutoencoderParams ae;
    ae.encoder = mlp_from_json(j.at("autoencoder").at("encoder"));
    ae.decoder = mlp_from_json(j.at("autoencoder").at("decoder"));
    data::Scaler scaler = scaler_from_json(j.at("scaler"));

    const json hyp = out.config.value("hyperparameters", json::object());
    if (out.kind == "statepred") {
        statepred::KoopmanEigen ke;
        const json& k = j.at("koopman");
        ke.rank = k.at("rank").get<int64_t>();
        ke.W = tensor_from_json(k.at("W"));
        ke.Lambda = tensor_from_json(k.at("Lambda"));
        ke.Omega = tensor_from_json(k.at("Omega"));
        ke.b = tensor_from_json(k.at("b"));
        data::IndexMap map;
        map.t0 = j.at("index_map").at("t0").get<double>();
        map.dt = j.at("index_map").at("dt").get<double>();
        map.established = true;
        statepred::StatePredConfig cfg = cli::statepred_config_from_json(hyp);
        out.statepred = statepred::StatePred::restore(std::move(cfg), std::move(ae),
                                                      std::move(ke), std::move(scaler), map);
    } else if (out.kind == "trajpred") {
        trajpred::TrajPredConfig cfg = cli::trajpred_config_from_json(hyp);
        out.trajpred = trajpred::TrajPred::restore(
            std::move(cfg), std::move(ae), tensor_from_json(j.at("koopman_layer")),
            std::move(scaler), j.at("train_steps").get<int64_t>());
    } else {
        throw ConfigError(path.string() + ": unknown model kind '" + out.kind + "'");
    }
    return out;
}

} // namespace koopman::checkpoint
