#include "koopman/cli.hpp"
#include "koopman/errors.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

std::vector<double> parse_index_list(const std::string& text) {
    std::vector<double> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) {
            return;
        }
        size_t pos = 0;
        const double v = std::stod(cur, &pos);
        if (pos != cur.size()) {
            throw koopman::ConfigError("bad index value '" + cur + "'");
        }
        out.push_back(v);
        cur.clear();
    };
    for (char c : text) {
        if (c == ',') {
            flush();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    flush();
    if (out.empty()) {
        throw koopman::ConfigError("no indexes given");
    }
    return out;
}

std::filesystem::path parent_of(const std::string& file) {
    const std::filesystem::path p(file);
    return p.has_parent_path() ? p.parent_path() : std::filesystem::path(".");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman autoencoder toolkit: learn linear dynamics of nonlinear systems "
                 "and predict states or trajectories"};
    app.require_subcommand(1);

    bool quiet = false, verbose = false;
    app.add_flag("--quiet", quiet, "suppress warnings");
    app.add_flag("--verbose", verbose, "extra progress output");

    std::string fit_config;
    CLI::App* fit = app.add_subcommand("fit", "train a model from a JSON config");
    fit->add_option("--config", fit_config, "config file")->required();

    std::string pr_ckpt, pr_indexes, pr_x0, pr_out;
    std::int64_t pr_steps = 0;
    CLI::App* predict = app.add_subcommand(
        "predict", "predict states at new indexes (statepred) or trajectories from new "
                   "initial states (trajpred)");
    predict->add_option("--checkpoint", pr_ckpt, "checkpoint file")->required();
    predict->add_option("--indexes", pr_indexes, "comma-separated index list (statepred)");
    predict->add_option("--x0", pr_x0, "initial-states CSV (trajpred)");
    predict->add_option("--steps", pr_steps, "rollout steps (trajpred; default: training length)");
    predict->add_option("--out", pr_out, "output file")->required();

    std::string hs_config;
    CLI::App* hypsearch =
        app.add_subcommand("hypsearch", "sweep hyperparameter options and rank the results");
    hypsearch->add_option("--config", hs_config, "config file with a hyp_options block")
        ->required();

    std::string gd_kind, gd_params, gd_out;
    CLI::App* gendata =
        app.add_subcommand("gen-data", "generate synthetic dynamical-system datasets");
    gendata->add_option("--kind", gd_kind, "linear | poly-manifold")->required();
    gendata->add_option("--params", gd_params, "JSON parameter file (defaults otherwise)");
    gendata->add_option("--out", gd_out, "output directory")->required();

    std::string pd_stats, pd_out;
    CLI::App* plotdata = app.add_subcommand(
        "plot-data", "reshape a stats.csv into tidy long format (epoch,split,metric,value)");
    plotdata->add_option("--stats", pd_stats, "stats.csv from fit")->required();
    plotdata->add_option("--out", pd_out, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    if (quiet) {
        koopman::log::level() = koopman::log::Level::Quiet;
    } else if (verbose) {
        koopman::log::level() = koopman::log::Level::Verbose;
    }

    try {
        if (*fit) {
            const auto outputs =
                koopman::cli::run_fit(koopman::cli::load_json_file(fit_config),
                                      parent_of(fit_config));
            std::cout << "checkpoint: " << outputs.checkpoint.string() << "\n"
                      << "stats:      " << outputs.stats_csv.string() << "\n"
                      << "summary:    " << outputs.summary.string() << "\n";
        } else if (*predict) {
            if (!pr_indexes.empty() && pr_x0.empty()) {
                koopman::cli::run_predict_indexes(pr_ckpt, parse_index_list(pr_indexes),
                                                  pr_out);
            } else if (pr_indexes.empty() && !pr_x0.empty()) {
                koopman::cli::run_predict_trajectories(pr_ckpt, pr_x0, pr_steps, pr_out);
            } else {
                throw koopman::ConfigError(
                    "predict: give exactly one of --indexes or --x0");
            }
            std::cout << "predictions: " << pr_out << "\n";
        } else if (*hypsearch) {
            koopman::cli::run_hypsearch(koopman::cli::load_json_file(hs_config),
                                        parent_of(hs_config));
        } else if (*gendata) {
            nlohmann::json params = nlohmann::json::object();
            if (!gd_params.empty()) {
                params = koopman::cli::load_json_file(gd_params);
            }
            koopman::cli::run_gen_data(gd_kind, params, gd_out);
            std::cout << "dataset written to " << gd_out << "\n";
        } else if (*plotdata) {
            koopman::cli::run_plot_data(pd_stats, pd_out);
            std::cout << "plot data: " << pd_out << "\n";
        }
    } catch (const koopman::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const koopman::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const koopman::InvalidParams& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const koopman::UnknownHyperparameter& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const koopman::UnknownSortKey& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
