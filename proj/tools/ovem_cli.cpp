// ovem: simulate auction data, train reserve-price predictors, evaluate them,
// and run replicated experiments.

#include "ovem/ovem.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ovem::Error(ovem::ErrorKind::io_error, "cannot open " + path);
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ovem::Error(ovem::ErrorKind::parse_error, path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw ovem::Error(ovem::ErrorKind::io_error, "write failed for " + path);
    }
}

struct SimulateArgs {
    std::string variant = "linear";
    std::size_t n_total = 2000;
    std::size_t dim = 5;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
    std::string out;
};

void run_simulate(const SimulateArgs& a) {
    ovem::SimConfig cfg;
    cfg.variant = a.variant == "nonlinear" ? ovem::SimVariant::nonlinear : ovem::SimVariant::linear;
    cfg.n_total = a.n_total;
    cfg.dim = a.dim;
    cfg.noise_std = a.noise_std;
    cfg.seed = a.seed;
    const auto sim = ovem::gen_simulated(cfg);
    ovem::save_dataset(a.out, sim.data);
    std::printf("wrote %zu auctions with %zu features to %s\n", sim.data.size(), sim.data.dim(), a.out.c_str());
}

struct TrainArgs {
    std::string method = "ov-linear";
    std::string train;
    std::string valid;
    std::string config;
    std::optional<std::uint64_t> seed;
    bool standardize = false;
    std::string out;
};

void run_train(const TrainArgs& a) {
    ovem::ExperimentConfig cfg;
    if (!a.config.empty()) {
        cfg = ovem::experiment_config_from_json(read_json_file(a.config));
    }
    cfg.method = ovem::parse_method(a.method);
    if (a.seed) {
        cfg.seed = *a.seed;
    }
    ovem::Dataset train = ovem::load_dataset(a.train);
    ovem::Dataset valid = ovem::load_dataset(a.valid);
    std::optional<ovem::Standardizer> transform;
    if (a.standardize || cfg.standardize) {
        transform = ovem::Standardizer::fit(train);
        train = transform->apply(train);
        valid = transform->apply(valid);
    }
    const ovem::GridSearchOptions opts{cfg.tol, cfg.max_iters, cfg.threads, cfg.seed};
    const auto fit = ovem::grid_search(cfg.method, cfg.grids, train, valid, opts);
    ovem::save_predictor(a.out, ovem::FittedModel{fit.predictor, transform});
    std::printf("%s: validation revenue %.6f (%.3f%% of max), %zu/%zu grid points failed\n",
                std::string(ovem::to_string(cfg.method)).c_str(), fit.valid_revenue,
                100.0 * fit.valid_revenue / ovem::oracle_revenue(valid), fit.points_failed, fit.points_tried);
    std::cout << "chosen " << ovem::hyperparams_to_json(cfg.method, fit.best).dump() << "\n";
}

void run_evaluate(const std::string& model_path, const std::string& data_path) {
    const ovem::FittedModel model = ovem::load_model(model_path);
    const ovem::Dataset data = ovem::load_dataset(data_path);
    const Eigen::VectorXd reserves = ovem::predict(model, data);
    std::printf("auctions %zu\nrevenue %.10g\noracle %.10g\npct_of_max %.6f\n", data.size(),
                ovem::total_revenue(reserves, data), ovem::oracle_revenue(data), ovem::pct_of_max(reserves, data));
}

struct ExperimentArgs {
    std::string config;
    std::optional<std::string> method;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool timings = false;
};

void run_experiment_cmd(const ExperimentArgs& a) {
    ovem::ExperimentConfig cfg = ovem::experiment_config_from_json(read_json_file(a.config));
    if (a.method) {
        cfg.method = ovem::parse_method(*a.method);
    }
    if (a.seed) {
        cfg.seed = *a.seed;
    }
    const ovem::ExperimentReport report = ovem::run_experiment(cfg);
    ovem::write_report_table(std::cout, report);
    if (!a.out.empty()) {
        write_text(a.out, ovem::report_to_json(report, a.timings).dump(2) + "\n");
    }
    if (report.failed > 0) {
        std::fprintf(stderr, "%zu of %zu replications failed\n", report.failed, report.replications.size());
        if (report.failed == report.replications.size()) {
            throw ovem::Error(ovem::ErrorKind::all_points_failed, "every replication failed");
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reserve-price learning for second-price auctions"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Write a simulated dataset as CSV");
    simulate->add_option("--variant", sim.variant, "linear or nonlinear")
        ->check(CLI::IsMember({"linear", "nonlinear"}));
    simulate->add_option("--n", sim.n_total, "Number of auctions");
    simulate->add_option("--dim", sim.dim, "Number of features");
    simulate->add_option("--noise", sim.noise_std, "Noise standard deviation");
    simulate->add_option("--seed", sim.seed, "Random seed");
    simulate->add_option("--out", sim.out, "Output CSV path")->required();

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Grid-search a predictor and save the best one");
    train->add_option("--method", tr.method, "ov-linear, ov-kernel, ov-neural, nof or zero");
    train->add_option("--train", tr.train, "Training CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--valid", tr.valid, "Validation CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--config", tr.config, "JSON config supplying grids, tol, max_iters")
        ->check(CLI::ExistingFile);
    train->add_option("--seed", tr.seed, "Seed for network initialisation and SGD");
    train->add_flag("--standardize", tr.standardize, "Standardize features on the training split");
    train->add_option("--out", tr.out, "Output predictor path")->required();

    std::string model_path;
    std::string data_path;
    auto* evaluate = app.add_subcommand("evaluate", "Report revenue of a saved predictor on a dataset");
    evaluate->add_option("--model", model_path, "Predictor file")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--data", data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);

    ExperimentArgs ex;
    auto* experiment = app.add_subcommand("experiment", "Run a replicated experiment");
    experiment->add_option("--config", ex.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    experiment->add_option("--method", ex.method, "Override the configured method");
    experiment->add_option("--seed", ex.seed, "Override the master seed");
    experiment->add_option("--out", ex.out, "Results JSON path");
    experiment->add_flag("--timings", ex.timings, "Include wall-clock timings in the results file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) {
            run_simulate(sim);
        } else if (*train) {
            run_train(tr);
        } else if (*evaluate) {
            run_evaluate(model_path, data_path);
        } else if (*experiment) {
            run_experiment_cmd(ex);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ovem: %s\n", e.what());
        return 1;
    }
    return 0;
}
