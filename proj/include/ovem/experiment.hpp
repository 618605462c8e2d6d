#pragma once

// Grid search, replicated train/validation/test experiments, and reports.

#include "ovem/auction.hpp"
#include "ovem/baselines.hpp"
#include "ovem/em.hpp"
#include "ovem/error.hpp"
#include "ovem/io.hpp"
#include "ovem/predictors.hpp"
#include "ovem/random.hpp"
#include "ovem/simdata.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace ovem {

enum class Method { ov_linear, ov_kernel, ov_neural, nof, zero };

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::ov_linear: return "ov-linear";
    case Method::ov_kernel: return "ov-kernel";
    case Method::ov_neural: return "ov-neural";
    case Method::nof: return "nof";
    case Method::zero: return "zero";
    }
    return "unknown";
}

inline Method parse_method(std::string_view s) {
    for (Method m : {Method::ov_linear, Method::ov_kernel, Method::ov_neural, Method::nof, Method::zero}) {
        if (s == to_string(m)) {
            return m;
        }
    }
    throw Error(ErrorKind::invalid_argument, "unknown method '" + std::string(s) + "'");
}

/// Hyperparameter lists searched by grid_search. sigma values are multiplied by
/// the standard deviation of the training highest bids.
struct Grids {
    std::vector<double> sigma_scales = {0.01, 0.05, 0.1, 0.5, 1.0};
    std::vector<double> lambdas = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    std::vector<int> degrees = {2};
    std::vector<std::size_t> hidden_units = {5};
    std::vector<double> learning_rates = {1e-3, 1e-2};
    std::vector<std::size_t> batch_sizes = {32, 128};
    std::vector<std::size_t> epochs_per_mstep = {1, 5};
    std::size_t patience = 5;
};

/// One grid point. Fields irrelevant to the method keep their defaults.
struct Hyperparams {
    double sigma_scale = 0.0;
    double sigma = 0.0;
    double lambda = 0.0;
    int degree = 0;
    std::size_t hidden_units = 0;
    double learning_rate = 0.0;
    std::size_t batch_size = 0;
    std::size_t epochs_per_mstep = 0;
};

struct GridSearchOptions {
    double tol = 1e-5;
    std::size_t max_iters = 200;
    std::size_t threads = 1;
    std::uint64_t seed = 0;
};

struct GridSearchResult {
    Hyperparams best;
    Predictor predictor;
    double valid_revenue = 0.0;
    std::size_t em_iterations = 0;
    std::size_t points_tried = 0;
    std::size_t points_failed = 0;
};

inline double stddev_of_highest_bids(const Dataset& data) {
    const Eigen::VectorXd b = data.highest_bids();
    const double mean = b.mean();
    const double var = (b.array() - mean).square().mean();
    return std::sqrt(var);
}

namespace detail {

inline void require_nonempty(bool ok, const char* what) {
    if (!ok) {
        throw Error(ErrorKind::invalid_argument, std::string("grid '") + what + "' is empty");
    }
}

inline void validate_grids(Method method, const Grids& g) {
    if (method == Method::nof || method == Method::zero) {
        return;
    }
    require_nonempty(!g.sigma_scales.empty(), "sigma");
    require_nonempty(!g.lambdas.empty(), "lambda");
    if (method == Method::ov_kernel) {
        require_nonempty(!g.degrees.empty(), "degree");
    }
    if (method == Method::ov_neural) {
        require_nonempty(!g.hidden_units.empty(), "hidden_units");
        require_nonempty(!g.learning_rates.empty(), "learning_rate");
        require_nonempty(!g.batch_sizes.empty(), "batch_size");
        require_nonempty(!g.epochs_per_mstep.empty(), "epochs_per_mstep");
    }
}

template <class T>
std::vector<T> ascending(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace detail

/// Fits one model per grid point and keeps the one with the highest validation
/// revenue. Points are visited by ascending lambda, then sigma, then the
/// method-specific settings, and a later point must be strictly better to win,
/// so ties go to the smaller lambda, then the smaller sigma. No refit.
inline GridSearchResult grid_search(Method method, const Grids& grids, const Dataset& train, const Dataset& valid,
                                    const GridSearchOptions& options = {}) {
    detail::validate_grids(method, grids);
    if (train.empty() || valid.empty()) {
        throw Error(ErrorKind::empty_dataset, "grid search needs training and validation auctions");
    }
    const Eigen::MatrixXd valid_x = valid.feature_matrix();

    if (method == Method::nof || method == Method::zero) {
        const ScalarPolicy policy = method == Method::nof ? nof_fit(train) : zero_policy();
        GridSearchResult r{{}, policy, total_revenue(policy.predict(valid_x), valid), 0, 1, 0};
        return r;
    }

    const double bid_scale = stddev_of_highest_bids(train);
    const double sigma_unit = bid_scale > 0.0 ? bid_scale : 1.0;

    std::optional<GridSearchResult> best;
    std::size_t tried = 0;
    std::size_t failed = 0;
    std::string last_failure;

    auto consider = [&](const Hyperparams& hp, auto&& fit) {
        ++tried;
        try {
            EmConfig cfg{hp.sigma, hp.lambda, options.tol, options.max_iters, options.threads};
            auto result = fit(cfg);
            if (!best || result.best_valid_revenue > best->valid_revenue) {
                best = GridSearchResult{hp, Predictor(std::move(result.predictor)), result.best_valid_revenue,
                                        result.trace.size() - 1, 0, 0};
            }
        } catch (const Error& e) {
            ++failed;
            last_failure = e.what();
        }
    };

    for (double lambda : detail::ascending(grids.lambdas)) {
        for (double scale : detail::ascending(grids.sigma_scales)) {
            Hyperparams hp;
            hp.sigma_scale = scale;
            hp.sigma = scale * sigma_unit;
            hp.lambda = lambda;
            switch (method) {
            case Method::ov_linear:
                consider(hp, [&](const EmConfig& cfg) {
                    LinearLearner learner(train, valid, cfg.lambda, cfg.sigma);
                    return em_fit(learner, train, valid, cfg);
                });
                break;
            case Method::ov_kernel:
                for (int degree : detail::ascending(grids.degrees)) {
                    Hyperparams k = hp;
                    k.degree = degree;
                    consider(k, [&](const EmConfig& cfg) {
                        KernelLearner learner(train, valid, degree, cfg.lambda, cfg.sigma);
                        return em_fit(learner, train, valid, cfg);
                    });
                }
                break;
            case Method::ov_neural:
                for (std::size_t hidden : detail::ascending(grids.hidden_units)) {
                    for (double lr : detail::ascending(grids.learning_rates)) {
                        for (std::size_t batch : detail::ascending(grids.batch_sizes)) {
                            for (std::size_t epochs : detail::ascending(grids.epochs_per_mstep)) {
                                Hyperparams n = hp;
                                n.hidden_units = hidden;
                                n.learning_rate = lr;
                                n.batch_size = batch;
                                n.epochs_per_mstep = epochs;
                                consider(n, [&](const EmConfig& cfg) {
                                    const SgdConfig sgd{lr, batch, epochs, grids.patience, options.seed};
                                    NeuralLearner learner(train, valid, hidden, cfg.lambda, cfg.sigma, sgd);
                                    return em_fit(learner, train, valid, cfg);
                                });
                            }
                        }
                    }
                }
                break;
            default:
                break;
            }
        }
    }
    if (!best) {
        throw Error(ErrorKind::all_points_failed,
                    "all " + std::to_string(tried) + " grid points failed; last: " + last_failure);
    }
    best->points_tried = tried;
    best->points_failed = failed;
    return std::move(*best);
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
    Method method = Method::ov_linear;
    /// Simulated data (regenerated per replication) unless data_path is set.
    SimConfig simulation;
    std::optional<std::filesystem::path> data_path;
    std::size_t n_train = 1000;
    std::size_t n_valid = 500;
    std::size_t n_test = 500;
    std::size_t replications = 10;
    Grids grids;
    double tol = 1e-5;
    std::size_t max_iters = 200;
    bool standardize = false;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct ReplicationResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double test_pct = 0.0;
    double valid_revenue = 0.0;
    std::size_t em_iterations = 0;
    std::size_t grid_points = 0;
    std::size_t grid_failures = 0;
    Hyperparams chosen;
    double seconds_data = 0.0;
    double seconds_fit = 0.0;
    double seconds_eval = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<ReplicationResult> replications;
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t failed = 0;
};

/// Mean and standard error (sample std / sqrt(n)) of the successful replications.
inline std::pair<double, double> mean_and_stderr(const std::vector<double>& values) {
    if (values.empty()) {
        return {0.0, 0.0};
    }
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= n;
    if (values.size() < 2) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

/// Replication r uses seed derive_seed(master, r); simulated data come from
/// derive_seed(seed_r, 0) and the split from derive_seed(seed_r, 1).
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    if (cfg.replications == 0) {
        throw Error(ErrorKind::invalid_argument, "replications must be positive");
    }
    detail::validate_grids(cfg.method, cfg.grids);
    using clock = std::chrono::steady_clock;
    auto seconds_since = [](clock::time_point t0) {
        return std::chrono::duration<double>(clock::now() - t0).count();
    };

    std::optional<Dataset> file_data;
    if (cfg.data_path) {
        file_data = load_dataset(*cfg.data_path);
    }

    ExperimentReport report;
    report.config = cfg;
    std::vector<double> pcts;
    for (std::size_t r = 0; r < cfg.replications; ++r) {
        ReplicationResult rep;
        rep.index = r;
        rep.seed = derive_seed(cfg.seed, r);
        try {
            auto t0 = clock::now();
            Dataset all;
            if (file_data) {
                all = *file_data;
            } else {
                SimConfig sim = cfg.simulation;
                sim.seed = derive_seed(rep.seed, 0);
                all = gen_simulated(sim).data;
            }
            Splits parts = split(all, cfg.n_train, cfg.n_valid, cfg.n_test, derive_seed(rep.seed, 1));
            if (cfg.standardize) {
                const Standardizer s = Standardizer::fit(parts.train);
                parts = {s.apply(parts.train), s.apply(parts.valid), s.apply(parts.test)};
            }
            rep.seconds_data = seconds_since(t0);

            t0 = clock::now();
            const GridSearchOptions opts{cfg.tol, cfg.max_iters, cfg.threads, derive_seed(rep.seed, 2)};
            GridSearchResult fit = grid_search(cfg.method, cfg.grids, parts.train, parts.valid, opts);
            rep.seconds_fit = seconds_since(t0);

            t0 = clock::now();
            const Eigen::VectorXd reserves = predict(FittedModel{fit.predictor, std::nullopt}, parts.test);
            rep.test_pct = pct_of_max(reserves, parts.test);
            rep.seconds_eval = seconds_since(t0);

            rep.valid_revenue = fit.valid_revenue;
            rep.em_iterations = fit.em_iterations;
            rep.grid_points = fit.points_tried;
            rep.grid_failures = fit.points_failed;
            rep.chosen = fit.best;
            rep.ok = true;
            pcts.push_back(rep.test_pct);
        } catch (const Error& e) {
            rep.ok = false;
            rep.error = e.what();
            ++report.failed;
        }
        report.replications.push_back(std::move(rep));
    }
    std::tie(report.mean, report.stderr_) = mean_and_stderr(pcts);
    return report;
}

// ---------------------------------------------------------------------------
// Config and report serialisation (JSON)

inline Grids grids_from_json(const nlohmann::json& j, Grids g = {}) {
    g.sigma_scales = j.value("sigma", g.sigma_scales);
    g.lambdas = j.value("lambda", g.lambdas);
    g.degrees = j.value("degree", g.degrees);
    g.hidden_units = j.value("hidden_units", g.hidden_units);
    g.learning_rates = j.value("learning_rate", g.learning_rates);
    g.batch_sizes = j.value("batch_size", g.batch_sizes);
    g.epochs_per_mstep = j.value("epochs_per_mstep", g.epochs_per_mstep);
    g.patience = j.value("patience", g.patience);
    return g;
}

inline nlohmann::ordered_json grids_to_json(const Grids& g) {
    return {{"sigma", g.sigma_scales},           {"lambda", g.lambdas},
            {"degree", g.degrees},               {"hidden_units", g.hidden_units},
            {"learning_rate", g.learning_rates}, {"batch_size", g.batch_sizes},
            {"epochs_per_mstep", g.epochs_per_mstep}, {"patience", g.patience}};
}

/// Reads an experiment config. Recognised keys: method, data {path | variant,
/// n_total, dim, noise_std}, split [train, valid, test], replications, grids,
/// tol, max_iters, standardize, seed, threads. Unknown keys are rejected.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {"method", "data",      "split", "replications", "grids", "tol",
                                                   "max_iters", "standardize", "seed", "threads"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw Error(ErrorKind::invalid_argument, "unknown config key '" + key + "'");
        }
    }
    try {
        ExperimentConfig c;
        if (j.contains("method")) {
            c.method = parse_method(j.at("method").get<std::string>());
        }
        if (j.contains("data")) {
            const auto& d = j.at("data");
            if (d.contains("path")) {
                c.data_path = d.at("path").get<std::string>();
            } else {
                const std::string variant = d.value("variant", std::string("linear"));
                if (variant != "linear" && variant != "nonlinear") {
                    throw Error(ErrorKind::invalid_argument, "data.variant must be linear or nonlinear");
                }
                c.simulation.variant = variant == "linear" ? SimVariant::linear : SimVariant::nonlinear;
                c.simulation.n_total = d.value("n_total", c.simulation.n_total);
                c.simulation.dim = d.value("dim", c.simulation.dim);
                c.simulation.noise_std = d.value("noise_std", c.simulation.noise_std);
            }
        }
        if (j.contains("split")) {
            const auto s = j.at("split").get<std::vector<std::size_t>>();
            if (s.size() != 3) {
                throw Error(ErrorKind::invalid_argument, "split needs [train, valid, test]");
            }
            c.n_train = s[0];
            c.n_valid = s[1];
            c.n_test = s[2];
        }
        c.replications = j.value("replications", c.replications);
        if (j.contains("grids")) {
            c.grids = grids_from_json(j.at("grids"));
        }
        c.tol = j.value("tol", c.tol);
        c.max_iters = j.value("max_iters", c.max_iters);
        c.standardize = j.value("standardize", c.standardize);
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", c.threads);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse_error, std::string("config: ") + e.what());
    }
}

inline nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json data;
    if (c.data_path) {
        data["path"] = c.data_path->string();
    } else {
        data["variant"] = c.simulation.variant == SimVariant::linear ? "linear" : "nonlinear";
        data["n_total"] = c.simulation.n_total;
        data["dim"] = c.simulation.dim;
        data["noise_std"] = c.simulation.noise_std;
    }
    nlohmann::ordered_json j;
    j["method"] = to_string(c.method);
    j["data"] = data;
    j["split"] = {c.n_train, c.n_valid, c.n_test};
    j["replications"] = c.replications;
    j["grids"] = grids_to_json(c.grids);
    j["tol"] = c.tol;
    j["max_iters"] = c.max_iters;
    j["standardize"] = c.standardize;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    return j;
}

inline nlohmann::ordered_json hyperparams_to_json(Method method, const Hyperparams& h) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    if (method == Method::nof || method == Method::zero) {
        return j;
    }
    j["sigma_scale"] = h.sigma_scale;
    j["sigma"] = h.sigma;
    j["lambda"] = h.lambda;
    if (method == Method::ov_kernel) {
        j["degree"] = h.degree;
    }
    if (method == Method::ov_neural) {
        j["hidden_units"] = h.hidden_units;
        j["learning_rate"] = h.learning_rate;
        j["batch_size"] = h.batch_size;
        j["epochs_per_mstep"] = h.epochs_per_mstep;
    }
    return j;
}

/// Machine-readable results. Wall-clock timings are included only on request
/// so that identical runs produce identical bytes.
inline nlohmann::ordered_json report_to_json(const ExperimentReport& report, bool include_timings = false) {
    nlohmann::ordered_json reps = nlohmann::ordered_json::array();
    for (const auto& r : report.replications) {
        nlohmann::ordered_json j;
        j["index"] = r.index;
        j["seed"] = r.seed;
        j["ok"] = r.ok;
        if (r.ok) {
            j["test_pct_of_max"] = r.test_pct;
            j["valid_revenue"] = r.valid_revenue;
            j["em_iterations"] = r.em_iterations;
            j["grid_points"] = r.grid_points;
            j["grid_failures"] = r.grid_failures;
            j["chosen"] = hyperparams_to_json(report.config.method, r.chosen);
        } else {
            j["error"] = r.error;
        }
        if (include_timings) {
            j["seconds"] = {{"data", r.seconds_data}, {"fit", r.seconds_fit}, {"eval", r.seconds_eval}};
        }
        reps.push_back(std::move(j));
    }
    nlohmann::ordered_json j;
    j["config"] = experiment_config_to_json(report.config);
    j["replications"] = std::move(reps);
    j["aggregate"] = {{"mean_pct_of_max", report.mean},
                      {"stderr", report.stderr_},
                      {"succeeded", report.replications.size() - report.failed},
                      {"failed", report.failed}};
    return j;
}

inline void write_report_table(std::ostream& out, const ExperimentReport& report) {
    char line[256];
    out << "method " << to_string(report.config.method) << ", " << report.replications.size()
        << " replications\n";
    out << "  rep   test %max   valid revenue   iters   fit seconds\n";
    for (const auto& r : report.replications) {
        if (r.ok) {
            std::snprintf(line, sizeof line, "  %3zu   %9.3f   %13.4f   %5zu   %11.2f\n", r.index, r.test_pct,
                          r.valid_revenue, r.em_iterations, r.seconds_fit);
        } else {
            std::snprintf(line, sizeof line, "  %3zu   FAILED: %s\n", r.index, r.error.c_str());
        }
        out << line;
    }
    std::snprintf(line, sizeof line, "  mean %.2f +- %.2f (stderr)\n", report.mean, report.stderr_);
    out << line;
}

} // namespace ovem
