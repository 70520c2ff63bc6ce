#pragma once

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaplab/config.hpp"
#include "gaplab/engine.hpp"
#include "gaplab/mlp.hpp"
#include "gaplab/quadratic.hpp"
#include "gaplab/theory.hpp"

namespace gaplab {

// y_t = beta * y_{t-1} + (1 - beta) * x_t, y_0 = x_0. Output-time
// smoothing only; stored telemetry stays raw.
inline std::vector<double> smooth_ema(const std::vector<double>& series, double beta) {
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("smooth_ema: beta must be in [0,1)");
    std::vector<double> out;
    out.reserve(series.size());
    double y = 0.0;
    for (std::size_t t = 0; t < series.size(); ++t) {
        y = (t == 0) ? series[0] : beta * y + (1.0 - beta) * series[t];
        out.push_back(y);
    }
    return out;
}

struct BuiltModel {
    std::unique_ptr<LossModel> model;
    Vec theta0;
    std::function<double(const Vec&)> accuracy;  // empty for quadratic
    const QuadraticModel* quadratic = nullptr;   // non-null for quadratic models
};

inline std::vector<double> resolve_spectrum(const ModelConfig& m) {
    if (m.spectrum == "logspace") return logspace_spectrum(m.dim, m.lambda_min, m.lambda_max);
    if (m.spectrum == "two_block")
        return two_block_spectrum(m.dim, m.dom_count, m.dom_min, m.dom_max, m.bulk_min, m.bulk_max);
    throw std::runtime_error("config: model.spectrum must be logspace or two_block");
}

inline BuiltModel build_model(const ExperimentConfig& cfg) {
    BuiltModel out;
    if (cfg.model.type == "quadratic") {
        auto q = std::make_unique<QuadraticModel>(resolve_spectrum(cfg.model),
                                                  cfg.model.basis_seed, zeros(cfg.model.dim),
                                                  cfg.model.noise_scale, cfg.model.noise_exponent);
        // start offset with equal weight on every eigendirection
        out.theta0 = q->minimizer();
        const double w = cfg.model.init_offset / std::sqrt(static_cast<double>(q->dim()));
        for (const Vec& u : q->eigenbasis()) axpy(w, u, out.theta0);
        out.quadratic = q.get();
        out.model = std::move(q);
    } else {
        Dataset ds;
        if (cfg.model.data == "blobs") {
            ds = generate_blobs(cfg.model.classes, cfg.model.input_dim, cfg.model.n_samples,
                                cfg.model.spread, cfg.model.data_seed);
        } else if (cfg.model.data == "idx") {
            ds = load_idx(cfg.model.images_path, cfg.model.labels_path, cfg.model.limit);
        } else {
            throw std::runtime_error("config: model.data must be blobs or idx");
        }
        partition_iid(ds, cfg.engine.workers, cfg.model.data_seed);
        const std::vector<int> widths = {ds.input_dim(), cfg.model.hidden, cfg.model.hidden,
                                         ds.classes()};
        auto mlp = std::make_unique<MlpModel>(widths, std::move(ds));
        out.theta0 = mlp->init_parameters(cfg.model.init_seed, cfg.model.init_scale);
        MlpModel* raw = mlp.get();
        out.accuracy = [raw](const Vec& theta) { return raw->accuracy(theta); };
        out.model = std::move(mlp);
    }
    return out;
}

// --- CSV emission -----------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

struct Column {
    std::string name;
    std::vector<std::string> cells;
    bool smoothable = false;
};

class Table {
public:
    // returns a stable reference: columns live in a deque
    Column& add(const std::string& name, bool smoothable = false) {
        cols_.push_back({name, {}, smoothable});
        return cols_.back();
    }

    void apply_ema(double beta) {
        for (auto& col : cols_) {
            if (!col.smoothable) continue;
            std::vector<double> xs;
            std::vector<std::size_t> where;
            for (std::size_t i = 0; i < col.cells.size(); ++i) {
                if (col.cells[i].empty()) continue;
                xs.push_back(std::stod(col.cells[i]));
                where.push_back(i);
            }
            const std::vector<double> ys = smooth_ema(xs, beta);
            for (std::size_t k = 0; k < where.size(); ++k) col.cells[where[k]] = fmt(ys[k]);
        }
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open output file " + path);
        for (std::size_t c = 0; c < cols_.size(); ++c)
            out << (c ? "," : "") << cols_[c].name;
        out << "\n";
        const std::size_t rows = cols_.empty() ? 0 : cols_.front().cells.size();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols_.size(); ++c)
                out << (c ? "," : "") << cols_[c].cells[r];
            out << "\n";
        }
    }

private:
    std::deque<Column> cols_;
};

inline std::string opt_cell(const std::optional<double>& v) {
    return v ? fmt(*v) : std::string();
}

}  // namespace detail

struct CsvSchema {
    bool accuracy = false;
    int n_eigs = 0;
    bool chi_col = false;
    std::vector<int> capacities;  // rho/rank column pairs
};

inline void write_records_csv(const std::vector<RoundRecord>& records, const CsvSchema& schema,
                              const std::string& path, std::optional<double> ema_beta) {
    detail::Table t;
    auto& c_round = t.add("round");
    auto& c_step = t.add("local_step");
    auto& c_loss = t.add("loss", true);
    detail::Column* c_acc = schema.accuracy ? &t.add("train_accuracy", true) : nullptr;
    std::vector<detail::Column*> c_eigs;
    for (int k = 0; k < schema.n_eigs; ++k)
        c_eigs.push_back(&t.add("eig_" + std::to_string(k + 1), true));
    detail::Column* c_chi = schema.chi_col ? &t.add("chi", true) : nullptr;
    std::vector<detail::Column*> c_rho, c_rank;
    for (int cap : schema.capacities) {
        c_rho.push_back(&t.add("rho_B" + std::to_string(cap), true));
        c_rank.push_back(&t.add("rank_B" + std::to_string(cap)));
    }
    auto& c_gmean = t.add("gap_norm_mean", true);
    auto& c_gmax = t.add("gap_norm_max", true);
    auto& c_policy = t.add("policy");

    for (const auto& r : records) {
        c_round.cells.push_back(std::to_string(r.round));
        c_step.cells.push_back(std::to_string(r.local_step));
        c_loss.cells.push_back(detail::fmt(r.loss));
        if (c_acc) c_acc->cells.push_back(detail::opt_cell(r.accuracy));
        for (int k = 0; k < schema.n_eigs; ++k)
            c_eigs[k]->cells.push_back(k < static_cast<int>(r.eigenvalues.size())
                                           ? detail::fmt(r.eigenvalues[k])
                                           : std::string());
        if (c_chi) c_chi->cells.push_back(detail::opt_cell(r.chi_value));
        for (std::size_t b = 0; b < schema.capacities.size(); ++b) {
            c_rho[b]->cells.push_back(b < r.rho_values.size() ? detail::opt_cell(r.rho_values[b])
                                                              : std::string());
            c_rank[b]->cells.push_back(
                b < r.retained_ranks.size() ? std::to_string(r.retained_ranks[b]) : std::string());
        }
        c_gmean.cells.push_back(detail::fmt(r.gap_norm_mean));
        c_gmax.cells.push_back(detail::fmt(r.gap_norm_max));
        c_policy.cells.push_back(r.policy);
    }

    if (ema_beta) t.apply_ema(*ema_beta);
    t.write(path);
}

// --- experiment runner ------------------------------------------------

class Manifest {
public:
    void set(const std::string& key, const std::string& value) {
        lines_.push_back(key + "=" + value);
    }
    void set(const std::string& key, double value) { set(key, detail::fmt(value)); }
    void set(const std::string& key, long long value) { set(key, std::to_string(value)); }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open manifest file " + path);
        for (const auto& l : lines_) out << l << "\n";
    }

private:
    std::vector<std::string> lines_;
};

namespace detail {

inline void manifest_common(Manifest& man, const ExperimentConfig& cfg) {
    man.set("experiment", cfg.experiment);
    man.set("model.type", cfg.model.type);
    if (cfg.model.type == "quadratic") {
        man.set("model.dim", static_cast<long long>(cfg.model.dim));
        man.set("model.spectrum", cfg.model.spectrum);
        if (cfg.model.spectrum == "logspace") {
            man.set("model.lambda_min", cfg.model.lambda_min);
            man.set("model.lambda_max", cfg.model.lambda_max);
        } else {
            man.set("model.dom_count", static_cast<long long>(cfg.model.dom_count));
            man.set("model.dom_min", cfg.model.dom_min);
            man.set("model.dom_max", cfg.model.dom_max);
            man.set("model.bulk_min", cfg.model.bulk_min);
            man.set("model.bulk_max", cfg.model.bulk_max);
        }
        man.set("model.noise_scale", cfg.model.noise_scale);
        man.set("model.noise_exponent", cfg.model.noise_exponent);
        man.set("model.basis_seed", static_cast<long long>(cfg.model.basis_seed));
        man.set("model.init_offset", cfg.model.init_offset);
    } else {
        man.set("model.input_dim", static_cast<long long>(cfg.model.input_dim));
        man.set("model.hidden", static_cast<long long>(cfg.model.hidden));
        man.set("model.classes", static_cast<long long>(cfg.model.classes));
        man.set("model.data", cfg.model.data);
        if (cfg.model.data == "blobs") {
            man.set("model.n_samples", static_cast<long long>(cfg.model.n_samples));
            man.set("model.spread", cfg.model.spread);
        } else {
            man.set("model.images_path", cfg.model.images_path);
            man.set("model.labels_path", cfg.model.labels_path);
            man.set("model.limit", static_cast<long long>(cfg.model.limit));
        }
        man.set("model.data_seed", static_cast<long long>(cfg.model.data_seed));
        man.set("model.init_seed", static_cast<long long>(cfg.model.init_seed));
        man.set("model.init_scale", cfg.model.init_scale);
    }
    man.set("engine.workers", static_cast<long long>(cfg.engine.workers));
    man.set("engine.tau", static_cast<long long>(cfg.engine.tau));
    man.set("engine.eta", cfg.engine.eta);
    man.set("engine.rounds", static_cast<long long>(cfg.engine.rounds));
    man.set("engine.batch_size", static_cast<long long>(cfg.engine.batch_size));
    man.set("engine.seed", static_cast<long long>(cfg.engine.seed));
    man.set("subspace.C", static_cast<long long>(cfg.subspace.dominant_dim));
    {
        std::string caps;
        for (int c : cfg.subspace.capacities) caps += (caps.empty() ? "" : ",") + std::to_string(c);
        man.set("subspace.capacities", caps);
    }
    man.set("subspace.rel_threshold", cfg.subspace.rel_threshold);
    man.set("probe.cadence", static_cast<long long>(cfg.probe.cadence));
    man.set("probe.lanczos_iters", static_cast<long long>(cfg.probe.lanczos_iters));
}

inline ProbeSpec make_probe(const ExperimentConfig& cfg) {
    ProbeSpec p;
    p.cadence = cfg.probe.cadence;
    p.dominant_dim = cfg.subspace.dominant_dim;
    p.lanczos_iters = cfg.probe.lanczos_iters;
    p.rel_threshold = cfg.subspace.rel_threshold;
    p.track_accuracy = cfg.probe.track_accuracy;
    return p;
}

}  // namespace detail

// Runs one experiment, writing CSVs plus a manifest into out_dir.
// Returns the paths of the CSV files written.
inline std::vector<std::string> run_experiment(const ExperimentConfig& cfg,
                                               const std::string& out_dir,
                                               std::optional<double> ema_beta = std::nullopt) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    Manifest man;
    detail::manifest_common(man, cfg);
    if (ema_beta) man.set("ema_beta", *ema_beta);
    std::vector<std::string> files;

    auto emit = [&](const std::vector<RoundRecord>& records, const CsvSchema& schema,
                    const std::string& name) {
        const std::string path = (fs::path(out_dir) / name).string();
        write_records_csv(records, schema, path, ema_beta);
        files.push_back(path);
    };

    const BuiltModel built =
        (cfg.experiment == "verify-theory") ? BuiltModel{} : build_model(cfg);
    const std::function<double(const Vec&)>* acc_fn =
        (built.accuracy && cfg.probe.track_accuracy) ? &built.accuracy : nullptr;

    if (cfg.experiment == "spectrum" || cfg.experiment == "alignment") {
        ProbeSpec probe = detail::make_probe(cfg);
        probe.n_eigs = cfg.subspace.dominant_dim + 5;
        probe.track_chi = (cfg.experiment == "alignment");
        const auto records = run_training(*built.model, cfg.engine, PolicySchedule{}, probe,
                                          built.theta0, acc_fn);
        CsvSchema schema;
        schema.accuracy = cfg.probe.track_accuracy && built.accuracy != nullptr;
        schema.n_eigs = probe.n_eigs;
        schema.chi_col = probe.track_chi;
        emit(records, schema, cfg.experiment + ".csv");
    } else if (cfg.experiment == "dom-bulk") {
        if (cfg.policy.switch_round < 1)
            throw std::runtime_error("config: dom-bulk requires policy.switch_round >= 1");
        const ProbeSpec probe = detail::make_probe(cfg);
        CsvSchema schema;
        schema.accuracy = cfg.probe.track_accuracy && built.accuracy != nullptr;
        for (SyncVariant variant : {SyncVariant::standard, SyncVariant::dom_projected,
                                    SyncVariant::bulk_projected}) {
            PolicySchedule schedule;
            schedule.variant = variant;
            schedule.switch_round = cfg.policy.switch_round;
            schedule.basis_source = cfg.policy.basis == "proxy"
                                        ? PolicySchedule::BasisSource::gap_proxy
                                        : PolicySchedule::BasisSource::true_dominant;
            schedule.proxy_capacity = cfg.policy.proxy_capacity;
            const auto records = run_training(*built.model, cfg.engine, schedule, probe,
                                              built.theta0, acc_fn);
            emit(records, schema, to_string(variant) + ".csv");
        }
        man.set("policy.switch_round", static_cast<long long>(cfg.policy.switch_round));
        man.set("policy.basis", cfg.policy.basis);
    } else if (cfg.experiment == "gap-sweep" || cfg.experiment == "tau-ablation") {
        ProbeSpec probe = detail::make_probe(cfg);
        probe.track_chi = true;
        probe.track_rho = true;
        probe.capacities = cfg.subspace.capacities;
        CsvSchema schema;
        schema.chi_col = true;
        schema.capacities = cfg.subspace.capacities;
        if (cfg.experiment == "gap-sweep") {
            const auto records = run_training(*built.model, cfg.engine, PolicySchedule{}, probe,
                                              built.theta0, acc_fn);
            emit(records, schema, "gap_sweep.csv");
        } else {
            std::string taus;
            for (int tau : cfg.policy.tau_sweep) {
                LocalSgdConfig leg = cfg.engine;
                leg.tau = tau;
                const auto records =
                    run_training(*built.model, leg, PolicySchedule{}, probe, built.theta0, acc_fn);
                emit(records, schema, "tau_" + std::to_string(tau) + ".csv");
                taus += (taus.empty() ? "" : ",") + std::to_string(tau);
            }
            man.set("policy.tau_sweep", taus);
        }
    } else if (cfg.experiment == "filter-sweep") {
        const std::vector<double> paper_grid = {0.0, 0.1, 0.25, 0.5, 1.0, 1.25, 1.5, 1.75, 2.0};
        std::vector<double> alphas = cfg.policy.alpha_sweep;
        std::vector<double> bulk_gains = cfg.policy.bulk_gain_sweep;
        if (alphas.empty() && bulk_gains.empty()) {
            alphas = paper_grid;
            bulk_gains = paper_grid;
        }
        const ProbeSpec probe = detail::make_probe(cfg);
        CsvSchema schema;
        schema.accuracy = cfg.probe.track_accuracy && built.accuracy != nullptr;
        auto run_leg = [&](double a, double g, const std::string& name) {
            PolicySchedule schedule;
            schedule.variant = SyncVariant::filtered;
            schedule.switch_round = cfg.policy.switch_round;
            schedule.dom_gain = a;
            schedule.bulk_gain = g;
            schedule.basis_source = cfg.policy.basis == "true"
                                        ? PolicySchedule::BasisSource::true_dominant
                                        : PolicySchedule::BasisSource::gap_proxy;
            schedule.proxy_capacity = cfg.policy.proxy_capacity;
            const auto records = run_training(*built.model, cfg.engine, schedule, probe,
                                              built.theta0, acc_fn);
            emit(records, schema, name);
        };
        for (double a : alphas) run_leg(a, 1.0, "alpha_" + detail::fmt_short(a) + ".csv");
        for (double g : bulk_gains) run_leg(1.0, g, "bulk_gain_" + detail::fmt_short(g) + ".csv");
        man.set("policy.proxy_capacity", static_cast<long long>(cfg.policy.proxy_capacity));
        man.set("policy.switch_round", static_cast<long long>(cfg.policy.switch_round));
    } else if (cfg.experiment == "verify-theory") {
        if (cfg.model.type != "quadratic")
            throw std::runtime_error("config: verify-theory requires model.type = quadratic");
        QuadraticModel model(resolve_spectrum(cfg.model), cfg.model.basis_seed,
                             zeros(cfg.model.dim), cfg.model.noise_scale,
                             cfg.model.noise_exponent);
        Vec center = model.minimizer();
        const double w = cfg.model.init_offset / std::sqrt(static_cast<double>(model.dim()));
        for (const Vec& u : model.eigenbasis()) axpy(w, u, center);

        const int n_rounds = cfg.engine.rounds;
        if (n_rounds < 1) throw std::runtime_error("config: verify-theory needs engine.rounds >= 1");
        const auto empirical = monte_carlo_gap_covariance(model, cfg.engine, n_rounds, center);

        std::vector<double> sigma_sq(model.dim());
        for (int r = 0; r < model.dim(); ++r) sigma_sq[r] = model.noise_variance(r);
        const auto predicted = predicted_gap_covariance(*model.exact_hessian_eigenpairs(),
                                                        sigma_sq, cfg.engine.eta, cfg.engine.tau,
                                                        cfg.engine.workers);

        detail::Table t;
        auto& c_dir = t.add("direction");
        auto& c_lam = t.add("lambda");
        auto& c_sig = t.add("sigma_sq");
        auto& c_pred = t.add("predicted_var");
        auto& c_emp = t.add("empirical_var");
        auto& c_err = t.add("rel_error");
        for (int r = 0; r < model.dim(); ++r) {
            c_dir.cells.push_back(std::to_string(r + 1));
            c_lam.cells.push_back(detail::fmt(model.spectrum()[r]));
            c_sig.cells.push_back(detail::fmt(sigma_sq[r]));
            c_pred.cells.push_back(detail::fmt(predicted.direction_variances[r]));
            c_emp.cells.push_back(detail::fmt(empirical.direction_variances[r]));
            const double p = predicted.direction_variances[r];
            c_err.cells.push_back(
                p > 0.0 ? detail::fmt(std::fabs(empirical.direction_variances[r] - p) / p)
                        : std::string());
        }
        const std::string path = (fs::path(out_dir) / "verify_theory.csv").string();
        t.write(path);
        files.push_back(path);

        if (cfg.model.noise_scale > 0.0) {
            const double gamma_fit =
                fit_noise_exponent(model.spectrum(), empirical.direction_variances,
                                   cfg.engine.eta, cfg.engine.tau, cfg.engine.workers);
            man.set("gamma_fit", gamma_fit);
        }
        man.set("divergent_dynamics", static_cast<long long>(predicted.divergent_dynamics ? 1 : 0));
    } else {
        throw std::runtime_error("unknown experiment '" + cfg.experiment + "'");
    }

    for (std::size_t i = 0; i < files.size(); ++i)
        man.set("file." + std::to_string(i), fs::path(files[i]).filename().string());
    man.write((fs::path(out_dir) / "manifest.txt").string());
    return files;
}

}  // namespace gaplab
