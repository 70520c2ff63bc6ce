#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaplab/engine.hpp"

namespace gaplab {

struct ModelConfig {
    std::string type = "quadratic";  // quadratic | mlp

    // quadratic
    int dim = 16;
    std::string spectrum = "logspace";  // logspace | two_block
    double lambda_min = 0.05;
    double lambda_max = 1.0;
    int dom_count = 10;
    double dom_min = 5.0, dom_max = 10.0;
    double bulk_min = 0.05, bulk_max = 0.5;
    double noise_scale = 1e-4;
    double noise_exponent = 2.0;
    std::uint64_t basis_seed = 7;
    double init_offset = 1.0;

    // mlp
    int input_dim = 64;
    int hidden = 32;
    int classes = 10;
    std::string data = "blobs";  // blobs | idx
    int n_samples = 1000;
    double spread = 1.0;
    std::uint64_t data_seed = 3;
    std::string images_path, labels_path;
    int limit = 5000;
    std::uint64_t init_seed = 5;
    double init_scale = 1.0;
};

struct SubspaceConfig {
    int dominant_dim = 10;  // C
    std::vector<int> capacities = {12, 24, 36, 48};
    double rel_threshold = 1e-8;
};

struct ProbeConfig {
    int cadence = 5;
    int lanczos_iters = 60;
    bool track_accuracy = false;
};

struct PolicyConfig {
    int switch_round = 0;
    std::vector<double> alpha_sweep;
    std::vector<double> bulk_gain_sweep;
    std::string basis = "proxy";  // proxy | true
    int proxy_capacity = 24;
    std::vector<int> tau_sweep = {2, 5, 10};
};

struct ExperimentConfig {
    std::string experiment;
    ModelConfig model;
    LocalSgdConfig engine;
    SubspaceConfig subspace;
    ProbeConfig probe;
    PolicyConfig policy;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace detail

// Flat key = value config file; '#' starts a comment.
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>") {
        KeyValueFile kv;
        std::stringstream ss(text);
        std::string line;
        int lineno = 0;
        while (std::getline(ss, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config: " + origin + ":" + std::to_string(lineno) +
                                         ": expected key = value");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string val = detail::trim(line.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error("config: " + origin + ":" + std::to_string(lineno) +
                                         ": empty key");
            kv.values_[key] = val;
        }
        return kv;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& dflt) {
        consumed_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? dflt : it->second;
    }

    double get_double(const std::string& key, double dflt) {
        consumed_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return dflt;
        return parse_double(key, it->second);
    }

    long long get_int(const std::string& key, long long dflt) {
        consumed_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return dflt;
        return parse_int(key, it->second);
    }

    std::vector<int> get_int_list(const std::string& key, std::vector<int> dflt) {
        consumed_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return dflt;
        std::vector<int> out;
        for (const auto& tok : detail::split_list(it->second))
            out.push_back(static_cast<int>(parse_int(key, tok)));
        return out;
    }

    std::vector<double> get_double_list(const std::string& key, std::vector<double> dflt) {
        consumed_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return dflt;
        std::vector<double> out;
        for (const auto& tok : detail::split_list(it->second))
            out.push_back(parse_double(key, tok));
        return out;
    }

    // Every key in the file must have been consumed by a getter.
    void reject_unknown_keys() const {
        for (const auto& [key, _] : values_)
            if (!consumed_.count(key))
                throw std::runtime_error("config: unknown key '" + key + "'");
    }

private:
    static double parse_double(const std::string& key, const std::string& s) {
        std::size_t pos = 0;
        double v;
        try {
            v = std::stod(s, &pos);
        } catch (...) {
            throw std::runtime_error("config: key '" + key + "': not a number: '" + s + "'");
        }
        if (pos != s.size())
            throw std::runtime_error("config: key '" + key + "': trailing garbage in '" + s + "'");
        return v;
    }

    static long long parse_int(const std::string& key, const std::string& s) {
        std::size_t pos = 0;
        long long v;
        try {
            v = std::stoll(s, &pos);
        } catch (...) {
            throw std::runtime_error("config: key '" + key + "': not an integer: '" + s + "'");
        }
        if (pos != s.size())
            throw std::runtime_error("config: key '" + key + "': trailing garbage in '" + s + "'");
        return v;
    }

    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

inline ExperimentConfig load_experiment_config(KeyValueFile& kv, const std::string& experiment) {
    ExperimentConfig cfg;
    cfg.experiment = experiment;

    const std::string declared = kv.get_string("experiment", experiment);
    if (declared != experiment)
        throw std::runtime_error("config: experiment key '" + declared +
                                 "' does not match subcommand '" + experiment + "'");

    auto& m = cfg.model;
    m.type = kv.get_string("model.type", m.type);
    if (m.type != "quadratic" && m.type != "mlp")
        throw std::runtime_error("config: model.type must be quadratic or mlp");
    m.dim = static_cast<int>(kv.get_int("model.dim", m.dim));
    m.spectrum = kv.get_string("model.spectrum", m.spectrum);
    m.lambda_min = kv.get_double("model.lambda_min", m.lambda_min);
    m.lambda_max = kv.get_double("model.lambda_max", m.lambda_max);
    m.dom_count = static_cast<int>(kv.get_int("model.dom_count", m.dom_count));
    m.dom_min = kv.get_double("model.dom_min", m.dom_min);
    m.dom_max = kv.get_double("model.dom_max", m.dom_max);
    m.bulk_min = kv.get_double("model.bulk_min", m.bulk_min);
    m.bulk_max = kv.get_double("model.bulk_max", m.bulk_max);
    m.noise_scale = kv.get_double("model.noise_scale", m.noise_scale);
    m.noise_exponent = kv.get_double("model.noise_exponent", m.noise_exponent);
    m.basis_seed = static_cast<std::uint64_t>(kv.get_int("model.basis_seed", m.basis_seed));
    m.init_offset = kv.get_double("model.init_offset", m.init_offset);
    m.input_dim = static_cast<int>(kv.get_int("model.input_dim", m.input_dim));
    m.hidden = static_cast<int>(kv.get_int("model.hidden", m.hidden));
    m.classes = static_cast<int>(kv.get_int("model.classes", m.classes));
    m.data = kv.get_string("model.data", m.data);
    m.n_samples = static_cast<int>(kv.get_int("model.n_samples", m.n_samples));
    m.spread = kv.get_double("model.spread", m.spread);
    m.data_seed = static_cast<std::uint64_t>(kv.get_int("model.data_seed", m.data_seed));
    m.images_path = kv.get_string("model.images_path", m.images_path);
    m.labels_path = kv.get_string("model.labels_path", m.labels_path);
    m.limit = static_cast<int>(kv.get_int("model.limit", m.limit));
    m.init_seed = static_cast<std::uint64_t>(kv.get_int("model.init_seed", m.init_seed));
    m.init_scale = kv.get_double("model.init_scale", m.init_scale);

    auto& e = cfg.engine;
    e.workers = static_cast<int>(kv.get_int("engine.workers", e.workers));
    e.tau = static_cast<int>(kv.get_int("engine.tau", e.tau));
    e.eta = kv.get_double("engine.eta", e.eta);
    e.rounds = static_cast<int>(kv.get_int("engine.rounds", e.rounds));
    e.batch_size = static_cast<int>(kv.get_int("engine.batch_size", e.batch_size));
    e.seed = static_cast<std::uint64_t>(kv.get_int("engine.seed", e.seed));

    auto& s = cfg.subspace;
    s.dominant_dim = static_cast<int>(kv.get_int("subspace.C", s.dominant_dim));
    s.capacities = kv.get_int_list("subspace.capacities", s.capacities);
    s.rel_threshold = kv.get_double("subspace.rel_threshold", s.rel_threshold);

    auto& p = cfg.probe;
    p.cadence = static_cast<int>(kv.get_int("probe.cadence", p.cadence));
    p.lanczos_iters = static_cast<int>(kv.get_int("probe.lanczos_iters", p.lanczos_iters));
    p.track_accuracy = kv.get_int("probe.track_accuracy", 0) != 0;

    auto& pol = cfg.policy;
    pol.switch_round = static_cast<int>(kv.get_int("policy.switch_round", pol.switch_round));
    pol.alpha_sweep = kv.get_double_list("policy.alpha_sweep", pol.alpha_sweep);
    pol.bulk_gain_sweep = kv.get_double_list("policy.bulk_gain_sweep", pol.bulk_gain_sweep);
    pol.basis = kv.get_string("policy.basis", pol.basis);
    pol.proxy_capacity = static_cast<int>(kv.get_int("policy.proxy_capacity", pol.proxy_capacity));
    pol.tau_sweep = kv.get_int_list("policy.tau_sweep", pol.tau_sweep);

    kv.reject_unknown_keys();

    if (cfg.subspace.dominant_dim < 1)
        throw std::runtime_error("config: subspace.C must be >= 1");
    if (cfg.experiment == "gap-sweep" && cfg.subspace.capacities.empty())
        throw std::runtime_error("config: subspace.capacities must be nonempty for gap-sweep");
    return cfg;
}

}  // namespace gaplab
