// Experiment runner: each subcommand reproduces one experiment protocol
// at desk scale and writes CSV telemetry plus a manifest of the
// resolved parameters.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gaplab/experiments.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<double> ema;
    std::optional<long long> seed_override;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_path, "experiment config file (key = value lines)")
        ->required();
    sub->add_option("--out", flags.out_dir, "output directory for CSVs and manifest");
    sub->add_option("--ema", flags.ema, "EMA smoothing constant applied at output time, in [0,1)");
    sub->add_option("--seed", flags.seed_override, "override engine.seed from the config");
}

int run(const std::string& experiment, const CommonFlags& flags) {
    auto kv = gaplab::KeyValueFile::parse_file(flags.config_path);
    gaplab::ExperimentConfig cfg = gaplab::load_experiment_config(kv, experiment);
    if (flags.seed_override) cfg.engine.seed = static_cast<std::uint64_t>(*flags.seed_override);

    const auto files = gaplab::run_experiment(cfg, flags.out_dir, flags.ema);
    for (const auto& f : files) std::cout << f << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local SGD worker-gap subspace laboratory"};
    app.require_subcommand(1);

    const std::vector<std::string> experiments = {"spectrum",     "alignment",   "dom-bulk",
                                                  "gap-sweep",    "tau-ablation", "filter-sweep",
                                                  "verify-theory"};
    std::vector<CommonFlags> flags(experiments.size());
    for (std::size_t i = 0; i < experiments.size(); ++i)
        add_common(app.add_subcommand(experiments[i]), flags[i]);

    CLI11_PARSE(app, argc, argv);

    try {
        for (std::size_t i = 0; i < experiments.size(); ++i)
            if (app.get_subcommand(experiments[i])->parsed()) return run(experiments[i], flags[i]);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
