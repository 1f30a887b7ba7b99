#include <CLI11.hpp>
#include <utility>

#include "cgdyn/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Coarse-grained dynamics: effective coefficients, reduced simulation and residence-time studies"};
    app.require_subcommand(1, 1);
    cgdyn::cli::Arguments args;
    std::uint64_t seed = 0;
    std::string out;
    unsigned workers = 0;
    const std::pair<const char*, const char*> commands[] = {
        {"estimate-coefficients", "tabulate b, sigma and A' on a grid"},
        {"simulate", "run full, effective, free-energy or coupled dynamics"},
        {"residence", "mean residence times with confidence intervals"},
        {"pathwise", "RMS deviation of coupled runs across epsilons"},
        {"marginals", "time-marginal TV between full and reduced ensembles"},
        {"check", "derivative, orthogonality and stationarity self-checks"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", args.config_path, "key = value configuration file")->required();
        sub->add_option("--seed", seed, "base seed (overrides config)");
        sub->add_option("--out", out, "output directory (overrides config)");
        sub->add_option("--workers", workers, "worker threads, 0 = all cores (overrides config)");
        sub->callback([&args, sub, &seed, &out, &workers] {
            args.command = sub->get_name();
            if (sub->count("--seed")) args.seed = seed;
            if (sub->count("--out")) args.out = out;
            if (sub->count("--workers")) args.workers = workers;
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(cgdyn::ErrorKind::config);
    }
    return cgdyn::cli::run(args);
}
