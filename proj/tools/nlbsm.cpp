#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nlbsm/cli/commands.hpp"

namespace {

struct Flags {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> shots;
    std::optional<std::string> format;
    std::optional<unsigned> threads;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "TOML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "output directory")->capture_default_str();
    sub->add_option("--seed", f.seed, "random seed (overrides run.seed)");
    sub->add_option("--shots", f.shots, "Monte Carlo shots (overrides run.shots)")->check(CLI::PositiveNumber);
    sub->add_option("--format", f.format, "table format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--threads", f.threads, "worker threads, 0 for all cores");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlinear Bell state analyzer: teleportation and swapping models"};
    app.set_version_flag("--version", std::string(nlbsm::cli::kToolVersion));
    app.require_subcommand(1);
    Flags flags;
    const std::pair<const char*, const char*> commands[] = {
        {"teleport-curve", "teleportation fidelity versus p_si and versus Alice's photon number"},
        {"swap-curves", "swapping fidelities of both analyzers over a p_si grid"},
        {"rates", "LO and NLO swapping rates versus channel loss"},
        {"cavity", "SFG probability, efficiency and wavelength conditions"},
        {"tomo", "density matrix reconstruction from a bin-count CSV"},
        {"simulate", "Monte Carlo run of teleportation, swapping or the full experiment"},
    };
    for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : nlbsm::cli::kExitConfig;
    }

    nlbsm::cli::RunRequest req;
    req.command = app.get_subcommands().front()->get_name();
    req.config_path = flags.config;
    req.out_dir = flags.out;
    req.seed = flags.seed;
    req.shots = flags.shots;
    req.format = flags.format;
    req.threads = flags.threads;
    return nlbsm::cli::run(req).status;
}
