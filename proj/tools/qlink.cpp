// qlink - command-line front end for thermal and quench sweeps
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qlink/sweep/config.hpp"
#include "qlink/sweep/run.hpp"

namespace {

using namespace qlink::sweep;

struct Args {
    std::string config;
    std::optional<std::string> out;
    unsigned threads = 1;
    std::optional<std::uint64_t> seed;
};

SweepConfig load(const Args& args, std::optional<Mode> mode) {
    std::ifstream in(args.config, std::ios::binary);
    if (!in) {
        throw ConfigError(args.config, 0, "cannot read config file");
    }
    std::ostringstream text;
    text << in.rdbuf();
    SweepConfig c = parse_config(text.str(), args.config);
    resolve(c, mode, args.seed);
    return c;
}

int execute(const Args& args, std::optional<Mode> mode, bool dry_run) {
    try {
        const SweepConfig c = load(args, mode);
        if (dry_run) {
            std::cout << resolved_json(c).dump(2) << '\n';
            return exit_ok;
        }
        RunOptions opts;
        opts.out_dir = args.out;
        opts.threads = args.threads;
        const RunResult r = run(c, opts);
        std::cerr << "wrote " << r.table.string() << " and " << r.manifest.string() << " (" << r.points
                  << " points, " << r.failed << " failed)\n";
        return r.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_solver;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Link entanglement through spin chains: thermal and quench sweeps"};
    app.require_subcommand(1);
    Args args;

    auto add_common = [&](CLI::App* sub, bool runs) {
        sub->add_option("--config", args.config, "TOML configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", args.seed, "random seed (overrides the config)");
        if (runs) {
            sub->add_option("--out", args.out, "output directory (overrides [output] directory)");
            sub->add_option("--threads", args.threads, "worker threads over sweep points")
                ->check(CLI::Range(1u, 4096u));
        }
    };
    CLI::App* thermal = app.add_subcommand("thermal", "low-temperature link entanglement against the link coupling");
    CLI::App* dynamics = app.add_subcommand("dynamics", "quench from rotated product states");
    CLI::App* oracle = app.add_subcommand("oracle-check", "compare fast kernels with dense references");
    CLI::App* validate = app.add_subcommand("validate", "parse and range-check a config, print the resolved values");
    add_common(thermal, true);
    add_common(dynamics, true);
    add_common(oracle, true);
    add_common(validate, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }
    if (thermal->parsed()) return execute(args, Mode::thermal, false);
    if (dynamics->parsed()) return execute(args, Mode::dynamics, false);
    if (oracle->parsed()) return execute(args, Mode::oracle_check, false);
    return execute(args, std::nullopt, true);
}
