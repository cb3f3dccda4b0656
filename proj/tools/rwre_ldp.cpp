// rwre-ldp: batch front end. One config, one task per invocation.
#include "rwre/run.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Large deviations for random walks in random environments with bounded jumps"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("rwre-ldp ") + rwre::io::kVersion);

    auto* run = app.add_subcommand("run", "Run one task described by a JSON config");
    std::string config;
    std::string out;
    rwre::RunOptions opt;
    run->add_option("config", config, "Path to the JSON config")->required();
    run->add_flag("--strict", opt.strict, "Treat statistical gate failures as errors (exit 4)");
    run->add_option("--out", out, "Output directory (overrides \"output\" in the config)");
    run->add_option("--threads", opt.threads, "Worker threads for grid points and replicas")
        ->check(CLI::Range(1u, 1024u));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : rwre::exit_config;
    }
    if (!out.empty()) opt.out_dir = out;
    return rwre::run(config, opt, std::cerr);
}
