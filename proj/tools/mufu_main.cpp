// Pipeline driver: each subcommand runs one stage of the run-config DAG.

#include "mufu/error.hpp"
#include "mufu/manifest.hpp"
#include "mufu/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Multilingual postediting-prompt experiment harness"};
    app.fallthrough();

    std::string config_path;
    std::string stage;
    bool resume = false;
    bool dry_run = false;
    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--stage", stage, "stage to run (alternative to a subcommand)");
    app.add_flag("--resume", resume, "skip stages whose manifests are still valid");
    app.add_flag("--dry-run", dry_run, "validate and report without writing");

    for (const auto& name : mufu::known_stages()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " stage");
        sub->callback([&stage, name] { stage = name; });
    }

    CLI11_PARSE(app, argc, argv);

    if (stage.empty()) {
        std::cerr << "error: no stage given (use a subcommand or --stage)\n";
        return 2;
    }
    try {
        const mufu::RunConfig config = mufu::load_run_config(config_path);
        mufu::run_stage(config, stage, resume, dry_run, std::cout);
    } catch (const mufu::DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
