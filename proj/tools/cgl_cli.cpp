#include "cgl/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Centrality-aware graph learning experiments"};
    app.require_subcommand(1);

    CLI::App* run = app.add_subcommand("run", "Run the pipeline described by a config file");
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out;
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--set", overrides, "Override a key: section.key=value");
    run->add_option("--out", out, "Report path (overrides run.output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        cgl::Config cfg = cgl::Config::load(config_path);
        for (const auto& o : overrides) cfg.apply_override(o);
        if (!out.empty()) cfg.set("run.output", out);
        const std::string report = cgl::run_experiment(cfg);
        if (out.empty() && !cfg.has("run.output")) std::cout << report;
        return 0;
    } catch (const cgl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const cgl::PipelineError& e) {
        std::cerr << "pipeline error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "pipeline error: " << e.what() << '\n';
        return 3;
    }
}
