#include <CLI11.hpp>
#include <iostream>

#include "tlab/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"transfer-operator laboratory"};
    app.require_subcommand(1);

    struct Args {
        std::string config;
        std::string out;
        std::uint64_t seed = 0;
        bool seed_set = false;
        std::vector<std::string> sets;
    };

    std::map<std::string, std::shared_ptr<Args>> pipelines;
    for (const auto& name : tlab::pipeline_names()) {
        auto args = std::make_shared<Args>();
        auto* sub = app.add_subcommand(name, "run the " + name + " pipeline");
        sub->add_option("-c,--config", args->config, "experiment config (JSON)")->required();
        sub->add_option("-o,--out", args->out, "output directory override");
        sub->add_option("--seed", args->seed, "seed override")
            ->each([args](const std::string&) { args->seed_set = true; });
        sub->add_option("--set", args->sets, "override a top-level config key (key=value)");
        pipelines[name] = args;
    }

    std::string manifest;
    auto* sum = app.add_subcommand("summary", "summarize a run manifest");
    sum->add_option("manifest", manifest, "path to manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
            return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return tlab::kExitError;
    }

    if (sum->parsed()) return tlab::summarize(manifest);

    for (const auto& [name, args] : pipelines) {
        auto* sub = app.get_subcommand(name);
        if (!sub->parsed()) continue;
        tlab::RunOptions opt;
        opt.config_path = args->config;
        if (!args->out.empty()) opt.out_dir = args->out;
        if (args->seed_set) opt.seed = args->seed;
        for (const auto& kv : args->sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::cerr << "error: --set expects key=value\n";
                return tlab::kExitError;
            }
            opt.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
        return tlab::run_pipeline(name, opt);
    }
    return tlab::kExitError;
}
