#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fkdl/config.hpp"
#include "fkdl/runner.hpp"

#ifndef FKDL_DATA_DIR
#define FKDL_DATA_DIR "data"
#endif

int main(int argc, char** argv) {
    CLI::App app{"FK percolation with a defect line: experiments and checks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", fkdl::kCodeVersion);

    std::string config, out = ".", resume, data_dir = FKDL_DATA_DIR;
    std::optional<std::uint64_t> seed;
    for (int i = 0; fkdl::kExperiments[i]; ++i) {
        auto* sub = app.add_subcommand(fkdl::kExperiments[i]);
        sub->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "overrides chain.seed");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--resume", resume, "checkpoint written by an interrupted run")->check(CLI::ExistingFile);
        sub->add_option("--data-dir", data_dir, "directory holding kernels/");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string kind = app.get_subcommands().front()->get_name();

    try {
        auto cfg = config.empty() ? fkdl::RunConfig::defaults(kind) : fkdl::RunConfig::load(kind, config);
        fkdl::RunOptions opt;
        opt.out_dir = out;
        opt.resume = resume;
        opt.seed = seed;
        opt.data_dir = data_dir;
        auto s = fkdl::run_experiment(cfg, opt, std::cerr);
        std::cout << kind << " digest=" << s.digest << " tasks=" << s.tasks << " resumed=" << s.resumed
                  << " ok=" << (s.ok ? "true" : "false") << " seconds=" << s.seconds << '\n'
                  << "  " << s.jsonl_path << '\n';
        return s.ok ? 0 : 1;
    } catch (const fkdl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
