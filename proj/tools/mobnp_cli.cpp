#include "mobnp/cli_io.hpp"
#include "mobnp/errors.hpp"

#include "CLI11.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace mobnp;

namespace {

struct Common {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;

    void attach(CLI::App* app) {
        app->add_option("--seed", seed, "64-bit seed; overrides [run] seed");
        app->add_option("--config", config, "INI configuration file")->check(CLI::ExistingFile);
        app->add_option("--out", out, "output directory; overrides [run] out");
    }

    RunConfig load() const {
        RunConfig c = config.empty() ? RunConfig{} : load_config(config);
        if (config.empty())
            c.replication.sampler = sampler_for_simulation(c.simulation, c.sampler);
        if (seed)
            c.seed = *seed;
        if (!out.empty())
            c.out_dir = out;
        return c;
    }
};

int print_summary(const fs::path& dir) {
    const fs::path manifest = dir / "manifest.jsonl";
    std::ifstream in(manifest);
    if (!in) {
        std::cerr << "error: no manifest.jsonl in " << dir << '\n';
        return 2;
    }
    std::string line;
    while (std::getline(in, line))
        std::cout << line << '\n';
    if (fs::exists(dir / "summary.csv")) {
        std::ifstream s(dir / "summary.csv");
        std::cout << s.rdbuf();
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bidirectional clustering of multi-platform omics data with outcome-driven predictor selection"};
    app.require_subcommand(1);

    Common sim_opts, fit_opts, sel_opts, rep_opts, report_opts;
    auto* simulate = app.add_subcommand("simulate", "draw a synthetic dataset with known truth");
    sim_opts.attach(simulate);
    bool survival = false;
    simulate->add_flag("--survival", survival, "also draw censored survival outcomes");

    auto* fit = app.add_subcommand("fit", "Stage 1 clustering (and Stage 2 when clinical data are configured)");
    fit_opts.attach(fit);

    auto* select = app.add_subcommand("select", "Stage 2 predictor selection from an earlier fit");
    sel_opts.attach(select);
    std::string fit_dir;
    select->add_option("--fit-dir", fit_dir, "directory holding the fit artifacts")->required();

    auto* replicate = app.add_subcommand("replicate", "simulation replication study");
    rep_opts.attach(replicate);
    std::optional<int> threads;
    std::optional<int> replicates;
    replicate->add_option("--threads", threads, "worker threads");
    replicate->add_option("--replicates", replicates, "replicates per setup");

    auto* report = app.add_subcommand("report", "print default settings or summarize an output directory");
    report_opts.attach(report);
    bool defaults = false;
    report->add_flag("--defaults", defaults, "print every setting with its default as INI");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            RunConfig c = sim_opts.load();
            c.simulate_survival = c.simulate_survival || survival;
            run_simulate(c);
            std::cout << "wrote " << c.out_dir.string() << '\n';
        } else if (fit->parsed()) {
            const RunConfig c = fit_opts.load();
            const auto result = run_pipeline(c);
            std::cout << fmt::format("rows: {} clusters", num_clusters(result.stage1.row_ls));
            for (std::size_t t = 0; t < result.stage1.column_ls.size(); ++t)
                std::cout << fmt::format("; platform {}: {} column clusters", t + 1,
                                         num_clusters(result.stage1.column_ls[t]));
            std::cout << '\n';
            if (result.selection)
                std::cout << fmt::format("selected {} of {} merged clusters\n",
                                         result.selection->selection.selected.size(), result.problem->K());
        } else if (select->parsed()) {
            const RunConfig c = sel_opts.load();
            const auto result = run_selection_from_fit(c, fit_dir);
            std::cout << fmt::format("selected {} of {} merged clusters\n", result.selection.selected.size(),
                                     result.b_hat.size());
        } else if (replicate->parsed()) {
            RunConfig c = rep_opts.load();
            if (threads)
                c.replication.threads = *threads;
            if (replicates)
                c.replication.replicates = *replicates;
            const auto results = run_replicate_study(c);
            std::size_t failed = 0;
            for (const auto& r : results)
                failed += r.error ? 1 : 0;
            std::cout << fmt::format("{} replicates, {} failed; see {}\n", results.size(), failed,
                                     (c.out_dir / "summary.csv").string());
        } else if (report->parsed()) {
            if (defaults) {
                std::cout << format_config(report_opts.load());
                return 0;
            }
            return print_summary(report_opts.load().out_dir);
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 4;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
