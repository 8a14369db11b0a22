#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ners/harness.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    for (char c : s) {
        if (c == ',') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else if (c != ' ') {
            item += c;
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

ners::ExperimentConfig load_config(const std::string& path, const std::string& sampler,
                                   const std::string& out_dir) {
    ners::ExperimentConfig cfg = ners::parse_config_file(path);
    if (!sampler.empty()) cfg.sampler = sampler;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    ners::validate_config(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Replay-sampler experiment harness"};
    app.require_subcommand(1);

    std::string config_path, sampler_override, out_override, samplers_csv;
    std::int64_t seed_flag = -1;
    bool serial_kernels = false;
    app.add_flag("--serial-kernels", serial_kernels, "Disable OpenMP kernel dispatch");

    CLI::App* run_cmd = app.add_subcommand("run", "One experiment (config + seed)");
    run_cmd->add_option("--config", config_path, "Config file")->required();
    run_cmd->add_option("--seed", seed_flag, "Seed (default: first seed in config)");
    run_cmd->add_option("--sampler", sampler_override, "Sampler override");
    run_cmd->add_option("--out", out_override, "Output directory override");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Config x seeds (x samplers)");
    sweep_cmd->add_option("--config", config_path, "Config file")->required();
    sweep_cmd->add_option("--samplers", samplers_csv, "Comma-separated sampler list");
    sweep_cmd->add_option("--out", out_override, "Output directory override");

    CLI::App* compare_cmd = app.add_subcommand("compare", "Aggregate logs into a summary");
    compare_cmd->add_option("--config", config_path, "Config file")->required();
    compare_cmd->add_option("--samplers", samplers_csv, "Comma-separated sampler list");
    compare_cmd->add_option("--out", out_override, "Output directory override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (serial_kernels) ners::kernels::set_parallel(false);

    try {
        if (run_cmd->parsed()) {
            const ners::ExperimentConfig cfg =
                load_config(config_path, sampler_override, out_override);
            const std::uint64_t seed =
                seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : cfg.seeds.front();
            const ners::RunLog log = ners::run_experiment(cfg, seed);
            std::printf("sampler=%s seed=%llu final_return=%.6f evals=%zu\n", cfg.sampler.c_str(),
                        static_cast<unsigned long long>(seed), log.final_return,
                        log.curves.size());
            std::printf("curves:  %s\n", ners::curves_path(cfg, seed).c_str());
            std::printf("samples: %s\n", ners::samples_path(cfg, seed).c_str());
            return 0;
        }
        if (sweep_cmd->parsed()) {
            const ners::ExperimentConfig cfg = load_config(config_path, "", out_override);
            std::vector<std::string> samplers = split_csv(samplers_csv);
            if (samplers.empty()) samplers = {cfg.sampler};
            for (const std::string& s : samplers)
                ners::validate_config(ners::with_sampler(cfg, s));
            const std::vector<ners::SweepResult> results = ners::sweep(cfg, samplers);
            bool diverged = false, failed = false;
            for (const ners::SweepResult& r : results) {
                if (r.ok) {
                    std::printf("sampler=%s seed=%llu final_return=%.6f\n", r.sampler.c_str(),
                                static_cast<unsigned long long>(r.seed), r.final_return);
                } else {
                    std::fprintf(stderr, "sampler=%s seed=%llu FAILED: %s\n", r.sampler.c_str(),
                                 static_cast<unsigned long long>(r.seed), r.error.c_str());
                    diverged |= r.diverged;
                    failed |= !r.diverged;
                }
            }
            if (failed) return 1;
            if (diverged) return 2;
            return 0;
        }
        if (compare_cmd->parsed()) {
            const ners::ExperimentConfig base = load_config(config_path, "", out_override);
            std::vector<std::string> samplers = split_csv(samplers_csv);
            if (samplers.empty()) samplers = {base.sampler};
            std::vector<ners::ExperimentConfig> configs;
            for (const std::string& s : samplers) configs.push_back(ners::with_sampler(base, s));
            const ners::ComparisonTable table = ners::compare(configs);
            std::printf("%s", ners::format_table(table).c_str());
            const std::string summary = base.out_dir + "/summary.csv";
            ners::write_summary_csv(table, summary);
            std::printf("summary: %s\n", summary.c_str());
            return 0;
        }
    } catch (const ners::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const ners::DivergenceError& e) {
        std::fprintf(stderr, "run diverged: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
