#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tscausal/config.hpp"
#include "tscausal/fixture.hpp"
#include "tscausal/pipeline.hpp"
#include "tscausal/synth.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> out_dir;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool config_required) {
    auto* opt = cmd->add_option("--config", f.config_path, "Pipeline config (TOML)");
    if (config_required) opt->required();
    cmd->add_option("--seed", f.seed, "Override the global seed");
    cmd->add_option("--jobs", f.jobs, "Worker thread bound");
    cmd->add_option("--out", f.out_dir, "Override the output directory");
}

tscausal::PipelineConfig load_config(const CommonFlags& f) {
    tscausal::PipelineConfig cfg = tscausal::load_pipeline_config(f.config_path);
    if (f.seed) tscausal::apply_global_seed(cfg, *f.seed);
    if (f.jobs) cfg.jobs = *f.jobs;
    if (f.out_dir) cfg.out_dir = *f.out_dir;
    cfg.check();
    return cfg;
}

int report(const tscausal::StageResult& res) {
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-series causal discovery for industrial process data"};
    app.require_subcommand(1);

    CommonFlags seg_f, sample_f, discover_f, compare_f, pipeline_f;
    auto* seg = app.add_subcommand("segment", "Cut the trace into melting cycles and index them");
    add_common_flags(seg, seg_f, true);
    auto* sample = app.add_subcommand("sample", "Draw validated representative subsets per cluster");
    add_common_flags(sample, sample_f, true);
    auto* discover = app.add_subcommand("discover", "Run causal discovery per cluster and test");
    add_common_flags(discover, discover_f, true);
    auto* compare = app.add_subcommand("compare", "Cross-cluster frequency and common/specific reports");
    add_common_flags(compare, compare_f, true);
    auto* pipeline = app.add_subcommand("pipeline", "Run all stages in order");
    add_common_flags(pipeline, pipeline_f, true);

    auto* bench = app.add_subcommand("bench", "Score discovery methods on synthetic ground truth");
    std::string bench_suite = "linear";
    std::string bench_out = "out/bench";
    std::uint64_t bench_seed = 0;
    int bench_jobs = 1;
    int bench_specs = 10;
    int bench_t = 2000;
    bool bench_no_hybrid = false;
    bench->add_option("--suite", bench_suite,
                      "Suite JSON file, or a built-in name: linear, noise, collider, nonlinear");
    bench->add_option("--out", bench_out, "Output directory");
    bench->add_option("--seed", bench_seed, "Benchmark seed");
    bench->add_option("--jobs", bench_jobs, "Worker thread bound");
    bench->add_option("--specs", bench_specs, "Instances per built-in suite");
    bench->add_option("--length", bench_t, "Series length for built-in suites");
    bench->add_flag("--no-hybrid", bench_no_hybrid, "Skip the hybrid integration column");

    auto* fixture = app.add_subcommand("fixture", "Write the bundled synthetic furnace fixture");
    std::string fixture_dir = "data/fixture";
    std::uint64_t fixture_seed = 7;
    fixture->add_option("--dir", fixture_dir, "Target directory");
    fixture->add_option("--seed", fixture_seed, "Generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (seg->parsed()) return report(tscausal::run_segment_stage(load_config(seg_f)));
        if (sample->parsed()) return report(tscausal::run_sample_stage(load_config(sample_f)));
        if (discover->parsed()) return report(tscausal::run_discover_stage(load_config(discover_f)));
        if (compare->parsed()) return report(tscausal::run_compare_stage(load_config(compare_f)));
        if (pipeline->parsed()) return report(tscausal::run_pipeline(load_config(pipeline_f)));
        if (bench->parsed()) {
            std::vector<tscausal::SCMSpec> suite;
            if (std::filesystem::exists(bench_suite)) {
                suite = tscausal::suite_from_json(nlohmann::json::parse(tscausal::read_file(bench_suite)));
            } else {
                suite = tscausal::builtin_suite(bench_suite, bench_seed, bench_specs, bench_t);
            }
            auto base = tscausal::benchmark_discovery_config(bench_seed);
            return report(tscausal::run_bench_stage(suite, base, bench_out, bench_jobs));
        }
        if (fixture->parsed()) {
            tscausal::write_fixture(fixture_dir, fixture_seed);
            return 0;
        }
    } catch (const tscausal::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const tscausal::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 4;
}
