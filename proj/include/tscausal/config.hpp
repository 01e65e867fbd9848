#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ci.hpp"
#include "pcmci.hpp"
#include "sampler.hpp"
#include "segmentation.hpp"
#include "toml.hpp"

namespace tscausal {

struct PipelineConfig {
    // [paths]
    std::string input_csv;
    std::string labels_csv;  // empty: run the baseline clustering instead
    std::string out_dir = "out";

    // [dataset]
    double sample_interval_s = 10.0;
    double max_missing_fraction = 0.99;
    std::string schema = "furnace";  // "furnace" or "header"

    // [segmentation]
    SegmentationRules rules;
    int temperature_index = 3;

    // [stats]
    StatVariableMap stat_vars;

    // [cluster] (baseline clustering when no label file is given)
    int cluster_k = 7;
    int profile_len = 50;

    // [sampler]
    SamplerConfig sampler;

    // [discovery]
    DiscoveryConfig discovery;
    std::vector<std::string> tests = {"robust_parcorr", "parcorr_wls", "gpdc", "cmi_knn"};
    bool hybrid = true;

    // [compare]
    int min_common = 4;

    // [run]
    std::uint64_t seed = 0;
    int jobs = 1;

    void check() const {
        if (input_csv.empty()) throw ConfigError("config: paths.input_csv is required");
        if (out_dir.empty()) throw ConfigError("config: paths.out_dir must be non-empty");
        if (sample_interval_s <= 0.0) throw ConfigError("config: dataset.sample_interval_s must be positive");
        if (max_missing_fraction < 0.0 || max_missing_fraction > 1.0) {
            throw ConfigError("config: dataset.max_missing_fraction must lie in [0, 1]");
        }
        if (schema != "furnace" && schema != "header") {
            throw ConfigError("config: dataset.schema must be \"furnace\" or \"header\"");
        }
        rules.check();
        if (cluster_k < 1) throw ConfigError("config: cluster.k must be positive");
        if (profile_len < 2) throw ConfigError("config: cluster.profile_len must be at least 2");
        sampler.check();
        discovery.check();
        if (tests.empty()) throw ConfigError("config: discovery.tests must be non-empty");
        for (const auto& t : tests) ci_test_from_string(t);
        if (hybrid && tests.size() != all_ci_tests().size()) {
            throw ConfigError("config: hybrid integration needs all four tests enabled");
        }
        if (min_common < 1) throw ConfigError("config: compare.min_common must be positive");
        if (jobs < 1) throw ConfigError("config: run.jobs must be positive");
    }
};

// Seeds fan out from the global seed; stage-level streams stay disjoint.
// Any override of the global seed must go through here so the fan-out is
// identical whether the seed came from the config file or the command line.
inline void apply_global_seed(PipelineConfig& c, std::uint64_t seed) {
    c.seed = seed;
    c.sampler.seed = stable_mix(seed, 0x73616D70ull);    // sampler stream
    c.discovery.seed = stable_mix(seed, 0x64697363ull);  // discovery stream
}

inline PipelineConfig pipeline_config_from_toml(const TomlDoc& doc) {
    PipelineConfig c;
    c.input_csv = doc.get_string("paths.input_csv", "");
    c.labels_csv = doc.get_string("paths.labels_csv", "");
    c.out_dir = doc.get_string("paths.out_dir", c.out_dir);

    c.sample_interval_s = doc.get_double("dataset.sample_interval_s", c.sample_interval_s);
    c.max_missing_fraction = doc.get_double("dataset.max_missing_fraction", c.max_missing_fraction);
    c.schema = doc.get_string("dataset.schema", c.schema);

    c.rules.start_temp_c = doc.get_double("segmentation.start_temp_c", c.rules.start_temp_c);
    c.rules.end_temp_c = doc.get_double("segmentation.end_temp_c", c.rules.end_temp_c);
    c.rules.min_duration_s = doc.get_double("segmentation.min_duration_s", c.rules.min_duration_s);
    c.rules.max_duration_s = doc.get_double("segmentation.max_duration_s", c.rules.max_duration_s);
    c.rules.refractory_s = doc.get_double("segmentation.refractory_s", c.rules.refractory_s);
    c.temperature_index = static_cast<int>(doc.get_int("segmentation.temperature_index", c.temperature_index));

    c.stat_vars.weight_index = static_cast<int>(doc.get_int("stats.weight_index", c.stat_vars.weight_index));
    c.stat_vars.energy_index = static_cast<int>(doc.get_int("stats.energy_index", c.stat_vars.energy_index));

    c.cluster_k = static_cast<int>(doc.get_int("cluster.k", c.cluster_k));
    c.profile_len = static_cast<int>(doc.get_int("cluster.profile_len", c.profile_len));

    c.sampler.fraction = doc.get_double("sampler.fraction", c.sampler.fraction);
    c.sampler.emd_threshold = doc.get_double("sampler.emd_threshold", c.sampler.emd_threshold);
    c.sampler.mmd_threshold = doc.get_double("sampler.mmd_threshold", c.sampler.mmd_threshold);
    c.sampler.max_retries = static_cast<int>(doc.get_int("sampler.max_retries", c.sampler.max_retries));
    c.sampler.iqr_multiplier = doc.get_double("sampler.iqr_multiplier", c.sampler.iqr_multiplier);

    c.discovery.tau_max = static_cast<int>(doc.get_int("discovery.tau_max", c.discovery.tau_max));
    c.discovery.pc_alpha = doc.get_double("discovery.pc_alpha", c.discovery.pc_alpha);
    c.discovery.mci_alpha = doc.get_double("discovery.mci_alpha", c.discovery.mci_alpha);
    c.discovery.max_conds_dim = static_cast<int>(doc.get_int("discovery.max_conds_dim", c.discovery.max_conds_dim));
    c.discovery.contemp_pool_cap =
        static_cast<int>(doc.get_int("discovery.contemp_pool_cap", c.discovery.contemp_pool_cap));
    c.tests = doc.get_string_array("discovery.tests", c.tests);
    c.hybrid = doc.get_bool("discovery.hybrid", c.hybrid);
    c.discovery.ci.min_samples = static_cast<int>(doc.get_int("discovery.min_samples", c.discovery.ci.min_samples));
    c.discovery.ci.knn_k = static_cast<int>(doc.get_int("discovery.knn_k", c.discovery.ci.knn_k));
    c.discovery.ci.cmi_permutations =
        static_cast<int>(doc.get_int("discovery.cmi_permutations", c.discovery.ci.cmi_permutations));
    c.discovery.ci.gpdc_permutations =
        static_cast<int>(doc.get_int("discovery.gpdc_permutations", c.discovery.ci.gpdc_permutations));
    c.discovery.ci.shuffle_neighbors =
        static_cast<int>(doc.get_int("discovery.shuffle_neighbors", c.discovery.ci.shuffle_neighbors));
    c.discovery.ci.wls_window = static_cast<int>(doc.get_int("discovery.wls_window", c.discovery.ci.wls_window));
    c.discovery.ci.variance_floor = doc.get_double("discovery.variance_floor", c.discovery.ci.variance_floor);
    c.discovery.ci.gp_max_train = static_cast<int>(doc.get_int("discovery.gp_max_train", c.discovery.ci.gp_max_train));
    c.discovery.ci.cmi_max_samples =
        static_cast<int>(doc.get_int("discovery.cmi_max_samples", c.discovery.ci.cmi_max_samples));
    c.discovery.ci.alpha_guard = doc.get_double("discovery.alpha_guard", c.discovery.ci.alpha_guard);

    c.min_common = static_cast<int>(doc.get_int("compare.min_common", c.min_common));

    c.seed = static_cast<std::uint64_t>(doc.get_int("run.seed", static_cast<long long>(c.seed)));
    c.jobs = static_cast<int>(doc.get_int("run.jobs", c.jobs));

    const auto unknown = doc.unconsumed();
    if (!unknown.empty()) {
        std::string msg = "config: unknown keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }

    apply_global_seed(c, c.seed);
    c.check();
    return c;
}

// Relative data paths resolve against the config file's directory, so a config
// can sit next to its data. out_dir stays relative to the working directory.
inline PipelineConfig load_pipeline_config(const std::string& path) {
    PipelineConfig c = pipeline_config_from_toml(TomlDoc::parse_file(path));
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) {
            p = (base / p).lexically_normal().string();
        }
    };
    resolve(c.input_csv);
    resolve(c.labels_csv);
    return c;
}

// Every knob with the value actually in effect, defaults included.
inline nlohmann::ordered_json effective_config_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["paths"] = {{"input_csv", c.input_csv}, {"labels_csv", c.labels_csv}, {"out_dir", c.out_dir}};
    j["dataset"] = {{"sample_interval_s", c.sample_interval_s},
                    {"max_missing_fraction", c.max_missing_fraction},
                    {"schema", c.schema}};
    j["segmentation"] = {{"start_temp_c", c.rules.start_temp_c},
                         {"end_temp_c", c.rules.end_temp_c},
                         {"min_duration_s", c.rules.min_duration_s},
                         {"max_duration_s", c.rules.max_duration_s},
                         {"refractory_s", c.rules.refractory_s},
                         {"temperature_index", c.temperature_index}};
    j["stats"] = {{"weight_index", c.stat_vars.weight_index}, {"energy_index", c.stat_vars.energy_index}};
    j["cluster"] = {{"k", c.cluster_k}, {"profile_len", c.profile_len}};
    j["sampler"] = {{"fraction", c.sampler.fraction},
                    {"emd_threshold", c.sampler.emd_threshold},
                    {"mmd_threshold", c.sampler.mmd_threshold},
                    {"max_retries", c.sampler.max_retries},
                    {"iqr_multiplier", c.sampler.iqr_multiplier},
                    {"seed", c.sampler.seed}};
    j["discovery"] = {{"tau_max", c.discovery.tau_max},
                      {"pc_alpha", c.discovery.pc_alpha},
                      {"mci_alpha", c.discovery.mci_alpha},
                      {"max_conds_dim", c.discovery.max_conds_dim},
                      {"contemp_pool_cap", c.discovery.contemp_pool_cap},
                      {"tests", c.tests},
                      {"hybrid", c.hybrid},
                      {"min_samples", c.discovery.ci.min_samples},
                      {"knn_k", c.discovery.ci.knn_k},
                      {"cmi_permutations", c.discovery.ci.cmi_permutations},
                      {"gpdc_permutations", c.discovery.ci.gpdc_permutations},
                      {"shuffle_neighbors", c.discovery.ci.shuffle_neighbors},
                      {"wls_window", c.discovery.ci.wls_window},
                      {"variance_floor", c.discovery.ci.variance_floor},
                      {"gp_max_train", c.discovery.ci.gp_max_train},
                      {"cmi_max_samples", c.discovery.ci.cmi_max_samples},
                      {"alpha_guard", c.discovery.ci.alpha_guard},
                      {"seed", c.discovery.seed}};
    j["compare"] = {{"min_common", c.min_common}};
    j["run"] = {{"seed", c.seed}, {"jobs", c.jobs}};
    return j;
}

}  // namespace tscausal
