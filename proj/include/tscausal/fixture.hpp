#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "io.hpp"
#include "segmentation.hpp"

namespace tscausal {

// Rules the bundled fixture is generated against; fixture.toml repeats them.
inline SegmentationRules fixture_rules() {
    SegmentationRules r;
    r.start_temp_c = 200.0;
    r.end_temp_c = 300.0;
    r.min_duration_s = 600.0;
    r.max_duration_s = 10800.0;
    r.refractory_s = 60.0;
    return r;
}

namespace detail {

struct FixturePlan {
    int cluster = 0;
    std::size_t start_row = 0;  // first above-start-temp row
};

}  // namespace detail

// Synthetic furnace trace: 42 melting cycles in 7 interleaved clusters over
// the standard 12-variable schema. Cycle shape is a ramp, a cluster-dependent
// plateau and a sharp cooldown; electrical channels carry a small lagged SCM
// so discovery has structure to find. The State channel is >99% missing to
// exercise sparse-variable dropping. Deterministic per seed.
inline std::pair<TimeSeriesDataset, ClusterPartition> generate_fixture(std::uint64_t seed) {
    constexpr int kClusters = 7;
    constexpr int kRounds = 6;
    Rng rng(stable_mix(seed, 0xF1C7ull));

    TimeSeriesDataset ds;
    ds.variables = default_furnace_schema();
    ds.sample_interval_s = 10.0;
    const std::size_t n_vars = ds.variables.size();
    ds.values.assign(n_vars, {});
    ds.mask.assign(n_vars, {});

    std::vector<detail::FixturePlan> plan;

    // Channel state carried across rows (AR processes).
    double freq = 0.0, volt = 0.0, cool_t = 30.0, cool_q = 200.0, isol = 500.0;
    double prev_freq = 0.0;
    std::vector<double> power_hist;  // for the lag-3 cooling link
    double energy = 0.0;

    auto push_row = [&](double weight, double temp, double f, double v, double cur, double p, double e,
                        double espec, double ct, double cq, double is, bool state_obs, std::size_t row) {
        const double vals[12] = {weight, state_obs ? 1.0 : 0.0, temp, f, v, cur, is, e, espec, p, ct, cq};
        for (std::size_t c = 0; c < 12; ++c) {
            ds.values[c].push_back(vals[c]);
            bool obs = true;
            if (c == 1) obs = state_obs;           // State: observed ~1/200 rows
            if (c == 6 && row % 313 == 312) obs = false;  // occasional isolation dropouts
            ds.mask[c].push_back(obs ? 1 : 0);
        }
    };

    std::size_t row = 0;
    auto idle_rows = [&](int count) {
        for (int i = 0; i < count; ++i, ++row) {
            const double temp = 50.0 + 4.0 * rng.normal();
            freq = 0.5 * freq + rng.normal();
            volt = 0.5 * volt + rng.normal();
            cool_t = 30.0 + 0.6 * (cool_t - 30.0) + 0.4 * rng.normal();
            cool_q = 200.0 + 0.5 * (cool_q - 200.0) + 1.0 * rng.normal();
            isol = 500.0 + 0.9 * (isol - 500.0) + 0.8 * rng.normal();
            power_hist.push_back(0.0);
            push_row(0.0, temp, 10.0 + freq, 5.0 + volt, 2.0 + 0.3 * rng.normal(), 0.0, 0.0, 0.0, cool_t,
                     cool_q, isol, row % 200 == 199, row);
        }
    };

    idle_rows(15);
    for (int round = 0; round < kRounds; ++round) {
        for (int k = 0; k < kClusters; ++k) {
            const double weight = 8.0 + 0.6 * k + 0.15 * rng.normal();
            const int ramp_len = 20 + static_cast<int>(rng.below(4));
            const int plateau_len = 40 + 6 * k + static_cast<int>(rng.below(5));
            const double base_freq = 250.0 + 5.0 * k;
            const double base_power = 3000.0 + 120.0 * k;
            plan.push_back({k, row});
            energy = 100.0;
            prev_freq = 0.0;
            double volt_c = 0.0;
            const int total = ramp_len + plateau_len + 1;  // +1 cooldown row inside the cycle
            for (int t = 0; t < total; ++t, ++row) {
                double temp;
                if (t < ramp_len) {
                    temp = 210.0 + (1450.0 - 210.0) * static_cast<double>(t) / ramp_len + 4.0 * rng.normal();
                    if (temp < 205.0) temp = 205.0;
                } else if (t < ramp_len + plateau_len) {
                    temp = 1480.0 + 25.0 * rng.normal();
                    if (temp < 320.0) temp = 320.0;
                } else {
                    temp = 280.0;  // first sub-end-threshold sample closes the cycle
                }
                const double f_dev = 0.6 * prev_freq + 3.0 * rng.normal();
                volt_c = 0.8 * volt_c + 0.5 * prev_freq + 2.0 * rng.normal();
                prev_freq = f_dev;
                const double cur = 300.0 + 0.7 * volt_c + 3.0 * rng.normal();
                const double p = base_power + 2.0 * (cur - 300.0) + 30.0 * rng.normal();
                power_hist.push_back(p - base_power);
                const std::size_t h = power_hist.size();
                const double p_lag3 = h >= 4 ? power_hist[h - 4] : 0.0;
                cool_t = 30.0 + 0.6 * (cool_t - 30.0) + 0.02 * p_lag3 + 0.5 * rng.normal();
                cool_q = 200.0 + 0.5 * (cool_q - 200.0) + 1.0 * rng.normal();
                isol = 500.0 + 0.9 * (isol - 500.0) + 0.8 * rng.normal();
                energy += p * ds.sample_interval_s / 3600.0;
                const double espec = energy / weight + 2.0 * rng.normal();
                push_row(weight, temp, base_freq + f_dev, 400.0 + volt_c, cur, p, energy, espec, cool_t,
                         cool_q, isol, row % 200 == 199, row);
            }
            idle_rows(12);
        }
    }
    idle_rows(10);

    ds.timestamps.resize(ds.rows());
    for (std::size_t t = 0; t < ds.rows(); ++t) {
        ds.timestamps[t] = static_cast<std::int64_t>(t) * 10;
    }
    ds.check();

    // Labels follow the generation plan; segmentation must agree with it.
    const auto seg = segment_cycles(ds, fixture_rules(), 3);
    if (seg.cycles.size() != plan.size()) {
        throw DataError("fixture generator: segmentation found " + std::to_string(seg.cycles.size()) +
                        " cycles, planned " + std::to_string(plan.size()));
    }
    ClusterPartition part;
    part.k = kClusters;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (seg.cycles[i].start_row != plan[i].start_row) {
            throw DataError("fixture generator: cycle " + std::to_string(i) + " starts at row " +
                            std::to_string(seg.cycles[i].start_row) + ", planned " +
                            std::to_string(plan[i].start_row));
        }
        part.assignments[seg.cycles[i].id] = plan[i].cluster;
    }
    part.check();
    return {std::move(ds), std::move(part)};
}

inline std::string fixture_toml() {
    return R"([paths]
input_csv = "furnace.csv"
labels_csv = "labels.csv"
out_dir = "out/fixture"

[dataset]
sample_interval_s = 10.0
max_missing_fraction = 0.99
schema = "furnace"

[segmentation]
start_temp_c = 200.0
end_temp_c = 300.0
min_duration_s = 600.0
max_duration_s = 10800.0
refractory_s = 60.0
temperature_index = 3

[stats]
weight_index = 1
energy_index = 8

[sampler]
fraction = 0.3
emd_threshold = 1.2
mmd_threshold = 0.6
max_retries = 10

[discovery]
tau_max = 3
min_samples = 25
cmi_permutations = 60
gpdc_permutations = 60

[compare]
min_common = 4

[run]
seed = 42
jobs = 2
)";
}

// Writes furnace.csv, labels.csv and fixture.toml into dir.
inline void write_fixture(const std::string& dir, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    auto [ds, part] = generate_fixture(seed);
    write_csv(ds, (std::filesystem::path(dir) / "furnace.csv").string());
    export_cluster_labels(part, (std::filesystem::path(dir) / "labels.csv").string());
    write_file_atomic(std::filesystem::path(dir) / "fixture.toml", fixture_toml());
}

}  // namespace tscausal
