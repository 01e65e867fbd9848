#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "dataset.hpp"
#include "segmentation.hpp"
#include "stats.hpp"

namespace tscausal {

struct SamplerConfig {
    double fraction = 0.05;
    double emd_threshold = 0.10;   // per z-scored cycle feature
    double mmd_threshold = 0.05;
    int max_retries = 20;
    double iqr_multiplier = 1.5;
    std::uint64_t seed = 0;

    void check() const {
        if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("sampler: fraction must lie in (0, 1]");
        if (emd_threshold <= 0.0 || mmd_threshold <= 0.0) throw ConfigError("sampler: thresholds must be positive");
        if (max_retries < 1) throw ConfigError("sampler: max_retries must be positive");
        if (iqr_multiplier <= 0.0) throw ConfigError("sampler: iqr_multiplier must be positive");
    }
};

struct ValidationReport {
    std::vector<std::string> feature_names;
    std::vector<double> emd;  // one per feature
    double mmd = 0.0;
    double emd_threshold = 0.0;
    double mmd_threshold = 0.0;
    bool pass = false;
    int retries_used = 0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["features"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < feature_names.size(); ++i) {
            j["features"].push_back({{"name", feature_names[i]}, {"emd", emd[i]}});
        }
        j["mmd"] = mmd;
        j["emd_threshold"] = emd_threshold;
        j["mmd_threshold"] = mmd_threshold;
        j["pass"] = pass;
        j["retries_used"] = retries_used;
        return j;
    }
};

struct RepresentativeSequence {
    TimeSeriesDataset data;
    std::vector<std::size_t> boundary_rows;        // strictly increasing, in [1, T)
    std::vector<std::pair<int, int>> provenance;   // (cluster, cycle id), -1 = unassigned cluster
};

struct RemovedCycle {
    int cycle_id = 0;
    std::string feature;  // the fence the cycle violated
    double value = 0.0;
};

// The cycle-level features validated by the sampler. The first three also
// drive outlier fencing.
inline constexpr std::array<const char*, 4> kCycleFeatureNames = {
    "production_time_s", "energy_kwh", "specific_energy_kwh_per_tonne", "weight_tonne"};

inline double cycle_feature(const MeltingCycle& c, std::size_t f) {
    switch (f) {
        case 0: return c.stats.production_time_s;
        case 1: return c.stats.energy_kwh;
        case 2: return c.stats.specific_energy_kwh_per_tonne;
        default: return c.stats.weight_tonne;
    }
}

// Tukey fences per feature over the whole input; a cycle is removed iff any
// of the first three features falls outside [Q1 - m*IQR, Q3 + m*IQR]. The
// fences depend only on the value multiset, so the result is order-invariant.
inline std::pair<std::vector<MeltingCycle>, std::vector<RemovedCycle>>
remove_outlier_cycles(const std::vector<MeltingCycle>& cycles, const SamplerConfig& config) {
    config.check();
    if (cycles.size() < 4) throw DataError("remove_outlier_cycles: need at least 4 cycles for quartiles");
    std::array<double, 3> lo{}, hi{};
    for (std::size_t f = 0; f < 3; ++f) {
        std::vector<double> v(cycles.size());
        for (std::size_t i = 0; i < cycles.size(); ++i) v[i] = cycle_feature(cycles[i], f);
        const double q1 = quantile_type7(v, 0.25);
        const double q3 = quantile_type7(v, 0.75);
        const double iqr = q3 - q1;
        lo[f] = q1 - config.iqr_multiplier * iqr;
        hi[f] = q3 + config.iqr_multiplier * iqr;
    }
    std::vector<MeltingCycle> kept;
    std::vector<RemovedCycle> removed;
    for (const auto& c : cycles) {
        bool out = false;
        for (std::size_t f = 0; f < 3 && !out; ++f) {
            const double v = cycle_feature(c, f);
            if (v < lo[f] || v > hi[f]) {
                removed.push_back({c.id, kCycleFeatureNames[f], v});
                out = true;
            }
        }
        if (!out) kept.push_back(c);
    }
    return {std::move(kept), std::move(removed)};
}

// 1-Wasserstein distance between empirical distributions: the L1 distance
// between the two empirical CDFs, integrated over the merged breakpoints.
inline double emd_1d(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw DataError("emd_1d: empty sample");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
    std::size_t ia = 0, ib = 0;
    double total = 0.0;
    double prev = std::min(sa[0], sb[0]);
    while (ia < sa.size() || ib < sb.size()) {
        const double next = (ib >= sb.size() || (ia < sa.size() && sa[ia] <= sb[ib])) ? sa[ia] : sb[ib];
        const double fa = static_cast<double>(ia) / na;
        const double fb = static_cast<double>(ib) / nb;
        total += std::abs(fa - fb) * (next - prev);
        prev = next;
        while (ia < sa.size() && sa[ia] == next) ++ia;
        while (ib < sb.size() && sb[ib] == next) ++ib;
    }
    return total;
}

// Gaussian-kernel squared maximum mean discrepancy, biased V-statistic (so it
// is never negative in exact arithmetic). A missing bandwidth means the median
// pairwise Euclidean distance over the pooled sample, falling back to 1.0 when
// that median is zero. For a == b the three kernel sums are evaluated in the
// same order, so the result is exactly 0.
inline double mmd_squared(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                          std::optional<double> bandwidth = std::nullopt) {
    if (a.empty() || b.empty()) throw DataError("mmd_squared: empty sample");
    const std::size_t dim = a.front().size();
    for (const auto& r : a) {
        if (r.size() != dim) throw DataError("mmd_squared: ragged sample a");
    }
    for (const auto& r : b) {
        if (r.size() != dim) throw DataError("mmd_squared: dimension mismatch between samples");
    }
    auto dist2 = [dim](const std::vector<double>& u, const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = u[i] - v[i];
            s += d * d;
        }
        return s;
    };
    double sigma;
    if (bandwidth) {
        if (*bandwidth <= 0.0) throw ConfigError("mmd_squared: bandwidth must be positive");
        sigma = *bandwidth;
    } else {
        std::vector<const std::vector<double>*> pooled;
        pooled.reserve(a.size() + b.size());
        for (const auto& r : a) pooled.push_back(&r);
        for (const auto& r : b) pooled.push_back(&r);
        std::vector<double> d;
        d.reserve(pooled.size() * (pooled.size() - 1) / 2);
        for (std::size_t i = 0; i < pooled.size(); ++i) {
            for (std::size_t j = i + 1; j < pooled.size(); ++j) d.push_back(std::sqrt(dist2(*pooled[i], *pooled[j])));
        }
        sigma = d.empty() ? 1.0 : quantile_type7(d, 0.5);
        if (sigma <= 0.0) sigma = 1.0;
    }
    const double inv = 1.0 / (2.0 * sigma * sigma);
    auto mean_kernel = [&](const std::vector<std::vector<double>>& u, const std::vector<std::vector<double>>& v) {
        double s = 0.0;
        for (const auto& ui : u) {
            for (const auto& vj : v) s += std::exp(-dist2(ui, vj) * inv);
        }
        return s / (static_cast<double>(u.size()) * static_cast<double>(v.size()));
    };
    return mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b);
}

namespace detail {

// z-scores feature columns by the full cluster's mean/sd; constant features
// map to all-zero columns so they cannot fail the EMD threshold.
inline std::vector<std::vector<double>> zscored_features(const std::vector<MeltingCycle>& cycles,
                                                         const std::vector<double>& mu,
                                                         const std::vector<double>& sd) {
    std::vector<std::vector<double>> rows(cycles.size(), std::vector<double>(kCycleFeatureNames.size()));
    for (std::size_t i = 0; i < cycles.size(); ++i) {
        for (std::size_t f = 0; f < kCycleFeatureNames.size(); ++f) {
            rows[i][f] = sd[f] > 0.0 ? (cycle_feature(cycles[i], f) - mu[f]) / sd[f] : 0.0;
        }
    }
    return rows;
}

}  // namespace detail

// Draws ceil(fraction * n) cycles without replacement and validates the draw's
// cycle-statistic distribution against the whole cluster (per-feature EMD,
// multivariate MMD on z-scored features). Failed draws are retried with seeds
// stable_mix(seed, attempt); after max_retries attempts the best-scoring draw
// is returned with pass=false. Selection order follows cluster order, so a
// fraction-1.0 draw reproduces the cluster exactly and scores 0 on every
// metric.
inline std::pair<std::vector<MeltingCycle>, ValidationReport>
sample_and_validate(const std::vector<MeltingCycle>& cluster_cycles, const SamplerConfig& config) {
    config.check();
    if (cluster_cycles.empty()) throw DataError("sample_and_validate: empty cluster");
    const std::size_t n = cluster_cycles.size();
    // The epsilon keeps exact products like 0.05 * 20 from rounding up to 2.
    const double raw = std::ceil(config.fraction * static_cast<double>(n) - 1e-9);
    const std::size_t m = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, n);

    std::vector<double> mu(kCycleFeatureNames.size()), sd(kCycleFeatureNames.size());
    for (std::size_t f = 0; f < kCycleFeatureNames.size(); ++f) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = cycle_feature(cluster_cycles[i], f);
        mu[f] = mean_of(v);
        sd[f] = n > 1 ? stddev_of(v) : 0.0;
    }
    const auto full = detail::zscored_features(cluster_cycles, mu, sd);

    std::vector<MeltingCycle> best_sel;
    ValidationReport best_report;
    double best_score = std::numeric_limits<double>::infinity();

    for (int attempt = 0; attempt < config.max_retries; ++attempt) {
        Rng rng(stable_mix(config.seed, static_cast<std::uint64_t>(attempt)));
        const auto idx = rng.sample_without_replacement(n, m);  // ascending: keeps cluster order
        std::vector<MeltingCycle> sel;
        sel.reserve(m);
        for (auto i : idx) sel.push_back(cluster_cycles[i]);
        const auto sub = detail::zscored_features(sel, mu, sd);

        ValidationReport rep;
        rep.emd_threshold = config.emd_threshold;
        rep.mmd_threshold = config.mmd_threshold;
        rep.retries_used = attempt;
        double worst_emd = 0.0;
        for (std::size_t f = 0; f < kCycleFeatureNames.size(); ++f) {
            std::vector<double> fa(sub.size()), fb(full.size());
            for (std::size_t i = 0; i < sub.size(); ++i) fa[i] = sub[i][f];
            for (std::size_t i = 0; i < full.size(); ++i) fb[i] = full[i][f];
            const double e = emd_1d(fa, fb);
            rep.feature_names.push_back(kCycleFeatureNames[f]);
            rep.emd.push_back(e);
            worst_emd = std::max(worst_emd, e);
        }
        rep.mmd = mmd_squared(sub, full);
        rep.pass = worst_emd <= config.emd_threshold && rep.mmd <= config.mmd_threshold;
        if (rep.pass) return {std::move(sel), std::move(rep)};

        const double score = std::max(worst_emd / config.emd_threshold, rep.mmd / config.mmd_threshold);
        if (score < best_score) {
            best_score = score;
            best_sel = std::move(sel);
            best_report = std::move(rep);
        }
    }
    best_report.pass = false;
    best_report.retries_used = config.max_retries;
    return {std::move(best_sel), std::move(best_report)};
}

// Concatenates the selected cycles' rows in the given order and records the
// junction rows. Timestamps are dropped: concatenation manufactures a new
// time axis at the parent cadence.
inline RepresentativeSequence concatenate(const std::vector<MeltingCycle>& selected, const TimeSeriesDataset& ds) {
    if (selected.empty()) throw DataError("concatenate: empty selection");
    RepresentativeSequence seq;
    seq.data.variables = ds.variables;
    seq.data.sample_interval_s = ds.sample_interval_s;
    seq.data.values.assign(ds.cols(), {});
    seq.data.mask.assign(ds.cols(), {});
    std::size_t total = 0;
    for (const auto& c : selected) {
        if (c.end_row <= c.start_row || c.end_row > ds.rows()) throw DataError("concatenate: cycle range out of bounds");
        total += c.end_row - c.start_row;
    }
    for (std::size_t v = 0; v < ds.cols(); ++v) {
        seq.data.values[v].reserve(total);
        seq.data.mask[v].reserve(total);
    }
    std::size_t written = 0;
    for (const auto& c : selected) {
        if (written > 0) seq.boundary_rows.push_back(written);
        for (std::size_t v = 0; v < ds.cols(); ++v) {
            seq.data.values[v].insert(seq.data.values[v].end(), ds.values[v].begin() + static_cast<std::ptrdiff_t>(c.start_row),
                                      ds.values[v].begin() + static_cast<std::ptrdiff_t>(c.end_row));
            seq.data.mask[v].insert(seq.data.mask[v].end(), ds.mask[v].begin() + static_cast<std::ptrdiff_t>(c.start_row),
                                    ds.mask[v].begin() + static_cast<std::ptrdiff_t>(c.end_row));
        }
        written += c.end_row - c.start_row;
        seq.provenance.emplace_back(c.cluster.value_or(-1), c.id);
    }
    seq.data.check();
    return seq;
}

}  // namespace tscausal
