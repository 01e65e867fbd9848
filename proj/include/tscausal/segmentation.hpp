#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "io.hpp"

namespace tscausal {

struct SegmentationRules {
    double start_temp_c = 200.0;   // cycle starts when temperature rises above this from below
    double end_temp_c = 300.0;     // cycle ends when temperature falls below this after the peak
    double min_duration_s = 1800.0;
    double max_duration_s = 10800.0;
    double refractory_s = 300.0;   // dead time after an end trigger before the next start can fire

    void check() const {
        if (min_duration_s <= 0.0 || max_duration_s <= 0.0 || min_duration_s >= max_duration_s) {
            throw ConfigError("segmentation rules: need 0 < min_duration_s < max_duration_s");
        }
        if (refractory_s < 0.0) throw ConfigError("segmentation rules: refractory_s must be non-negative");
    }
};

struct CycleStats {
    double production_time_s = 0.0;
    double weight_tonne = 0.0;
    double energy_kwh = 0.0;
    double specific_energy_kwh_per_tonne = 0.0;
};

struct MeltingCycle {
    int id = 0;
    std::size_t start_row = 0;
    std::size_t end_row = 0;  // exclusive
    CycleStats stats;
    std::optional<int> cluster;
};

struct SegmentationResult {
    std::vector<MeltingCycle> cycles;   // ordered by start_row, ids 0..n-1
    int discarded_duration = 0;         // completed excursions violating min/max duration
    int false_starts = 0;               // rose above start threshold but fell back before reaching end threshold
    int truncated = 0;                  // series ended mid-cycle
};

// Threshold/time state machine over the temperature channel. Masked samples
// carry no information: the scan skips them without changing state. A cycle
// runs from the first sample above start_temp_c to just past the first sample
// below end_temp_c once the excursion has reached end_temp_c (the half-open
// range includes that first cooling sample). Excursions that never reach
// end_temp_c and fall back below start_temp_c are false starts. An end
// trigger (kept or duration-discarded) arms the refractory window.
inline SegmentationResult segment_cycles(const TimeSeriesDataset& ds, const SegmentationRules& rules,
                                         int temp_var_index) {
    rules.check();
    const int col = ds.column_of_index(temp_var_index);
    if (col < 0) throw DataError("segment_cycles: no variable with index " + std::to_string(temp_var_index));
    const auto& temp = ds.values[static_cast<std::size_t>(col)];
    const auto& tmask = ds.mask[static_cast<std::size_t>(col)];
    bool any_observed = false;
    for (auto m : tmask) any_observed |= (m != 0);
    if (!any_observed) throw DataError("segment_cycles: temperature variable is fully masked");

    SegmentationResult out;
    bool in_cycle = false;
    bool reached_end_threshold = false;
    std::size_t start_row = 0;
    double refractory_until = -1.0;  // absolute time; start triggers before this are suppressed

    auto close_cycle = [&](std::size_t end_row) {
        const double duration = static_cast<double>(end_row - start_row) * ds.sample_interval_s;
        if (duration >= rules.min_duration_s && duration <= rules.max_duration_s) {
            MeltingCycle c;
            c.id = static_cast<int>(out.cycles.size());
            c.start_row = start_row;
            c.end_row = end_row;
            out.cycles.push_back(c);
        } else {
            ++out.discarded_duration;
        }
        refractory_until = ds.time_at(end_row - 1) + rules.refractory_s;
        in_cycle = false;
        reached_end_threshold = false;
    };

    for (std::size_t t = 0; t < ds.rows(); ++t) {
        if (!tmask[t]) continue;
        const double v = temp[t];
        if (!in_cycle) {
            if (v > rules.start_temp_c && ds.time_at(t) >= refractory_until) {
                in_cycle = true;
                reached_end_threshold = false;
                start_row = t;
            }
            continue;
        }
        if (v >= rules.end_temp_c) reached_end_threshold = true;
        if (reached_end_threshold && v < rules.end_temp_c) {
            close_cycle(t + 1);
        } else if (!reached_end_threshold && v <= rules.start_temp_c) {
            ++out.false_starts;
            in_cycle = false;
        }
    }
    if (in_cycle) ++out.truncated;
    return out;
}

struct StatVariableMap {
    int weight_index = 1;   // furnace charge, cycle weight = max observed value
    int energy_index = 8;   // cumulative energy counter
};

// Cycle statistics are meaningful on raw values only; the pipeline computes
// them before standardization.
inline CycleStats compute_cycle_stats(const TimeSeriesDataset& ds, const MeltingCycle& cycle,
                                      const StatVariableMap& vars) {
    const int wcol = ds.column_of_index(vars.weight_index);
    const int ecol = ds.column_of_index(vars.energy_index);
    if (wcol < 0) throw DataError("compute_cycle_stats: weight variable index " +
                                  std::to_string(vars.weight_index) + " not in dataset");
    if (ecol < 0) throw DataError("compute_cycle_stats: energy variable index " +
                                  std::to_string(vars.energy_index) + " not in dataset");
    if (cycle.end_row <= cycle.start_row || cycle.end_row > ds.rows()) {
        throw DataError("compute_cycle_stats: cycle range out of bounds");
    }

    CycleStats s;
    s.production_time_s = static_cast<double>(cycle.end_row - cycle.start_row) * ds.sample_interval_s;

    bool have_energy = false, have_weight = false;
    double first_energy = 0.0, max_energy = 0.0, max_weight = 0.0;
    for (std::size_t t = cycle.start_row; t < cycle.end_row; ++t) {
        if (ds.mask[static_cast<std::size_t>(ecol)][t]) {
            const double e = ds.values[static_cast<std::size_t>(ecol)][t];
            if (!have_energy) {
                first_energy = e;
                max_energy = e;
                have_energy = true;
            } else {
                max_energy = std::max(max_energy, e);
            }
        }
        if (ds.mask[static_cast<std::size_t>(wcol)][t]) {
            const double w = ds.values[static_cast<std::size_t>(wcol)][t];
            max_weight = have_weight ? std::max(max_weight, w) : w;
            have_weight = true;
        }
    }
    if (!have_energy) throw DataError("compute_cycle_stats: no observed energy values in cycle");
    if (!have_weight) throw DataError("compute_cycle_stats: no observed weight values in cycle");

    // Counter delta within the cycle; a mid-cycle counter reset makes the
    // delta negative, in which case the max reading itself is the best bound.
    const double delta = max_energy - first_energy;
    s.energy_kwh = delta >= 0.0 ? delta : max_energy;
    s.weight_tonne = max_weight;
    if (s.weight_tonne <= 0.0) {
        throw DataError("compute_cycle_stats: non-positive cycle weight, specific energy undefined");
    }
    s.specific_energy_kwh_per_tonne = s.energy_kwh / s.weight_tonne;
    return s;
}

struct ClusterPartition {
    std::map<int, int> assignments;  // cycle id -> label in 0..k-1
    int k = 0;

    void check() const {
        std::set<int> labels;
        for (const auto& [id, lab] : assignments) {
            (void)id;
            if (lab < 0 || lab >= k) throw DataError("cluster partition: label out of range");
            labels.insert(lab);
        }
        if (static_cast<int>(labels.size()) != k && !assignments.empty()) {
            throw DataError("cluster partition: k does not match distinct label count");
        }
    }
};

// Label file: CSV `cycle_id,cluster`, one row per cycle. Arbitrary integer
// labels are accepted and remapped to dense 0..k-1 in ascending label order.
inline ClusterPartition ingest_cluster_labels(const std::string& path, const std::vector<MeltingCycle>& cycles) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cluster label file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty cluster label file: " + path);
    {
        auto header = detail::split_csv_line(line);
        if (header.size() != 2 || detail::trim(header[0]) != "cycle_id" || detail::trim(header[1]) != "cluster") {
            throw DataError("cluster label file must have header 'cycle_id,cluster'");
        }
    }
    std::set<int> known;
    for (const auto& c : cycles) known.insert(c.id);

    std::map<int, int> raw;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 2) throw DataError("cluster label file line " + std::to_string(lineno) + ": expected 2 cells");
        const auto id = detail::parse_double(cells[0]);
        const auto lab = detail::parse_double(cells[1]);
        if (!id || !lab) throw DataError("cluster label file line " + std::to_string(lineno) + ": unparsable cell");
        const int cid = static_cast<int>(*id);
        if (!known.count(cid)) {
            throw DataError("cluster label file: unknown cycle id " + std::to_string(cid));
        }
        raw[cid] = static_cast<int>(*lab);
    }
    for (const auto& c : cycles) {
        if (!raw.count(c.id)) throw DataError("cluster label file: missing cycle id " + std::to_string(c.id));
    }

    std::set<int> distinct;
    for (const auto& [id, lab] : raw) {
        (void)id;
        distinct.insert(lab);
    }
    std::map<int, int> remap;
    int next = 0;
    for (int lab : distinct) remap[lab] = next++;

    ClusterPartition part;
    part.k = next;
    for (const auto& [id, lab] : raw) part.assignments[id] = remap[lab];
    part.check();
    return part;
}

inline void export_cluster_labels(const ClusterPartition& part, const std::string& path) {
    AtomicFile file(path);
    file.stream() << "cycle_id,cluster\n";
    for (const auto& [id, lab] : part.assignments) file.stream() << id << "," << lab << "\n";
    file.commit();
}

namespace detail {

// Linear resampling of a cycle's observed temperature samples to a fixed
// number of points.
inline std::vector<double> resample_profile(const std::vector<double>& obs, int profile_len) {
    std::vector<double> prof(static_cast<std::size_t>(profile_len));
    const std::size_t n = obs.size();
    for (int p = 0; p < profile_len; ++p) {
        const double pos = profile_len == 1 ? 0.0
                                            : static_cast<double>(p) * static_cast<double>(n - 1) /
                                                  static_cast<double>(profile_len - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, n - 1);
        const double frac = pos - static_cast<double>(lo);
        prof[static_cast<std::size_t>(p)] = obs[lo] * (1.0 - frac) + obs[hi] * frac;
    }
    return prof;
}

}  // namespace detail

// Simple stand-in clustering: each cycle's observed temperature trajectory is
// resampled to profile_len points and the profiles are k-means clustered
// (k-means++ seeding, squared Euclidean, Lloyd iterations). Deterministic for
// a fixed seed. Output labels are remapped so label order follows the first
// cycle id in each cluster.
inline ClusterPartition baseline_cluster(const std::vector<MeltingCycle>& cycles, const TimeSeriesDataset& ds,
                                         int k, int profile_len, std::uint64_t seed, int temp_var_index = 3) {
    if (k < 1) throw ConfigError("baseline_cluster: k must be >= 1");
    if (profile_len < 2) throw ConfigError("baseline_cluster: profile_len must be >= 2");
    if (static_cast<std::size_t>(k) > cycles.size()) {
        throw DataError("baseline_cluster: k exceeds number of cycles");
    }
    const int col = ds.column_of_index(temp_var_index);
    if (col < 0) throw DataError("baseline_cluster: no variable with index " + std::to_string(temp_var_index));

    std::vector<std::vector<double>> profiles;
    profiles.reserve(cycles.size());
    for (const auto& c : cycles) {
        std::vector<double> obs;
        for (std::size_t t = c.start_row; t < c.end_row; ++t) {
            if (ds.mask[static_cast<std::size_t>(col)][t]) obs.push_back(ds.values[static_cast<std::size_t>(col)][t]);
        }
        if (obs.size() < 2) {
            throw DataError("baseline_cluster: cycle " + std::to_string(c.id) +
                            " has fewer than 2 observed temperature points");
        }
        profiles.push_back(detail::resample_profile(obs, profile_len));
    }

    const std::size_t n = profiles.size();
    const std::size_t d = static_cast<std::size_t>(profile_len);
    auto sqdist = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double diff = a[i] - b[i];
            s += diff * diff;
        }
        return s;
    };

    Rng rng(stable_mix(seed, 0xC1u));
    std::vector<std::vector<double>> centers;
    centers.push_back(profiles[rng.below(n)]);
    std::vector<double> mind(n);
    while (centers.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = sqdist(profiles[i], centers[0]);
            for (std::size_t c = 1; c < centers.size(); ++c) best = std::min(best, sqdist(profiles[i], centers[c]));
            mind[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = rng.below(n);
        } else {
            double target = rng.u01() * total, acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += mind[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(profiles[pick]);
    }

    std::vector<int> label(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double bestd = sqdist(profiles[i], centers[0]);
            for (int c = 1; c < k; ++c) {
                const double dd = sqdist(profiles[i], centers[static_cast<std::size_t>(c)]);
                if (dd < bestd) {
                    bestd = dd;
                    best = c;
                }
            }
            if (label[i] != best) {
                label[i] = best;
                changed = true;
            }
        }
        std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(d, 0.0));
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[static_cast<std::size_t>(label[i])];
            for (std::size_t j = 0; j < d; ++j) sums[static_cast<std::size_t>(label[i])][j] += profiles[i][j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) {
                // Re-seed an empty cluster with the point farthest from its center.
                std::size_t far = 0;
                double fard = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dd = sqdist(profiles[i], centers[static_cast<std::size_t>(label[i])]);
                    if (dd > fard) {
                        fard = dd;
                        far = i;
                    }
                }
                centers[static_cast<std::size_t>(c)] = profiles[far];
                changed = true;
            } else {
                for (std::size_t j = 0; j < d; ++j) {
                    centers[static_cast<std::size_t>(c)][j] =
                        sums[static_cast<std::size_t>(c)][j] / counts[static_cast<std::size_t>(c)];
                }
            }
        }
        if (!changed) break;
    }

    // Canonical label order: cluster of the lowest cycle id gets label 0, etc.
    std::map<int, int> remap;
    int next = 0;
    ClusterPartition part;
    for (std::size_t i = 0; i < n; ++i) {
        if (!remap.count(label[i])) remap[label[i]] = next++;
    }
    part.k = next;
    for (std::size_t i = 0; i < n; ++i) part.assignments[cycles[i].id] = remap[label[i]];
    part.check();
    return part;
}

// Cycle index file: one row per kept cycle with its range, statistics, and
// cluster label (-1 when unassigned).
inline void write_cycle_index(const std::vector<MeltingCycle>& cycles, const std::string& path) {
    AtomicFile file(path);
    auto& out = file.stream();
    out << "cycle_id,start_row,end_row,production_time_s,weight_tonne,energy_kwh,"
           "specific_energy_kwh_per_tonne,cluster\n";
    for (const auto& c : cycles) {
        out << c.id << "," << c.start_row << "," << c.end_row << "," << detail::format_double(c.stats.production_time_s)
            << "," << detail::format_double(c.stats.weight_tonne) << "," << detail::format_double(c.stats.energy_kwh)
            << "," << detail::format_double(c.stats.specific_energy_kwh_per_tonne) << ","
            << (c.cluster ? *c.cluster : -1) << "\n";
    }
    file.commit();
}

inline std::vector<MeltingCycle> load_cycle_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cycle index file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty cycle index file: " + path);
    std::vector<MeltingCycle> cycles;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 8) throw DataError("cycle index line " + std::to_string(lineno) + ": expected 8 cells");
        std::array<double, 8> v{};
        for (std::size_t i = 0; i < 8; ++i) {
            const auto p = detail::parse_double(cells[i]);
            if (!p) throw DataError("cycle index line " + std::to_string(lineno) + ": unparsable cell");
            v[i] = *p;
        }
        MeltingCycle c;
        c.id = static_cast<int>(v[0]);
        c.start_row = static_cast<std::size_t>(v[1]);
        c.end_row = static_cast<std::size_t>(v[2]);
        c.stats.production_time_s = v[3];
        c.stats.weight_tonne = v[4];
        c.stats.energy_kwh = v[5];
        c.stats.specific_energy_kwh_per_tonne = v[6];
        const int lab = static_cast<int>(v[7]);
        if (lab >= 0) c.cluster = lab;
        cycles.push_back(c);
    }
    return cycles;
}

}  // namespace tscausal
