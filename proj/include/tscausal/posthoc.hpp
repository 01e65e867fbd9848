#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "io.hpp"
#include "pcmci.hpp"

namespace tscausal {

using ClusterGraphs = std::map<int, CausalGraph>;

struct PairFrequencyRow {
    int source_id = 0;
    int target_id = 0;
    int frequency = 0;          // number of cluster graphs containing the pair
    std::vector<int> clusters;  // ascending cluster keys
    int min_lag = 0;
    int max_lag = 0;
};

struct LagSummary {
    int min_lag = 0;
    int max_lag = 0;
    double lag_unit_s = 0.0;
    std::map<int, std::vector<int>> lags_by_cluster;
};

namespace detail {

inline void check_shared_universe(const ClusterGraphs& graphs) {
    if (graphs.empty()) throw DataError("compare: no cluster graphs given");
    std::vector<int> ref;
    for (const auto& v : graphs.begin()->second.variables) ref.push_back(v.index);
    std::sort(ref.begin(), ref.end());
    for (const auto& [k, g] : graphs) {
        std::vector<int> ids;
        for (const auto& v : g.variables) ids.push_back(v.index);
        std::sort(ids.begin(), ids.end());
        if (ids != ref) {
            throw DataError("compare: cluster " + std::to_string(k) + " uses a different variable universe");
        }
    }
}

// Directed cross-variable pairs asserted by a graph. Undecided and conflicted
// lag-0 edges carry no direction and are skipped; self-links are not pairs.
inline std::map<std::pair<int, int>, std::vector<int>> directed_pairs(const CausalGraph& g) {
    std::map<std::pair<int, int>, std::vector<int>> out;
    for (const auto& l : g.links) {
        if (l.source_id == l.target_id) continue;
        if (l.mark != OrientationMark::directed) continue;
        out[{l.source_id, l.target_id}].push_back(l.lag);
    }
    return out;
}

}  // namespace detail

inline std::vector<PairFrequencyRow> pair_frequency(const ClusterGraphs& graphs) {
    detail::check_shared_universe(graphs);
    struct Acc {
        std::vector<int> clusters;
        int min_lag = 0;
        int max_lag = 0;
        bool any = false;
    };
    std::map<std::pair<int, int>, Acc> acc;
    for (const auto& [k, g] : graphs) {
        for (const auto& [pair, lags] : detail::directed_pairs(g)) {
            auto& a = acc[pair];
            a.clusters.push_back(k);
            for (int lag : lags) {
                if (!a.any) {
                    a.min_lag = a.max_lag = lag;
                    a.any = true;
                } else {
                    a.min_lag = std::min(a.min_lag, lag);
                    a.max_lag = std::max(a.max_lag, lag);
                }
            }
        }
    }
    std::vector<PairFrequencyRow> rows;
    for (const auto& [pair, a] : acc) {
        rows.push_back({pair.first, pair.second, static_cast<int>(a.clusters.size()), a.clusters, a.min_lag,
                        a.max_lag});
    }
    std::sort(rows.begin(), rows.end(), [](const PairFrequencyRow& a, const PairFrequencyRow& b) {
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        if (a.source_id != b.source_id) return a.source_id < b.source_id;
        return a.target_id < b.target_id;
    });
    return rows;
}

struct CommonSpecificReport {
    int min_common = 0;
    std::vector<PairFrequencyRow> common;                       // frequency >= min_common
    std::map<int, std::vector<PairFrequencyRow>> specific;      // frequency == 1, keyed by the one cluster
};

inline CommonSpecificReport common_and_specific(const ClusterGraphs& graphs, int min_common) {
    if (min_common < 1) throw ConfigError("compare: min_common must be positive");
    CommonSpecificReport rep;
    rep.min_common = min_common;
    for (const auto& row : pair_frequency(graphs)) {
        if (row.frequency >= min_common) rep.common.push_back(row);
        if (row.frequency == 1) rep.specific[row.clusters.front()].push_back(row);
    }
    return rep;
}

inline LagSummary lag_summary(const ClusterGraphs& graphs, int source_id, int target_id) {
    detail::check_shared_universe(graphs);
    LagSummary s;
    s.lag_unit_s = graphs.begin()->second.lag_unit_s;
    bool any = false;
    for (const auto& [k, g] : graphs) {
        const auto pairs = detail::directed_pairs(g);
        const auto it = pairs.find({source_id, target_id});
        if (it == pairs.end()) continue;
        auto lags = it->second;
        std::sort(lags.begin(), lags.end());
        s.lags_by_cluster[k] = lags;
        for (int lag : lags) {
            if (!any) {
                s.min_lag = s.max_lag = lag;
                any = true;
            } else {
                s.min_lag = std::min(s.min_lag, lag);
                s.max_lag = std::max(s.max_lag, lag);
            }
        }
    }
    if (!any) {
        throw DataError("compare: pair (" + std::to_string(source_id) + ", " + std::to_string(target_id) +
                        ") appears in no cluster graph");
    }
    return s;
}

// Unordered pairs linked in both directions (at any lags) within one cluster.
inline std::map<int, std::vector<std::pair<int, int>>> detect_feedback_pairs(const ClusterGraphs& graphs) {
    detail::check_shared_universe(graphs);
    std::map<int, std::vector<std::pair<int, int>>> out;
    for (const auto& [k, g] : graphs) {
        const auto pairs = detail::directed_pairs(g);
        std::vector<std::pair<int, int>> fb;
        for (const auto& [pair, lags] : pairs) {
            if (pair.first < pair.second && pairs.count({pair.second, pair.first})) fb.push_back(pair);
        }
        if (!fb.empty()) out[k] = std::move(fb);
    }
    return out;
}

inline void write_pair_frequency_csv(const std::vector<PairFrequencyRow>& rows, const std::string& path) {
    AtomicFile file(path);
    auto& out = file.stream();
    out << "source,target,frequency,clusters,min_lag,max_lag\n";
    for (const auto& r : rows) {
        out << r.source_id << "," << r.target_id << "," << r.frequency << ",";
        for (std::size_t i = 0; i < r.clusters.size(); ++i) {
            out << r.clusters[i] << (i + 1 < r.clusters.size() ? ";" : "");
        }
        out << "," << r.min_lag << "," << r.max_lag << "\n";
    }
    file.commit();
}

inline std::string variable_label(const CausalGraph& g, int id) {
    for (const auto& v : g.variables) {
        if (v.index == id) return v.name;
    }
    return "var" + std::to_string(id);
}

inline void write_compare_report(const ClusterGraphs& graphs, const CommonSpecificReport& rep,
                                 const std::map<int, std::vector<std::pair<int, int>>>& feedback,
                                 const std::string& path) {
    const auto& ref = graphs.begin()->second;
    AtomicFile file(path);
    auto& out = file.stream();
    out << "Cross-cluster link comparison (" << graphs.size() << " clusters)\n\n";
    out << "Common links (present in >= " << rep.min_common << " clusters):\n";
    if (rep.common.empty()) out << "  none\n";
    for (const auto& r : rep.common) {
        out << "  " << variable_label(ref, r.source_id) << " (" << r.source_id << ") -> "
            << variable_label(ref, r.target_id) << " (" << r.target_id << ")  in " << r.frequency
            << " clusters, lags " << r.min_lag << ".." << r.max_lag << "\n";
    }
    out << "\nCluster-specific links (present in exactly one cluster):\n";
    if (rep.specific.empty()) out << "  none\n";
    for (const auto& [k, rows] : rep.specific) {
        out << "  cluster " << k << ":\n";
        for (const auto& r : rows) {
            out << "    " << variable_label(ref, r.source_id) << " (" << r.source_id << ") -> "
                << variable_label(ref, r.target_id) << " (" << r.target_id << ")  lags " << r.min_lag << ".."
                << r.max_lag << "\n";
        }
    }
    out << "\nFeedback pairs (both directions within one cluster):\n";
    if (feedback.empty()) out << "  none\n";
    for (const auto& [k, fb] : feedback) {
        out << "  cluster " << k << ":";
        for (const auto& [a, b] : fb) out << "  " << a << "<->" << b;
        out << "\n";
    }
    file.commit();
}

}  // namespace tscausal
