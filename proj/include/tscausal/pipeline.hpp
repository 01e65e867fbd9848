#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "config.hpp"
#include "graph_io.hpp"
#include "hybrid.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "pcmci.hpp"
#include "posthoc.hpp"
#include "sampler.hpp"
#include "segmentation.hpp"
#include "synth.hpp"

namespace tscausal {

struct StageResult {
    std::vector<std::string> warnings;

    void merge(const StageResult& other) {
        warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
    }
};

namespace detail {

inline std::filesystem::path out_path(const PipelineConfig& cfg, const std::string& name) {
    return std::filesystem::path(cfg.out_dir) / name;
}

inline void write_effective_config(const PipelineConfig& cfg) {
    write_file_atomic(out_path(cfg, "effective_config.json"), effective_config_json(cfg).dump(2) + "\n");
}

inline std::pair<TimeSeriesDataset, StandardizationReport> ingest(const PipelineConfig& cfg) {
    std::vector<VariableMeta> schema;
    if (cfg.schema == "furnace") {
        schema = default_furnace_schema();
    } else {
        schema = schema_from_header(cfg.input_csv);
    }
    TimeSeriesDataset raw = load_csv(cfg.input_csv, schema, cfg.sample_interval_s);
    return drop_sparse_variables(raw, cfg.max_missing_fraction);
}

inline std::map<int, std::vector<MeltingCycle>> cycles_by_cluster(const std::vector<MeltingCycle>& cycles) {
    std::map<int, std::vector<MeltingCycle>> out;
    for (const auto& c : cycles) {
        if (c.cluster && *c.cluster >= 0) out[*c.cluster].push_back(c);
    }
    return out;
}

}  // namespace detail

// Stage 1: segment the trace into melting cycles, attach statistics and
// cluster labels, and write the cycle index.
inline StageResult run_segment_stage(const PipelineConfig& cfg) {
    StageResult res;
    std::filesystem::create_directories(cfg.out_dir);
    detail::write_effective_config(cfg);

    auto [ds, ingest_report] = detail::ingest(cfg);
    write_file_atomic(detail::out_path(cfg, "ingest_report.json"), ingest_report.to_json().dump(2) + "\n");
    for (const auto& d : ingest_report.variables_dropped) {
        res.warnings.push_back("dropped variable " + d.name + " (" + d.reason + ")");
    }

    SegmentationResult seg = segment_cycles(ds, cfg.rules, cfg.temperature_index);
    if (seg.cycles.empty()) throw DataError("segment: no melting cycles found");
    for (auto& c : seg.cycles) c.stats = compute_cycle_stats(ds, c, cfg.stat_vars);

    ClusterPartition part;
    if (!cfg.labels_csv.empty()) {
        part = ingest_cluster_labels(cfg.labels_csv, seg.cycles);
    } else {
        part = baseline_cluster(seg.cycles, ds, cfg.cluster_k, cfg.profile_len,
                                stable_mix(cfg.seed, 0x636C7573ull), cfg.temperature_index);
        export_cluster_labels(part, detail::out_path(cfg, "cluster_labels.csv").string());
    }
    for (auto& c : seg.cycles) {
        const auto it = part.assignments.find(c.id);
        if (it != part.assignments.end()) c.cluster = it->second;
    }

    write_cycle_index(seg.cycles, detail::out_path(cfg, "cycles.csv").string());
    if (seg.false_starts > 0) {
        res.warnings.push_back(std::to_string(seg.false_starts) + " false start(s) ignored");
    }
    if (seg.discarded_duration > 0) {
        res.warnings.push_back(std::to_string(seg.discarded_duration) + " cycle(s) outside duration limits");
    }
    if (seg.truncated > 0) res.warnings.push_back("trace ends inside an open cycle");
    return res;
}

// Stage 2: per-cluster subset selection with distribution validation.
inline StageResult run_sample_stage(const PipelineConfig& cfg) {
    StageResult res;
    std::filesystem::create_directories(cfg.out_dir);
    detail::write_effective_config(cfg);

    const auto cycles = load_cycle_index(detail::out_path(cfg, "cycles.csv").string());
    const auto groups = detail::cycles_by_cluster(cycles);
    if (groups.empty()) throw DataError("sample: cycle index has no cluster assignments");

    for (const auto& [cluster, members] : groups) {
        SamplerConfig sc = cfg.sampler;
        sc.seed = stable_mix(cfg.sampler.seed, static_cast<std::uint64_t>(cluster));

        auto [kept, removed] = remove_outlier_cycles(members, sc);
        if (kept.empty()) throw DataError("sample: cluster " + std::to_string(cluster) + " has no usable cycles");
        auto [selected, report] = sample_and_validate(kept, sc);

        AtomicFile manifest(detail::out_path(cfg, "manifest_cluster_" + std::to_string(cluster) + ".csv"));
        manifest.stream() << "cluster,cycle_id\n";
        for (const auto& c : selected) manifest.stream() << cluster << "," << c.id << "\n";
        manifest.commit();

        nlohmann::ordered_json doc = report.to_json();
        doc["cluster"] = cluster;
        doc["cycles_in_cluster"] = members.size();
        doc["cycles_after_outlier_removal"] = kept.size();
        doc["cycles_selected"] = selected.size();
        doc["removed_outliers"] = nlohmann::ordered_json::array();
        for (const auto& r : removed) {
            doc["removed_outliers"].push_back(
                {{"cycle_id", r.cycle_id}, {"feature", r.feature}, {"value", r.value}});
        }
        write_file_atomic(detail::out_path(cfg, "validation_cluster_" + std::to_string(cluster) + ".json"),
                          doc.dump(2) + "\n");
        if (!report.pass) {
            res.warnings.push_back("cluster " + std::to_string(cluster) +
                                   ": subset validation failed after retries (best draw kept)");
        }
    }
    return res;
}

// Stage 3: per-cluster causal discovery, one graph per configured test plus
// the integrated result.
inline StageResult run_discover_stage(const PipelineConfig& cfg) {
    StageResult res;
    std::filesystem::create_directories(cfg.out_dir);
    detail::write_effective_config(cfg);

    auto [ds, ingest_report] = detail::ingest(cfg);
    (void)ingest_report;
    const auto cycles = load_cycle_index(detail::out_path(cfg, "cycles.csv").string());
    std::map<int, MeltingCycle> by_id;
    for (const auto& c : cycles) by_id[c.id] = c;
    const auto groups = detail::cycles_by_cluster(cycles);

    struct ClusterJob {
        int cluster = 0;
        RepresentativeSequence seq;
        nlohmann::ordered_json std_report;
    };
    std::vector<ClusterJob> jobs_list;
    nlohmann::ordered_json summary;
    summary["clusters"] = nlohmann::ordered_json::array();
    summary["skipped"] = nlohmann::ordered_json::array();

    for (const auto& [cluster, members] : groups) {
        (void)members;
        const auto manifest_path = detail::out_path(cfg, "manifest_cluster_" + std::to_string(cluster) + ".csv");
        if (!std::filesystem::exists(manifest_path)) {
            throw DataError("discover: missing manifest for cluster " + std::to_string(cluster) +
                            " (run the sample stage first)");
        }
        std::vector<MeltingCycle> selected;
        {
            const std::string text = read_file(manifest_path);
            std::size_t pos = text.find('\n');
            if (pos == std::string::npos) throw DataError("discover: empty manifest " + manifest_path.string());
            ++pos;
            while (pos < text.size()) {
                std::size_t eol = text.find('\n', pos);
                if (eol == std::string::npos) eol = text.size();
                std::string line = text.substr(pos, eol - pos);
                pos = eol + 1;
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty()) continue;
                const auto comma = line.find(',');
                if (comma == std::string::npos) throw DataError("discover: malformed manifest line: " + line);
                const int id = std::stoi(line.substr(comma + 1));
                const auto it = by_id.find(id);
                if (it == by_id.end()) {
                    throw DataError("discover: manifest cycle " + std::to_string(id) + " not in cycle index");
                }
                selected.push_back(it->second);
            }
        }
        if (selected.empty()) throw DataError("discover: manifest for cluster " + std::to_string(cluster) + " is empty");

        RepresentativeSequence seq = concatenate(selected, ds);
        auto [std_data, std_report] = standardize(seq.data);
        seq.data = std::move(std_data);

        nlohmann::ordered_json cj;
        cj["cluster"] = cluster;
        cj["rows"] = seq.data.rows();
        cj["cycles"] = selected.size();
        cj["standardization"] = std_report.to_json();
        jobs_list.push_back({cluster, std::move(seq), std::move(cj)});
    }

    const auto tests = cfg.tests;
    struct Cell {
        CausalGraph graph;
        LaggedAdjacency adj;
        bool ok = false;
        std::string skip_reason;
    };
    std::vector<Cell> cells(jobs_list.size() * tests.size());
    parallel_for(cells.size(), cfg.jobs, [&](std::size_t idx) {
        const std::size_t ci = idx / tests.size();
        const std::size_t ti = idx % tests.size();
        DiscoveryConfig dc = cfg.discovery;
        dc.ci_test = ci_test_from_string(tests[ti]);
        dc.seed = stable_mix(cfg.discovery.seed,
                             stable_mix(static_cast<std::uint64_t>(jobs_list[ci].cluster) + 1,
                                        static_cast<std::uint64_t>(ti) + 1));
        try {
            auto [graph, adj] = run_pcmci_plus(jobs_list[ci].seq, dc);
            cells[idx] = {std::move(graph), std::move(adj), true, {}};
        } catch (const InsufficientSamplesError& e) {
            cells[idx].skip_reason = e.what();
        }
    });

    for (std::size_t ci = 0; ci < jobs_list.size(); ++ci) {
        const int cluster = jobs_list[ci].cluster;
        const std::string base = "graph_cluster" + std::to_string(cluster) + "_";
        bool all_ok = true;
        for (std::size_t ti = 0; ti < tests.size(); ++ti) {
            const auto& cell = cells[ci * tests.size() + ti];
            if (!cell.ok) {
                all_ok = false;
                summary["skipped"].push_back(
                    {{"cluster", cluster}, {"test", tests[ti]}, {"reason", cell.skip_reason}});
                res.warnings.push_back("cluster " + std::to_string(cluster) + " " + tests[ti] + " skipped: " +
                                       cell.skip_reason);
                continue;
            }
            write_graph_json(cell.graph, detail::out_path(cfg, base + tests[ti] + ".json").string());
            write_graph_dot(cell.graph, detail::out_path(cfg, base + tests[ti] + ".dot").string(),
                            "cluster" + std::to_string(cluster) + "_" + tests[ti]);
        }
        if (cfg.hybrid && all_ok && tests.size() == 4) {
            const auto& c0 = cells[ci * 4 + 0];
            const auto& c1 = cells[ci * 4 + 1];
            const auto& c2 = cells[ci * 4 + 2];
            const auto& c3 = cells[ci * 4 + 3];
            HybridResult h = hybrid_integrate(c0.adj, c1.adj, c2.adj, c3.adj);
            const CausalGraph graph =
                adjacency_to_graph(h.matrix, jobs_list[ci].seq.data.variables, jobs_list[ci].seq.data.sample_interval_s);
            const ProvenanceMap prov = provenance_map(h);
            write_graph_json(graph, detail::out_path(cfg, base + "hybrid.json").string(), &prov);
            write_graph_dot(graph, detail::out_path(cfg, base + "hybrid.dot").string(),
                            "cluster" + std::to_string(cluster) + "_hybrid");
        }
        summary["clusters"].push_back(jobs_list[ci].std_report);
    }
    write_file_atomic(detail::out_path(cfg, "discover_summary.json"), summary.dump(2) + "\n");
    return res;
}

// Stage 4: cross-cluster comparison over the integrated graphs (falling back
// to the first configured test when integration is off).
inline StageResult run_compare_stage(const PipelineConfig& cfg) {
    StageResult res;
    std::filesystem::create_directories(cfg.out_dir);
    detail::write_effective_config(cfg);

    const std::string suffix = cfg.hybrid ? "hybrid" : cfg.tests.front();
    ClusterGraphs graphs;
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(cfg.out_dir)) {
        if (entry.is_regular_file()) paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        const std::string name = p.filename().string();
        const std::string prefix = "graph_cluster";
        const std::string tail = "_" + suffix + ".json";
        if (name.rfind(prefix, 0) != 0 || name.size() <= prefix.size() + tail.size()) continue;
        if (name.substr(name.size() - tail.size()) != tail) continue;
        const std::string mid = name.substr(prefix.size(), name.size() - prefix.size() - tail.size());
        if (mid.empty() || mid.find_first_not_of("0123456789") != std::string::npos) continue;
        graphs[std::stoi(mid)] = read_graph_json(p.string());
    }

    if (graphs.empty()) {
        write_file_atomic(detail::out_path(cfg, "pair_frequency.csv"),
                          "source,target,frequency,clusters,min_lag,max_lag\n");
        write_file_atomic(detail::out_path(cfg, "compare_report.txt"), "No cluster graphs found.\n");
        res.warnings.push_back("compare: no cluster graphs found in " + cfg.out_dir);
        return res;
    }

    const auto rows = pair_frequency(graphs);
    write_pair_frequency_csv(rows, detail::out_path(cfg, "pair_frequency.csv").string());
    const auto rep = common_and_specific(graphs, cfg.min_common);
    const auto feedback = detect_feedback_pairs(graphs);
    write_compare_report(graphs, rep, feedback, detail::out_path(cfg, "compare_report.txt").string());
    return res;
}

inline StageResult run_pipeline(const PipelineConfig& cfg) {
    StageResult res;
    res.merge(run_segment_stage(cfg));
    res.merge(run_sample_stage(cfg));
    res.merge(run_discover_stage(cfg));
    res.merge(run_compare_stage(cfg));
    return res;
}

inline StageResult run_bench_stage(const std::vector<SCMSpec>& suite, const DiscoveryConfig& base,
                                   const std::string& out_dir, int jobs) {
    StageResult res;
    std::filesystem::create_directories(out_dir);
    const BenchmarkReport report = run_benchmark(suite, base, true, jobs);
    write_file_atomic(std::filesystem::path(out_dir) / "bench_report.csv", benchmark_csv(report));
    write_file_atomic(std::filesystem::path(out_dir) / "bench_report.json", benchmark_json(report).dump(2) + "\n");
    return res;
}

}  // namespace tscausal
