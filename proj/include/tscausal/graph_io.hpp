#pragma once

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "hybrid.hpp"
#include "io.hpp"
#include "pcmci.hpp"

namespace tscausal {

// (source id, target id, lag) -> provenance, for integrated graphs.
using ProvenanceMap = std::map<std::tuple<int, int, int>, LinkProvenance>;

inline ProvenanceMap provenance_map(const HybridResult& h) {
    ProvenanceMap out;
    const auto& ids = h.matrix.var_ids();
    for (int i = 0; i < h.matrix.n_vars(); ++i) {
        for (int j = 0; j < h.matrix.n_vars(); ++j) {
            for (int lag = 0; lag <= h.matrix.tau_max(); ++lag) {
                if (!h.matrix.at(i, j, lag).present) continue;
                out[{ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)], lag}] =
                    h.provenance_at(i, j, lag);
            }
        }
    }
    return out;
}

inline nlohmann::ordered_json graph_to_json(const CausalGraph& g, const ProvenanceMap* prov = nullptr) {
    nlohmann::ordered_json doc;
    doc["lag_unit_s"] = g.lag_unit_s;
    doc["variables"] = nlohmann::ordered_json::array();
    for (const auto& v : g.variables) {
        nlohmann::ordered_json jv;
        jv["index"] = v.index;
        jv["name"] = v.name;
        jv["unit"] = v.unit;
        jv["role"] = to_string(v.role);
        doc["variables"].push_back(jv);
    }
    doc["links"] = nlohmann::ordered_json::array();
    for (const auto& l : g.links) {
        nlohmann::ordered_json jl;
        jl["source"] = l.source_id;
        jl["target"] = l.target_id;
        jl["lag"] = l.lag;
        jl["strength"] = l.strength;
        jl["p_value"] = l.p_value;
        jl["orientation"] = to_string(l.mark);
        if (prov) {
            const auto it = prov->find({l.source_id, l.target_id, l.lag});
            if (it != prov->end()) jl["provenance"] = to_string(it->second);
        }
        doc["links"].push_back(jl);
    }
    return doc;
}

inline void write_graph_json(const CausalGraph& g, const std::string& path, const ProvenanceMap* prov = nullptr) {
    write_file_atomic(path, graph_to_json(g, prov).dump(2) + "\n");
}

inline CausalGraph graph_from_json(const nlohmann::json& doc) {
    CausalGraph g;
    try {
        g.lag_unit_s = doc.at("lag_unit_s").get<double>();
        for (const auto& jv : doc.at("variables")) {
            g.variables.push_back({jv.at("index").get<int>(), jv.at("name").get<std::string>(),
                                   jv.value("unit", std::string{}),
                                   variable_role_from_string(jv.value("role", std::string{"auxiliary"}))});
        }
        for (const auto& jl : doc.at("links")) {
            g.links.push_back({jl.at("source").get<int>(), jl.at("target").get<int>(), jl.at("lag").get<int>(),
                               jl.at("strength").get<double>(), jl.at("p_value").get<double>(),
                               orientation_from_string(jl.value("orientation", std::string{"directed"}))});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("graph JSON: ") + e.what());
    }
    return g;
}

inline CausalGraph read_graph_json(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("cannot parse graph JSON " + path + ": " + e.what());
    }
    return graph_from_json(doc);
}

namespace detail {

// Fixed |strength| buckets keep the rendering independent of the data range.
inline const char* dot_width(double s) {
    const double a = std::abs(s);
    if (a < 0.15) return "1.0";
    if (a < 0.3) return "1.8";
    if (a < 0.5) return "2.6";
    return "3.4";
}

inline const char* dot_color(double s) {
    const double a = std::abs(s);
    if (a < 0.15) return "#9e9e9e";
    if (a < 0.3) return "#6baed6";
    if (a < 0.5) return "#2171b5";
    return "#08306b";
}

}  // namespace detail

inline void write_graph_dot(const CausalGraph& g, const std::string& path,
                            const std::string& name = "causal_graph") {
    AtomicFile file(path);
    auto& out = file.stream();
    out << "digraph " << name << " {\n";
    out << "  rankdir=LR;\n";
    out << "  node [shape=box, style=\"rounded,filled\", fillcolor=\"#f0f4f8\", fontname=\"Helvetica\"];\n";
    std::vector<VariableMeta> vars = g.variables;
    std::sort(vars.begin(), vars.end(), [](const VariableMeta& a, const VariableMeta& b) { return a.index < b.index; });
    for (const auto& v : vars) {
        out << "  v" << v.index << " [label=\"" << v.name << "\\n[" << v.index << "]\"];\n";
    }
    for (const auto& l : g.links) {
        out << "  v" << l.source_id << " -> v" << l.target_id << " [label=\"lag " << l.lag << "\", penwidth="
            << detail::dot_width(l.strength) << ", color=\"" << detail::dot_color(l.strength) << "\"";
        if (l.mark == OrientationMark::unoriented) out << ", dir=none";
        if (l.mark == OrientationMark::conflict) out << ", dir=both, style=dashed";
        if (l.source_id == l.target_id) out << ", constraint=false";
        out << "];\n";
    }
    out << "}\n";
    file.commit();
}

}  // namespace tscausal
