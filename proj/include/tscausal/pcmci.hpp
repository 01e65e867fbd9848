#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ci_dispatch.hpp"
#include "common.hpp"
#include "dataset.hpp"
#include "sampler.hpp"

namespace tscausal {

enum class OrientationMark { directed, unoriented, conflict };

inline const char* to_string(OrientationMark m) {
    switch (m) {
        case OrientationMark::directed: return "directed";
        case OrientationMark::unoriented: return "unoriented";
        case OrientationMark::conflict: return "conflict";
    }
    return "directed";
}

inline OrientationMark orientation_from_string(const std::string& s) {
    if (s == "directed") return OrientationMark::directed;
    if (s == "unoriented") return OrientationMark::unoriented;
    if (s == "conflict") return OrientationMark::conflict;
    throw DataError("unknown orientation mark: " + s);
}

struct AdjEntry {
    bool present = false;
    double strength = 0.0;
    double p_value = 1.0;
    OrientationMark mark = OrientationMark::directed;  // meaningful at lag 0
};

// Dense (source, target, lag) adjacency, lag 0..tau_max. Lagged entries are
// directed by time; lag-0 pairs may be present in both directions, with the
// orientation mark distinguishing an undecided edge from a conflict.
class LaggedAdjacency {
public:
    LaggedAdjacency() = default;
    LaggedAdjacency(std::vector<int> var_ids, int tau_max)
        : var_ids_(std::move(var_ids)), tau_max_(tau_max),
          entries_(var_ids_.size() * var_ids_.size() * static_cast<std::size_t>(tau_max + 1)) {
        if (tau_max < 1) throw ConfigError("lagged adjacency: tau_max must be >= 1");
    }

    int n_vars() const { return static_cast<int>(var_ids_.size()); }
    int tau_max() const { return tau_max_; }
    const std::vector<int>& var_ids() const { return var_ids_; }

    AdjEntry& at(int source, int target, int lag) { return entries_[offset(source, target, lag)]; }
    const AdjEntry& at(int source, int target, int lag) const { return entries_[offset(source, target, lag)]; }

    bool same_universe(const LaggedAdjacency& other) const {
        return var_ids_ == other.var_ids_ && tau_max_ == other.tau_max_;
    }

    std::size_t offset(int source, int target, int lag) const {
        const auto n = var_ids_.size();
        if (source < 0 || target < 0 || lag < 0 || source >= static_cast<int>(n) || target >= static_cast<int>(n) ||
            lag > tau_max_) {
            throw DataError("lagged adjacency: index out of range");
        }
        return (static_cast<std::size_t>(source) * n + static_cast<std::size_t>(target)) *
                   static_cast<std::size_t>(tau_max_ + 1) +
               static_cast<std::size_t>(lag);
    }

private:
    std::vector<int> var_ids_;
    int tau_max_ = 1;
    std::vector<AdjEntry> entries_;
};

struct GraphLink {
    int source_id = 0;  // stable variable ids, not column positions
    int target_id = 0;
    int lag = 0;
    double strength = 0.0;
    double p_value = 1.0;
    OrientationMark mark = OrientationMark::directed;
};

struct CausalGraph {
    std::vector<VariableMeta> variables;
    std::vector<GraphLink> links;
    double lag_unit_s = 10.0;
};

struct CellRef {
    int col = 0;  // column position in the analyzed dataset
    int lag = 0;

    friend bool operator<(const CellRef& a, const CellRef& b) {
        if (a.lag != b.lag) return a.lag < b.lag;
        return a.col < b.col;
    }
    friend bool operator==(const CellRef& a, const CellRef& b) { return a.col == b.col && a.lag == b.lag; }
};

struct QueryRecord {
    int phase = 0;  // 0 condition selection, 1 contemporaneous skeleton, 2 mci
    int xcol = 0;
    int xlag = 0;
    int ycol = 0;
    std::vector<CellRef> conds;
    int max_lag = 0;
    std::vector<std::size_t> rows;
};

struct DiscoveryConfig {
    int tau_max = 5;
    double pc_alpha = 0.05;
    double mci_alpha = 0.05;
    CITestName ci_test = CITestName::RobustParCorr;
    int max_conds_dim = 3;
    int contemp_pool_cap = 8;  // strongest conditioning candidates kept per lag-0 pair
    std::uint64_t seed = 0;
    CITestOptions ci;
    std::vector<QueryRecord>* query_log = nullptr;  // test instrumentation, not serialized

    void check() const {
        if (tau_max < 1) throw ConfigError("discovery: tau_max must be >= 1");
        if (!(pc_alpha > 0.0 && pc_alpha < 1.0)) throw ConfigError("discovery: pc_alpha must lie in (0, 1)");
        if (!(mci_alpha > 0.0 && mci_alpha < 1.0)) throw ConfigError("discovery: mci_alpha must lie in (0, 1)");
        if (max_conds_dim < 0) throw ConfigError("discovery: max_conds_dim must be non-negative");
        if (contemp_pool_cap < 1) throw ConfigError("discovery: contemp_pool_cap must be positive");
        ci.check();
    }
};

struct ParentLink {
    int source_col = 0;
    int lag = 1;
    double strength = 0.0;  // signed statistic from the last surviving test
    double p_value = 1.0;
};

struct ParentsMap {
    std::vector<std::vector<ParentLink>> by_target;  // sorted by |strength| desc, ties by (id, lag)
};

using SepsetMap = std::map<std::pair<int, int>, std::vector<CellRef>>;

// A row t is valid for a window reaching back tau steps iff no cycle junction
// falls inside (t - tau, t], i.e. t is invalid exactly on [b, b + tau) for
// every boundary b. Rows with t < tau are invalid outright.
inline std::vector<std::uint8_t> boundary_mask(const std::vector<std::size_t>& boundary_rows, std::size_t rows,
                                               int tau) {
    std::vector<std::uint8_t> valid(rows, 1);
    for (std::size_t t = 0; t < std::min<std::size_t>(static_cast<std::size_t>(tau), rows); ++t) valid[t] = 0;
    for (std::size_t b : boundary_rows) {
        for (std::size_t t = b; t < std::min(rows, b + static_cast<std::size_t>(tau)); ++t) valid[t] = 0;
    }
    return valid;
}

namespace detail {

inline std::uint64_t query_stream(int phase, int x_id, int y_id, int lag, int dim) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint64_t v : {static_cast<std::uint64_t>(phase), static_cast<std::uint64_t>(x_id),
                            static_cast<std::uint64_t>(y_id), static_cast<std::uint64_t>(lag + 1),
                            static_cast<std::uint64_t>(dim)}) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
}

class DiscoveryEngine {
public:
    DiscoveryEngine(const RepresentativeSequence& seq, const DiscoveryConfig& cfg) : seq_(seq), cfg_(cfg) {
        cfg_.check();
        seq_.data.check();
        n_vars_ = static_cast<int>(seq_.data.cols());
        if (n_vars_ < 1) throw DataError("discovery: need at least 1 variable");
        var_ids_.reserve(seq_.data.cols());
        for (const auto& v : seq_.data.variables) var_ids_.push_back(v.index);
    }

    const std::vector<int>& var_ids() const { return var_ids_; }

    // Assembles a CI query under the boundary mask with listwise deletion over
    // every involved cell, then dispatches the configured test. Conditions are
    // canonically ordered so the derived seed and the regression design depend
    // only on the query's identity.
    CITestResult test(int phase, int xcol, int xlag, int ycol, std::vector<CellRef> conds) {
        std::sort(conds.begin(), conds.end(), [&](const CellRef& a, const CellRef& b) {
            if (a.lag != b.lag) return a.lag < b.lag;
            return var_ids_[static_cast<std::size_t>(a.col)] < var_ids_[static_cast<std::size_t>(b.col)];
        });
        int max_lag = xlag;
        for (const auto& c : conds) max_lag = std::max(max_lag, c.lag);

        const auto valid = boundary_mask(seq_.boundary_rows, seq_.data.rows(), max_lag);
        const auto& ds = seq_.data;
        std::vector<std::size_t> rows;
        for (std::size_t t = static_cast<std::size_t>(max_lag); t < ds.rows(); ++t) {
            if (!valid[t]) continue;
            if (!ds.mask[static_cast<std::size_t>(ycol)][t]) continue;
            if (!ds.mask[static_cast<std::size_t>(xcol)][t - static_cast<std::size_t>(xlag)]) continue;
            bool ok = true;
            for (const auto& c : conds) {
                if (!ds.mask[static_cast<std::size_t>(c.col)][t - static_cast<std::size_t>(c.lag)]) {
                    ok = false;
                    break;
                }
            }
            if (ok) rows.push_back(t);
        }

        CIQuery q;
        q.x.reserve(rows.size());
        q.y.reserve(rows.size());
        q.z.assign(conds.size(), {});
        for (auto& col : q.z) col.reserve(rows.size());
        for (std::size_t t : rows) {
            q.x.push_back(ds.values[static_cast<std::size_t>(xcol)][t - static_cast<std::size_t>(xlag)]);
            q.y.push_back(ds.values[static_cast<std::size_t>(ycol)][t]);
            for (std::size_t c = 0; c < conds.size(); ++c) {
                q.z[c].push_back(ds.values[static_cast<std::size_t>(conds[c].col)][t - static_cast<std::size_t>(conds[c].lag)]);
            }
        }

        // Conditioning columns that are constant over the realized rows, or
        // exact duplicates of an earlier kept column, carry no information
        // (CMI(X;Y|Z,Z) = CMI(X;Y|Z)) and would only make regression designs
        // singular. Piecewise-constant channels such as charge weight produce
        // exactly duplicated lag copies, so this reduction is routine, not a
        // corner case. Value-based, hence invariant under column relabeling.
        {
            std::vector<std::size_t> keep;
            for (std::size_t c = 0; c < q.z.size(); ++c) {
                const auto& col = q.z[c];
                bool constant = true;
                for (std::size_t i = 1; i < col.size(); ++i) {
                    if (col[i] != col[0]) {
                        constant = false;
                        break;
                    }
                }
                if (constant) continue;
                bool duplicate = false;
                for (std::size_t k : keep) {
                    if (q.z[k] == col) {
                        duplicate = true;
                        break;
                    }
                }
                if (!duplicate) keep.push_back(c);
            }
            if (keep.size() != q.z.size()) {
                std::vector<std::vector<double>> z2;
                std::vector<CellRef> conds2;
                z2.reserve(keep.size());
                conds2.reserve(keep.size());
                for (std::size_t k : keep) {
                    z2.push_back(std::move(q.z[k]));
                    conds2.push_back(conds[k]);
                }
                q.z = std::move(z2);
                conds = std::move(conds2);
            }
        }

        if (cfg_.query_log) {
            cfg_.query_log->push_back({phase, xcol, xlag, ycol, conds, max_lag, rows});
        }

        // Lag-0 queries are symmetric in (x, y); feeding the canonical id pair
        // into the stream keeps results invariant under column permutation.
        int sid = var_ids_[static_cast<std::size_t>(xcol)];
        int tid = var_ids_[static_cast<std::size_t>(ycol)];
        if (xlag == 0 && sid > tid) std::swap(sid, tid);
        CITestOptions opts = cfg_.ci;
        opts.seed = stable_mix(cfg_.seed, query_stream(phase, sid, tid, xlag, static_cast<int>(conds.size())));
        auto describe = [&](const char* what) {
            std::string msg = std::string(what) + " [query x=" + std::to_string(var_ids_[static_cast<std::size_t>(xcol)]) +
                              " lag=" + std::to_string(xlag) + " y=" + std::to_string(var_ids_[static_cast<std::size_t>(ycol)]) +
                              " conds=";
            for (std::size_t c = 0; c < conds.size(); ++c) {
                msg += (c ? "," : "") + std::to_string(var_ids_[static_cast<std::size_t>(conds[c].col)]) + ":" +
                       std::to_string(conds[c].lag);
            }
            return msg + " rows=" + std::to_string(rows.size()) + "]";
        };
        try {
            return run_ci_test(cfg_.ci_test, q, opts);
        } catch (const InsufficientSamplesError& e) {
            throw InsufficientSamplesError(describe(e.what()));
        } catch (const DataError& e) {
            throw DataError(describe(e.what()));
        }
    }

    ParentsMap pc_condition_selection() {
        struct Cand {
            int col;
            int lag;
            double stat;
            double p;
        };
        ParentsMap pm;
        pm.by_target.resize(static_cast<std::size_t>(n_vars_));
        for (int j = 0; j < n_vars_; ++j) {
            std::vector<Cand> alive;
            for (int i = 0; i < n_vars_; ++i) {
                for (int lag = 1; lag <= cfg_.tau_max; ++lag) {
                    const auto res = test(0, i, lag, j, {});
                    if (res.p_value <= cfg_.pc_alpha) alive.push_back({i, lag, res.statistic, res.p_value});
                }
            }
            for (int dim = 1; dim <= cfg_.max_conds_dim; ++dim) {
                if (static_cast<int>(alive.size()) - 1 < dim) break;
                auto ranking = alive;  // snapshot: conditioning sets are stable within a sweep
                std::sort(ranking.begin(), ranking.end(), [&](const Cand& a, const Cand& b) {
                    const double ma = std::abs(a.stat), mb = std::abs(b.stat);
                    if (ma != mb) return ma > mb;
                    const int ia = var_ids_[static_cast<std::size_t>(a.col)], ib = var_ids_[static_cast<std::size_t>(b.col)];
                    if (ia != ib) return ia < ib;
                    return a.lag < b.lag;
                });
                std::vector<Cand> next;
                for (const auto& cand : alive) {
                    std::vector<CellRef> conds;
                    for (const auto& r : ranking) {
                        if (r.col == cand.col && r.lag == cand.lag) continue;
                        conds.push_back({r.col, r.lag});
                        if (static_cast<int>(conds.size()) == dim) break;
                    }
                    const auto res = test(0, cand.col, cand.lag, j, conds);
                    if (res.p_value <= cfg_.pc_alpha) next.push_back({cand.col, cand.lag, res.statistic, res.p_value});
                }
                alive = std::move(next);
            }
            auto& out = pm.by_target[static_cast<std::size_t>(j)];
            for (const auto& c : alive) out.push_back({c.col, c.lag, c.stat, c.p});
            std::sort(out.begin(), out.end(), [&](const ParentLink& a, const ParentLink& b) {
                const double ma = std::abs(a.strength), mb = std::abs(b.strength);
                if (ma != mb) return ma > mb;
                const int ia = var_ids_[static_cast<std::size_t>(a.source_col)],
                          ib = var_ids_[static_cast<std::size_t>(b.source_col)];
                if (ia != ib) return ia < ib;
                return a.lag < b.lag;
            });
        }
        return pm;
    }

    std::pair<LaggedAdjacency, SepsetMap> build_contemporaneous_skeleton(const ParentsMap& pm) {
        LaggedAdjacency adj(var_ids_, cfg_.tau_max);
        for (int j = 0; j < n_vars_; ++j) {
            for (const auto& pl : pm.by_target[static_cast<std::size_t>(j)]) {
                auto& e = adj.at(pl.source_col, j, pl.lag);
                e.present = true;
                e.strength = pl.strength;
                e.p_value = pl.p_value;
                e.mark = OrientationMark::directed;
            }
        }

        struct EdgeState {
            bool alive = true;
            double stat = 0.0;
            double p = 1.0;
        };
        std::map<std::pair<int, int>, EdgeState> edges;
        SepsetMap sepsets;
        for (int i = 0; i < n_vars_; ++i) {
            for (int j = i + 1; j < n_vars_; ++j) {
                const auto res = test(1, i, 0, j, {});
                if (res.p_value <= cfg_.pc_alpha) {
                    edges[{i, j}] = {true, res.statistic, res.p_value};
                } else {
                    sepsets[{i, j}] = {};
                }
            }
        }

        for (int dim = 1; dim <= cfg_.max_conds_dim; ++dim) {
            // Snapshot of the current neighborhood structure (stable sweeps).
            std::vector<std::vector<std::pair<double, int>>> nbr(static_cast<std::size_t>(n_vars_));
            for (const auto& [key, st] : edges) {
                if (!st.alive) continue;
                nbr[static_cast<std::size_t>(key.first)].push_back({std::abs(st.stat), key.second});
                nbr[static_cast<std::size_t>(key.second)].push_back({std::abs(st.stat), key.first});
            }
            bool any_tested = false;
            std::vector<std::pair<int, int>> removals;
            for (auto& [key, st] : edges) {
                if (!st.alive) continue;
                const int i = key.first, j = key.second;

                std::vector<std::pair<double, CellRef>> pool;  // (priority, cell)
                auto add = [&](double prio, CellRef c) {
                    for (auto& p : pool) {
                        if (p.second == c) {
                            p.first = std::max(p.first, prio);
                            return;
                        }
                    }
                    pool.push_back({prio, c});
                };
                const bool i_first = var_ids_[static_cast<std::size_t>(i)] < var_ids_[static_cast<std::size_t>(j)];
                for (int side : {i_first ? i : j, i_first ? j : i}) {
                    for (const auto& [s, k] : nbr[static_cast<std::size_t>(side)]) {
                        if (k != i && k != j) add(s + 1e6, {k, 0});  // contemporaneous first
                    }
                    for (const auto& pl : pm.by_target[static_cast<std::size_t>(side)]) {
                        add(std::abs(pl.strength), {pl.source_col, pl.lag});
                    }
                }
                std::sort(pool.begin(), pool.end(), [&](const auto& a, const auto& b) {
                    if (a.first != b.first) return a.first > b.first;
                    if (a.second.lag != b.second.lag) return a.second.lag < b.second.lag;
                    return var_ids_[static_cast<std::size_t>(a.second.col)] <
                           var_ids_[static_cast<std::size_t>(b.second.col)];
                });
                if (static_cast<int>(pool.size()) > cfg_.contemp_pool_cap) {
                    pool.resize(static_cast<std::size_t>(cfg_.contemp_pool_cap));
                }
                if (static_cast<int>(pool.size()) < dim) continue;
                any_tested = true;

                // Lexicographic combinations of `dim` pool entries.
                std::vector<int> ix(static_cast<std::size_t>(dim));
                for (int t = 0; t < dim; ++t) ix[static_cast<std::size_t>(t)] = t;
                bool removed = false;
                while (!removed) {
                    std::vector<CellRef> conds;
                    conds.reserve(static_cast<std::size_t>(dim));
                    for (int t : ix) conds.push_back(pool[static_cast<std::size_t>(t)].second);
                    const auto res = test(1, i, 0, j, conds);
                    st.stat = res.statistic;
                    st.p = res.p_value;
                    if (res.p_value > cfg_.pc_alpha) {
                        removals.push_back(key);
                        sepsets[key] = conds;
                        removed = true;
                        break;
                    }
                    int t = dim - 1;
                    while (t >= 0 && ix[static_cast<std::size_t>(t)] == static_cast<int>(pool.size()) - dim + t) --t;
                    if (t < 0) break;
                    ++ix[static_cast<std::size_t>(t)];
                    for (int u = t + 1; u < dim; ++u) ix[static_cast<std::size_t>(u)] = ix[static_cast<std::size_t>(u - 1)] + 1;
                }
            }
            for (const auto& key : removals) edges[key].alive = false;
            if (!any_tested) break;
        }

        for (const auto& [key, st] : edges) {
            if (!st.alive) continue;
            for (auto [a, b] : {std::pair<int, int>{key.first, key.second}, std::pair<int, int>{key.second, key.first}}) {
                auto& e = adj.at(a, b, 0);
                e.present = true;
                e.strength = st.stat;
                e.p_value = st.p;
                e.mark = OrientationMark::unoriented;
            }
        }
        return {std::move(adj), std::move(sepsets)};
    }

    void orient_contemporaneous(LaggedAdjacency& adj, const SepsetMap& sepsets) const {
        const int n = n_vars_;
        auto present = [&](int a, int b) { return adj.at(a, b, 0).present; };
        auto undirected = [&](int a, int b) {
            return present(a, b) && present(b, a) && adj.at(a, b, 0).mark == OrientationMark::unoriented;
        };
        auto adjacent = [&](int a, int b) { return present(a, b) || present(b, a); };
        auto set_conflict = [&](int a, int b) {
            for (auto [s, t] : {std::pair<int, int>{a, b}, std::pair<int, int>{b, a}}) {
                auto& e = adj.at(s, t, 0);
                const auto& other = adj.at(t, s, 0);
                if (!e.present) {
                    e.present = true;
                    e.strength = other.strength;
                    e.p_value = other.p_value;
                }
                e.mark = OrientationMark::conflict;
            }
        };
        auto set_directed = [&](int from, int to) {
            adj.at(from, to, 0).mark = OrientationMark::directed;
            adj.at(to, from, 0).present = false;
        };

        // Rule 1: a collider i -> k <- j is forced when k is absent from the
        // recorded separating set of the non-adjacent pair (i, j).
        std::map<std::pair<int, int>, std::set<int>> wanted;  // undirected edge -> desired sources
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    if (i == k || j == k) continue;
                    if (!undirected(i, k) || !undirected(j, k)) continue;
                    if (adjacent(i, j)) continue;
                    const auto sep = sepsets.find({i, j});
                    if (sep == sepsets.end()) continue;
                    bool k_in_sep = false;
                    for (const auto& c : sep->second) k_in_sep |= (c.col == k && c.lag == 0);
                    if (!k_in_sep) {
                        wanted[{std::min(i, k), std::max(i, k)}].insert(i);
                        wanted[{std::min(j, k), std::max(j, k)}].insert(j);
                    }
                }
            }
        }
        for (const auto& [edge, sources] : wanted) {
            if (!undirected(edge.first, edge.second)) continue;
            if (sources.size() > 1) {
                set_conflict(edge.first, edge.second);
            } else {
                const int from = *sources.begin();
                set_directed(from, from == edge.first ? edge.second : edge.first);
            }
        }

        // Rules 2 and 3 to fixpoint: chain propagation (i -> a, a - b, i and b
        // non-adjacent forces a -> b) and cycle avoidance (an existing directed
        // path a => b forces a -> b). Each pass decides from the state at pass
        // start, so the outcome does not depend on edge iteration order.
        auto is_directed = [&](int u, int v) {
            return present(u, v) && !present(v, u) && adj.at(u, v, 0).mark == OrientationMark::directed;
        };
        auto directed_path = [&](int from, int to) {
            std::vector<std::uint8_t> seen(static_cast<std::size_t>(n), 0);
            std::vector<int> stack = {from};
            seen[static_cast<std::size_t>(from)] = 1;
            while (!stack.empty()) {
                const int u = stack.back();
                stack.pop_back();
                if (u == to) return true;
                for (int v = 0; v < n; ++v) {
                    if (!seen[static_cast<std::size_t>(v)] && is_directed(u, v)) {
                        seen[static_cast<std::size_t>(v)] = 1;
                        stack.push_back(v);
                    }
                }
            }
            return false;
        };
        bool changed = true;
        while (changed) {
            changed = false;
            struct Decision {
                int a, b;
                bool to_b, to_a;
            };
            std::vector<Decision> decisions;
            for (int a = 0; a < n; ++a) {
                for (int b = a + 1; b < n; ++b) {
                    if (!undirected(a, b)) continue;
                    bool to_b = false, to_a = false;
                    for (int i = 0; i < n && !(to_b && to_a); ++i) {
                        if (i == a || i == b) continue;
                        if (is_directed(i, a) && !adjacent(i, b)) to_b = true;
                        if (is_directed(i, b) && !adjacent(i, a)) to_a = true;
                    }
                    if (!to_b && directed_path(a, b)) to_b = true;
                    if (!to_a && directed_path(b, a)) to_a = true;
                    if (to_b || to_a) decisions.push_back({a, b, to_b, to_a});
                }
            }
            for (const auto& d : decisions) {
                if (!undirected(d.a, d.b)) continue;
                if (d.to_b && d.to_a) {
                    set_conflict(d.a, d.b);
                } else if (d.to_b) {
                    set_directed(d.a, d.b);
                } else {
                    set_directed(d.b, d.a);
                }
                changed = true;
            }
        }

        // Safety net: demote the weakest edge of any remaining directed cycle.
        // Traversal follows stable variable ids so the demoted edge does not
        // depend on column order.
        std::vector<int> by_id(static_cast<std::size_t>(n));
        for (int c = 0; c < n; ++c) by_id[static_cast<std::size_t>(c)] = c;
        std::sort(by_id.begin(), by_id.end(), [&](int a, int b) {
            return var_ids_[static_cast<std::size_t>(a)] < var_ids_[static_cast<std::size_t>(b)];
        });
        while (true) {
            std::vector<int> color(static_cast<std::size_t>(n), 0);
            std::vector<int> cycle;
            std::vector<int> path;
            auto dfs = [&](auto&& self, int u) -> bool {
                color[static_cast<std::size_t>(u)] = 1;
                path.push_back(u);
                for (int v : by_id) {
                    if (!is_directed(u, v)) continue;
                    if (color[static_cast<std::size_t>(v)] == 1) {
                        auto it = std::find(path.begin(), path.end(), v);
                        cycle.assign(it, path.end());
                        return true;
                    }
                    if (color[static_cast<std::size_t>(v)] == 0 && self(self, v)) return true;
                }
                color[static_cast<std::size_t>(u)] = 2;
                path.pop_back();
                return false;
            };
            bool found = false;
            for (int s : by_id) {
                if (color[static_cast<std::size_t>(s)] == 0 && dfs(dfs, s)) {
                    found = true;
                    break;
                }
            }
            if (!found) break;
            int best_a = -1, best_b = -1;
            double best = 0.0;
            for (std::size_t t = 0; t < cycle.size(); ++t) {
                const int a = cycle[t], b = cycle[(t + 1) % cycle.size()];
                const double s = std::abs(adj.at(a, b, 0).strength);
                if (best_a < 0 || s < best) {
                    best = s;
                    best_a = a;
                    best_b = b;
                }
            }
            set_conflict(best_a, best_b);
        }
    }

    std::pair<CausalGraph, LaggedAdjacency> mci_tests(const ParentsMap& pm, const LaggedAdjacency& adj) {
        LaggedAdjacency out(var_ids_, cfg_.tau_max);
        auto contemp_adjacent = [&](int a, int b) {
            return adj.at(a, b, 0).present || adj.at(b, a, 0).present;
        };
        // Condition sets follow the full estimated adjacency: lagged parents
        // plus contemporaneous adjacents of both endpoints. Without the lag-0
        // terms, mediated shortcuts through a contemporaneous link survive at
        // any alpha.
        auto conds_for = [&](int target, int exclude_col, int exclude_lag, int source, int shift) {
            std::vector<CellRef> conds;
            auto add = [&](CellRef c) {
                if (std::find(conds.begin(), conds.end(), c) == conds.end()) conds.push_back(c);
            };
            for (const auto& pl : pm.by_target[static_cast<std::size_t>(target)]) {
                if (pl.source_col == exclude_col && pl.lag == exclude_lag) continue;
                add({pl.source_col, pl.lag});
            }
            for (const auto& pl : pm.by_target[static_cast<std::size_t>(source)]) {
                add({pl.source_col, pl.lag + shift});
            }
            for (int k = 0; k < n_vars_; ++k) {
                if (k != target && !(k == exclude_col && exclude_lag == 0) && contemp_adjacent(target, k)) {
                    add({k, 0});
                }
                if (k != source && !(k == target && shift == 0) && contemp_adjacent(source, k)) {
                    add({k, shift});
                }
            }
            return conds;
        };

        for (int j = 0; j < n_vars_; ++j) {
            for (int i = 0; i < n_vars_; ++i) {
                for (int lag = 1; lag <= cfg_.tau_max; ++lag) {
                    if (!adj.at(i, j, lag).present) continue;
                    const auto res = test(2, i, lag, j, conds_for(j, i, lag, i, lag));
                    if (res.p_value <= cfg_.mci_alpha) {
                        out.at(i, j, lag) = {true, res.statistic, res.p_value, OrientationMark::directed};
                    }
                }
            }
        }
        for (int i = 0; i < n_vars_; ++i) {
            for (int j = i + 1; j < n_vars_; ++j) {
                if (!adj.at(i, j, 0).present && !adj.at(j, i, 0).present) continue;
                const auto res = test(2, i, 0, j, conds_for(j, i, 0, i, 0));
                if (res.p_value > cfg_.mci_alpha) continue;
                for (auto [a, b] : {std::pair<int, int>{i, j}, std::pair<int, int>{j, i}}) {
                    if (adj.at(a, b, 0).present) {
                        out.at(a, b, 0) = {true, res.statistic, res.p_value, adj.at(a, b, 0).mark};
                    }
                }
            }
        }

        CausalGraph g;
        g.variables = seq_.data.variables;
        g.lag_unit_s = seq_.data.sample_interval_s;
        for (int i = 0; i < n_vars_; ++i) {
            for (int j = 0; j < n_vars_; ++j) {
                for (int lag = 0; lag <= cfg_.tau_max; ++lag) {
                    const auto& e = out.at(i, j, lag);
                    if (!e.present) continue;
                    // Undecided or conflicted lag-0 pairs are exported once,
                    // from the lower variable id.
                    if (lag == 0 && e.mark != OrientationMark::directed &&
                        var_ids_[static_cast<std::size_t>(i)] > var_ids_[static_cast<std::size_t>(j)]) {
                        continue;
                    }
                    g.links.push_back({var_ids_[static_cast<std::size_t>(i)], var_ids_[static_cast<std::size_t>(j)],
                                       lag, e.strength, e.p_value, e.mark});
                }
            }
        }
        std::sort(g.links.begin(), g.links.end(), [](const GraphLink& a, const GraphLink& b) {
            if (a.source_id != b.source_id) return a.source_id < b.source_id;
            if (a.target_id != b.target_id) return a.target_id < b.target_id;
            return a.lag < b.lag;
        });
        return {std::move(g), std::move(out)};
    }

private:
    RepresentativeSequence seq_;
    DiscoveryConfig cfg_;
    int n_vars_ = 0;
    std::vector<int> var_ids_;
};

}  // namespace detail

inline ParentsMap pc_condition_selection(const RepresentativeSequence& seq, const DiscoveryConfig& cfg) {
    return detail::DiscoveryEngine(seq, cfg).pc_condition_selection();
}

inline std::pair<CausalGraph, LaggedAdjacency> run_pcmci_plus(const RepresentativeSequence& seq,
                                                              const DiscoveryConfig& cfg) {
    detail::DiscoveryEngine engine(seq, cfg);
    const auto parents = engine.pc_condition_selection();
    auto [adj, sepsets] = engine.build_contemporaneous_skeleton(parents);
    engine.orient_contemporaneous(adj, sepsets);
    return engine.mci_tests(parents, adj);
}

// Rebuilds the link list of an adjacency matrix (used for integrated results
// that never went through mci_tests).
inline CausalGraph adjacency_to_graph(const LaggedAdjacency& adj, const std::vector<VariableMeta>& variables,
                                      double lag_unit_s) {
    if (static_cast<int>(variables.size()) != adj.n_vars()) {
        throw DataError("adjacency_to_graph: variable list does not match adjacency");
    }
    CausalGraph g;
    g.variables = variables;
    g.lag_unit_s = lag_unit_s;
    for (int i = 0; i < adj.n_vars(); ++i) {
        for (int j = 0; j < adj.n_vars(); ++j) {
            for (int lag = 0; lag <= adj.tau_max(); ++lag) {
                const auto& e = adj.at(i, j, lag);
                if (!e.present) continue;
                if (lag == 0 && e.mark != OrientationMark::directed && i > j) continue;
                g.links.push_back({adj.var_ids()[static_cast<std::size_t>(i)],
                                   adj.var_ids()[static_cast<std::size_t>(j)], lag, e.strength, e.p_value, e.mark});
            }
        }
    }
    std::sort(g.links.begin(), g.links.end(), [](const GraphLink& a, const GraphLink& b) {
        if (a.source_id != b.source_id) return a.source_id < b.source_id;
        if (a.target_id != b.target_id) return a.target_id < b.target_id;
        return a.lag < b.lag;
    });
    return g;
}

}  // namespace tscausal
