#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "pcmci.hpp"

namespace tscausal {

enum class LinkProvenance { consensus, w4, both };

inline const char* to_string(LinkProvenance p) {
    switch (p) {
        case LinkProvenance::consensus: return "consensus";
        case LinkProvenance::w4: return "w4";
        case LinkProvenance::both: return "both";
    }
    return "consensus";
}

struct ResolvedPair {
    int source_id = 0;  // kept direction
    int target_id = 0;
    int lag = 0;
    bool via_w4 = false;  // true when the nonlinear result decided the direction
};

struct HybridResult {
    LaggedAdjacency matrix;
    std::vector<LinkProvenance> provenance;  // parallel to matrix entries
    std::vector<ResolvedPair> resolved;

    LinkProvenance provenance_at(int source, int target, int lag) const {
        return provenance[matrix.offset(source, target, lag)];
    }
};

// Combines four per-test result matrices: a link survives when all three
// linear-family tests agree on it, or whenever the nonlinear test reports it.
// Membership is evaluated per (source, target, lag) entry, so an undecided
// lag-0 edge (present in both directions) participates with both directions.
inline HybridResult integrate(const LaggedAdjacency& w1, const LaggedAdjacency& w2, const LaggedAdjacency& w3,
                              const LaggedAdjacency& w4) {
    for (const auto* w : {&w2, &w3, &w4}) {
        if (!w1.same_universe(*w)) throw DataError("hybrid: result matrices disagree on variables or tau_max");
    }
    const int n = w1.n_vars();
    const int tau_max = w1.tau_max();
    HybridResult h{LaggedAdjacency(w1.var_ids(), tau_max), {}, {}};
    h.provenance.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n) *
                            static_cast<std::size_t>(tau_max + 1),
                        LinkProvenance::consensus);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int lag = 0; lag <= tau_max; ++lag) {
                if (i == j && lag == 0) continue;
                const bool in123 =
                    w1.at(i, j, lag).present && w2.at(i, j, lag).present && w3.at(i, j, lag).present;
                const bool in4 = w4.at(i, j, lag).present;
                if (!in123 && !in4) continue;
                auto& e = h.matrix.at(i, j, lag);
                e.present = true;
                e.mark = OrientationMark::directed;
                if (in4) {
                    e.strength = w4.at(i, j, lag).strength;
                    e.p_value = w4.at(i, j, lag).p_value;
                } else {
                    e.strength = (w1.at(i, j, lag).strength + w2.at(i, j, lag).strength +
                                  w3.at(i, j, lag).strength) /
                                 3.0;
                    e.p_value = (w1.at(i, j, lag).p_value + w2.at(i, j, lag).p_value +
                                 w3.at(i, j, lag).p_value) /
                                3.0;
                }
                h.provenance[h.matrix.offset(i, j, lag)] =
                    in4 ? (in123 ? LinkProvenance::both : LinkProvenance::w4) : LinkProvenance::consensus;
            }
        }
    }
    return h;
}

// Resolves pairs present in both directions at the same lag. The nonlinear
// result decides when it contains exactly one direction; otherwise the higher
// |strength| direction survives. Both directions in w4 is a genuine conflict
// and both entries stay, marked as such. Idempotent: rerunning on the output
// changes nothing.
inline void resolve_bidirectional(HybridResult& h, const LaggedAdjacency& w4) {
    if (!h.matrix.same_universe(w4)) throw DataError("hybrid: resolve universe mismatch");
    const int n = h.matrix.n_vars();
    const auto& ids = h.matrix.var_ids();
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            for (int lag = 0; lag <= h.matrix.tau_max(); ++lag) {
                auto& ab = h.matrix.at(a, b, lag);
                auto& ba = h.matrix.at(b, a, lag);
                if (!ab.present || !ba.present) continue;
                const bool in4_ab = w4.at(a, b, lag).present;
                const bool in4_ba = w4.at(b, a, lag).present;
                if (in4_ab && in4_ba) {
                    ab.mark = OrientationMark::conflict;
                    ba.mark = OrientationMark::conflict;
                    continue;
                }
                int keep_a = a, keep_b = b;
                bool via_w4 = true;
                if (in4_ab) {
                    // keep a -> b
                } else if (in4_ba) {
                    keep_a = b;
                    keep_b = a;
                } else {
                    via_w4 = false;
                    // Ties fall to the lower (source id, target id) direction.
                    if (std::abs(ba.strength) > std::abs(ab.strength)) {
                        keep_a = b;
                        keep_b = a;
                    } else if (std::abs(ba.strength) == std::abs(ab.strength) &&
                               ids[static_cast<std::size_t>(b)] < ids[static_cast<std::size_t>(a)]) {
                        keep_a = b;
                        keep_b = a;
                    }
                }
                auto& drop = (keep_a == a) ? ba : ab;
                auto& kept = (keep_a == a) ? ab : ba;
                drop.present = false;
                kept.mark = OrientationMark::directed;
                h.resolved.push_back({ids[static_cast<std::size_t>(keep_a)], ids[static_cast<std::size_t>(keep_b)],
                                      lag, via_w4});
            }
        }
    }
}

inline HybridResult hybrid_integrate(const LaggedAdjacency& w1, const LaggedAdjacency& w2,
                                     const LaggedAdjacency& w3, const LaggedAdjacency& w4) {
    HybridResult h = integrate(w1, w2, w3, w4);
    resolve_bidirectional(h, w4);
    return h;
}

}  // namespace tscausal
