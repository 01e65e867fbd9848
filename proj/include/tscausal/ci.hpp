#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"
#include "stats.hpp"

namespace tscausal {

enum class CITestName { RobustParCorr, ParCorrWLS, GPDC, CMIknn };

inline const char* to_string(CITestName t) {
    switch (t) {
        case CITestName::RobustParCorr: return "robust_parcorr";
        case CITestName::ParCorrWLS: return "parcorr_wls";
        case CITestName::GPDC: return "gpdc";
        case CITestName::CMIknn: return "cmi_knn";
    }
    return "robust_parcorr";
}

inline CITestName ci_test_from_string(const std::string& s) {
    if (s == "robust_parcorr") return CITestName::RobustParCorr;
    if (s == "parcorr_wls") return CITestName::ParCorrWLS;
    if (s == "gpdc") return CITestName::GPDC;
    if (s == "cmi_knn") return CITestName::CMIknn;
    throw ConfigError("unknown CI test: " + s);
}

inline const std::vector<CITestName>& all_ci_tests() {
    static const std::vector<CITestName> v = {CITestName::RobustParCorr, CITestName::ParCorrWLS, CITestName::GPDC,
                                              CITestName::CMIknn};
    return v;
}

struct CITestOptions {
    int min_samples = 30;
    int knn_k = 0;              // 0 = auto: max(10, min(n/10, 60))
    int cmi_permutations = 500;
    int gpdc_permutations = 200;
    int shuffle_neighbors = 5;  // local-permutation candidate pool in z-space
    int wls_window = 0;         // 0 = auto: max(10, n/10)
    double variance_floor = 1e-8;
    // Row caps for the O(n^2)-per-permutation tests: when a query exceeds the
    // cap, an evenly strided row subset is used instead. gp_max_train bounds
    // both GP training and the distance-correlation sample; cmi_max_samples
    // bounds the CMI estimator (0 = no cap).
    int gp_max_train = 500;
    int cmi_max_samples = 0;
    // Permutation tests stop early once enough exceedances guarantee
    // p > alpha_guard; reported p-values above alpha_guard are then lower
    // bounds, and accept/reject decisions are exact for alpha <= alpha_guard.
    double alpha_guard = 0.1;
    std::uint64_t seed = 0;

    void check() const {
        if (min_samples < 5) throw ConfigError("ci options: min_samples must be >= 5");
        if (knn_k < 0) throw ConfigError("ci options: knn_k must be non-negative");
        if (cmi_permutations < 1 || gpdc_permutations < 1) throw ConfigError("ci options: permutations must be positive");
        if (shuffle_neighbors < 1) throw ConfigError("ci options: shuffle_neighbors must be positive");
        if (variance_floor <= 0.0) throw ConfigError("ci options: variance_floor must be positive");
        if (gp_max_train < 10) throw ConfigError("ci options: gp_max_train must be >= 10");
        if (cmi_max_samples < 0) throw ConfigError("ci options: cmi_max_samples must be non-negative");
        if (!(alpha_guard > 0.0 && alpha_guard <= 1.0)) throw ConfigError("ci options: alpha_guard must lie in (0, 1]");
    }
};

struct CIQuery {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<std::vector<double>> z;  // conditioning columns, possibly none
};

struct CITestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int n_effective = 0;
    CITestName test_name = CITestName::RobustParCorr;
    bool variance_floor_applied = false;
};

namespace detail {

inline std::size_t checked_query_size(const CIQuery& q, const CITestOptions& opts) {
    opts.check();
    const std::size_t n = q.x.size();
    if (q.y.size() != n) throw DataError("ci query: x and y lengths differ");
    for (const auto& col : q.z) {
        if (col.size() != n) throw DataError("ci query: conditioning column length differs");
    }
    if (n < static_cast<std::size_t>(opts.min_samples)) {
        throw InsufficientSamplesError("ci query: " + std::to_string(n) + " samples, need at least " +
                                       std::to_string(opts.min_samples));
    }
    return n;
}

// True when y should take the x role: tests that involve per-role randomness
// (jitter, permutation targets) canonicalize roles first so swapping x and y
// cannot change the result.
inline bool swap_for_canonical_roles(const std::vector<double>& x, const std::vector<double>& y) {
    return std::lexicographical_compare(y.begin(), y.end(), x.begin(), x.end());
}

// Evenly strided row subset of a query. The selection depends only on the
// lengths, so capped tests stay deterministic and relabeling-invariant.
inline CIQuery subsample_query(const CIQuery& q, std::size_t cap) {
    const std::size_t n = q.x.size();
    CIQuery sub;
    sub.x.resize(cap);
    sub.y.resize(cap);
    sub.z.assign(q.z.size(), std::vector<double>(cap));
    for (std::size_t i = 0; i < cap; ++i) {
        const std::size_t r = i * n / cap;
        sub.x[i] = q.x[r];
        sub.y[i] = q.y[r];
        for (std::size_t c = 0; c < q.z.size(); ++c) sub.z[c][i] = q.z[c][r];
    }
    return sub;
}

// Windowed-mean variance profile: squared residuals are averaged over a
// sliding window along the sort order of the primary conditioning column.
inline std::vector<double> windowed_variance(const std::vector<double>& sq_resid, const std::vector<double>& sort_key,
                                             int window) {
    const std::size_t n = sq_resid.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sort_key[a] != sort_key[b]) return sort_key[a] < sort_key[b];
        return a < b;
    });
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + sq_resid[order[i]];
    std::vector<double> out(n);
    const std::ptrdiff_t w = std::max<std::ptrdiff_t>(1, window);
    for (std::size_t pos = 0; pos < n; ++pos) {
        std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(pos) - w / 2;
        std::ptrdiff_t hi = lo + w;
        if (lo < 0) {
            hi -= lo;
            lo = 0;
        }
        if (hi > static_cast<std::ptrdiff_t>(n)) {
            lo -= hi - static_cast<std::ptrdiff_t>(n);
            hi = static_cast<std::ptrdiff_t>(n);
            lo = std::max<std::ptrdiff_t>(0, lo);
        }
        out[order[pos]] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    }
    return out;
}

}  // namespace detail

// Rank-based partial correlation: every column is mapped to normal scores,
// x and y are OLS-residualized on z, and the residual Pearson correlation is
// tested against a t distribution with n - |z| - 2 degrees of freedom.
inline CITestResult robust_parcorr(const CIQuery& q, const CITestOptions& opts = {}) {
    const std::size_t n = detail::checked_query_size(q, opts);
    const auto xs = normal_scores(q.x);
    const auto ys = normal_scores(q.y);
    // Distinct raw columns can collapse to identical score vectors (e.g. two
    // lags of a monotone counter share one rank pattern). A rank-based test
    // sees no information beyond the shared ranks, so duplicates are dropped;
    // the degenerate-conditioning error is reserved for genuine collinearity.
    std::vector<std::vector<double>> zs;
    zs.reserve(q.z.size());
    for (const auto& col : q.z) {
        auto scores = normal_scores(col);
        bool duplicate = false;
        for (const auto& kept : zs) {
            if (kept == scores) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) zs.push_back(std::move(scores));
    }
    const auto rx = ols_residuals(xs, zs);
    const auto ry = ols_residuals(ys, zs);
    CITestResult res;
    res.test_name = CITestName::RobustParCorr;
    res.n_effective = static_cast<int>(n);
    res.statistic = pearson(rx, ry);
    res.p_value = correlation_t_pvalue(res.statistic, static_cast<double>(n) - static_cast<double>(zs.size()) - 2.0);
    return res;
}

// Partial correlation with per-variable weighted least squares. The variance
// of each variable given z is estimated by a windowed mean of its squared OLS
// residuals along the sorted primary conditioning column; rows are weighted by
// the inverse estimated variance. Empty z keeps all weights at 1.
inline CITestResult parcorr_wls(const CIQuery& q, const CITestOptions& opts = {}) {
    const std::size_t n = detail::checked_query_size(q, opts);
    CITestResult res;
    res.test_name = CITestName::ParCorrWLS;
    res.n_effective = static_cast<int>(n);

    std::vector<double> wrx, wry;
    if (q.z.empty()) {
        wrx = ols_residuals(q.x, q.z);
        wry = ols_residuals(q.y, q.z);
    } else {
        const int window = opts.wls_window > 0 ? opts.wls_window
                                               : std::max(10, static_cast<int>(n) / 10);
        auto weighted_residuals = [&](const std::vector<double>& v) {
            const auto r0 = ols_residuals(v, q.z);
            std::vector<double> sq(n);
            for (std::size_t i = 0; i < n; ++i) sq[i] = r0[i] * r0[i];
            auto var = detail::windowed_variance(sq, q.z.front(), window);
            std::vector<double> sw(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (var[i] < opts.variance_floor) {
                    var[i] = opts.variance_floor;
                    res.variance_floor_applied = true;
                }
                sw[i] = 1.0 / std::sqrt(var[i]);
            }
            return ols_residuals(v, q.z, &sw);
        };
        wrx = weighted_residuals(q.x);
        wry = weighted_residuals(q.y);
    }
    res.statistic = pearson(wrx, wry);
    res.p_value = correlation_t_pvalue(res.statistic, static_cast<double>(n) - static_cast<double>(q.z.size()) - 2.0);
    return res;
}

}  // namespace tscausal
