#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "ci.hpp"
#include "common.hpp"
#include "stats.hpp"

namespace tscausal {
namespace detail {

// Gaussian-process residualization of y on z: RBF kernel plus a noise term,
// hyperparameters picked by marginal likelihood over a fixed grid of
// length-scales (multiples of the median pairwise z distance) and noise
// variances. Training uses at most gp_max_train evenly spaced rows; the
// posterior mean is evaluated at every row.
inline std::vector<double> gp_residualize(const std::vector<double>& y, const std::vector<std::vector<double>>& z,
                                          const CITestOptions& opts) {
    const std::size_t n = y.size();
    const std::size_t dims = z.size();

    const double mu = mean_of(y);
    const double sd = stddev_of(y);
    if (sd <= 0.0) return std::vector<double>(n, 0.0);  // constant target: nothing to explain
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = (y[i] - mu) / sd;

    std::vector<std::size_t> train;
    const auto cap = static_cast<std::size_t>(opts.gp_max_train);
    if (n <= cap) {
        train = identity_permutation(n);
    } else {
        train.resize(cap);
        for (std::size_t i = 0; i < cap; ++i) train[i] = i * n / cap;
    }
    const std::size_t m = train.size();

    Eigen::MatrixXd d2(m, m);
    std::vector<double> dists;
    dists.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i) {
        d2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 0.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < dims; ++c) {
                const double diff = z[c][train[i]] - z[c][train[j]];
                s += diff * diff;
            }
            d2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
            d2(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = s;
            dists.push_back(std::sqrt(s));
        }
    }
    double med = dists.empty() ? 1.0 : quantile_type7(dists, 0.5);
    if (med <= 0.0) med = 1.0;

    Eigen::VectorXd yt(m);
    for (std::size_t i = 0; i < m; ++i) yt(static_cast<Eigen::Index>(i)) = ys[train[i]];

    const double scales[] = {0.3 * med, 1.0 * med, 3.0 * med};
    const double noises[] = {1e-2, 1e-1};
    double best_logml = -std::numeric_limits<double>::infinity();
    double best_scale = med, best_noise = 1e-1;
    Eigen::VectorXd best_alpha;

    for (double ell : scales) {
        const double inv = 1.0 / (2.0 * ell * ell);
        Eigen::MatrixXd kf = (-d2 * inv).array().exp().matrix();
        for (double s2 : noises) {
            Eigen::MatrixXd k = kf;
            k.diagonal().array() += s2;
            Eigen::LLT<Eigen::MatrixXd> llt;
            double jitter = 0.0;
            for (int attempt = 0;; ++attempt) {
                llt.compute(k);
                if (llt.info() == Eigen::Success) break;
                if (attempt >= 3) throw DataError("gpdc: kernel matrix not positive definite after jitter escalation");
                jitter = jitter == 0.0 ? 1e-8 : jitter * 100.0;
                k.diagonal().array() += jitter;
            }
            const Eigen::VectorXd alpha = llt.solve(yt);
            double logdet = 0.0;
            for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m); ++i) logdet += std::log(llt.matrixL()(i, i));
            const double logml = -0.5 * yt.dot(alpha) - logdet -
                                 0.5 * static_cast<double>(m) * std::log(2.0 * std::acos(-1.0));
            if (logml > best_logml) {
                best_logml = logml;
                best_scale = ell;
                best_noise = s2;
                best_alpha = alpha;
            }
        }
    }
    (void)best_noise;

    const double inv = 1.0 / (2.0 * best_scale * best_scale);
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        double pred = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < dims; ++c) {
                const double diff = z[c][i] - z[c][train[j]];
                s += diff * diff;
            }
            pred += std::exp(-s * inv) * best_alpha(static_cast<Eigen::Index>(j));
        }
        resid[i] = ys[i] - pred;
    }
    return resid;
}

}  // namespace detail

// GP regression residuals + distance correlation with a permutation p-value:
// p = (1 + #{perm stat >= observed}) / (B + 1). Roles are canonicalized before
// permuting so gpdc(x, y) == gpdc(y, x) bit for bit.
inline CITestResult gpdc(const CIQuery& q_in, const CITestOptions& opts = {}) {
    std::size_t n = detail::checked_query_size(q_in, opts);
    // Above the training cap, the whole test runs on one strided row subset:
    // the GP then trains and predicts on the same rows the distance
    // correlation sees, and the permutation loop stays O(cap^2).
    const auto cap = static_cast<std::size_t>(opts.gp_max_train);
    const bool capped = n > cap;
    CIQuery capped_query;
    if (capped) {
        capped_query = detail::subsample_query(q_in, cap);
        n = cap;
    }
    const CIQuery& q = capped ? capped_query : q_in;
    const bool swapped = detail::swap_for_canonical_roles(q.x, q.y);
    const auto& a = swapped ? q.y : q.x;
    const auto& b = swapped ? q.x : q.y;

    std::vector<double> ra, rb;
    if (q.z.empty()) {
        ra = a;
        rb = b;
    } else {
        ra = detail::gp_residualize(a, q.z, opts);
        rb = detail::gp_residualize(b, q.z, opts);
    }

    const DistanceCorrelation dc(ra, rb);
    CITestResult res;
    res.test_name = CITestName::GPDC;
    res.n_effective = static_cast<int>(n);
    res.statistic = dc.statistic(identity_permutation(n));

    const int B = opts.gpdc_permutations;
    const int guard = static_cast<int>(std::ceil(opts.alpha_guard * static_cast<double>(B + 1)));
    Rng rng(stable_mix(opts.seed, 0x67646370u));
    auto perm = identity_permutation(n);
    int hits = 0, done = 0;
    for (int iter = 0; iter < B; ++iter) {
        rng.shuffle(perm);
        ++done;
        if (dc.statistic(perm) >= res.statistic) {
            if (++hits >= guard) break;  // p > alpha_guard is already certain
        }
    }
    res.p_value = static_cast<double>(1 + hits) / static_cast<double>(done + 1);
    return res;
}

}  // namespace tscausal
