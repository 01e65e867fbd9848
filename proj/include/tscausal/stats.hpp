#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "common.hpp"

namespace tscausal {

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean_of: empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample variance with the given divisor delta (1 = unbiased, 0 = population).
inline double variance_of(const std::vector<double>& v, int ddof = 1) {
    if (v.size() <= static_cast<std::size_t>(ddof)) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size() - ddof);
}

inline double stddev_of(const std::vector<double>& v, int ddof = 1) {
    return std::sqrt(variance_of(v, ddof));
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("pearson: samples must have equal length >= 2");
    }
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// Ranks in [1, n], ties resolved by averaging.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> dist(0.0, 1.0);
    return boost::math::quantile(dist, p);
}

// Rank -> normal scores: phi^{-1}(rank / (n + 1)).
inline std::vector<double> normal_scores(const std::vector<double>& v) {
    const auto ranks = average_ranks(v);
    const double denom = static_cast<double>(v.size()) + 1.0;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = normal_quantile(ranks[i] / denom);
    return out;
}

// Two-sided p-value for a correlation r with the given residual degrees of freedom.
inline double correlation_t_pvalue(double r, double df) {
    if (df <= 0.0) return 1.0;
    const double r2 = r * r;
    if (r2 >= 1.0) return 0.0;
    const double t = std::abs(r) * std::sqrt(df / (1.0 - r2));
    const boost::math::students_t_distribution<double> dist(df);
    double p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    return std::min(1.0, std::max(0.0, p));
}

inline double digamma(double x) { return boost::math::digamma(x); }

// Least-squares residualization of y on [1 | Z], optionally row-weighted.
// Z columns are the conditioning variables; empty Z returns y centered on its mean
// (weighted mean when weights given). Throws on a rank-deficient design.
inline std::vector<double> ols_residuals(const std::vector<double>& y,
                                         const std::vector<std::vector<double>>& z,
                                         const std::vector<double>* sqrt_weights = nullptr) {
    const std::size_t n = y.size();
    const std::size_t m = z.size();
    auto w = [&](std::size_t i) { return sqrt_weights ? (*sqrt_weights)[i] : 1.0; };
    if (m == 0) {
        double sw = 0.0, swy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double wi = w(i) * w(i);
            sw += wi;
            swy += wi * y[i];
        }
        const double mu = swy / sw;
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = w(i) * (y[i] - mu);
        return r;
    }
    Eigen::MatrixXd X(n, m + 1);
    Eigen::VectorXd Y(n);
    for (std::size_t i = 0; i < n; ++i) {
        X(i, 0) = w(i);
        for (std::size_t c = 0; c < m; ++c) X(i, c + 1) = w(i) * z[c][i];
        Y(i) = w(i) * y[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(m + 1)) {
        throw DataError("degenerate conditioning set: collinear regression design");
    }
    const Eigen::VectorXd beta = qr.solve(Y);
    const Eigen::VectorXd resid = Y - X * beta;
    return std::vector<double>(resid.data(), resid.data() + n);
}

// Empirical quantile with linear interpolation between order statistics
// (the "type 7" definition used by most numeric libraries).
inline double quantile_type7(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile_type7: empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Doubly-centered pairwise-distance workspace for distance correlation.
// Matrices are float: the permutation loop is bandwidth-bound and the statistic
// comparison only needs ~6 significant digits.
class DistanceCorrelation {
public:
    DistanceCorrelation(const std::vector<double>& x, const std::vector<double>& y)
        : n_(x.size()), ax_(center(x)), ay_(center(y)) {
        double sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < n_ * n_; ++i) {
            sxx += static_cast<double>(ax_[i]) * ax_[i];
            syy += static_cast<double>(ay_[i]) * ay_[i];
        }
        dvar_x_ = sxx / static_cast<double>(n_ * n_);
        dvar_y_ = syy / static_cast<double>(n_ * n_);
    }

    std::size_t size() const { return n_; }

    // dCor(x, y permuted by p); identity permutation gives the observed statistic.
    double statistic(const std::vector<std::size_t>& perm) const {
        double s = 0.0;
        const float* ax = ax_.data();
        for (std::size_t i = 0; i < n_; ++i) {
            const float* ay_row = ay_.data() + perm[i] * n_;
            const float* ax_row = ax + i * n_;
            double acc = 0.0;
            for (std::size_t j = 0; j < n_; ++j) acc += static_cast<double>(ax_row[j]) * ay_row[perm[j]];
            s += acc;
        }
        const double dcov2 = s / static_cast<double>(n_ * n_);
        const double denom = std::sqrt(dvar_x_ * dvar_y_);
        if (denom <= 0.0) return 0.0;
        return std::sqrt(std::max(0.0, dcov2 / denom));
    }

private:
    std::vector<float> center(const std::vector<double>& v) const {
        const std::size_t n = v.size();
        std::vector<double> d(n * n);
        std::vector<double> rowmean(n, 0.0);
        double grand = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double dist = std::abs(v[i] - v[j]);
                d[i * n + j] = dist;
                rowmean[i] += dist;
            }
            grand += rowmean[i];
            rowmean[i] /= static_cast<double>(n);
        }
        grand /= static_cast<double>(n * n);
        std::vector<float> out(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                out[i * n + j] = static_cast<float>(d[i * n + j] - rowmean[i] - rowmean[j] + grand);
            }
        }
        return out;
    }

    std::size_t n_;
    std::vector<float> ax_, ay_;
    double dvar_x_ = 0.0, dvar_y_ = 0.0;
};

}  // namespace tscausal
