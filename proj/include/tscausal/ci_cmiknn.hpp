#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ci.hpp"
#include "common.hpp"
#include "stats.hpp"

namespace tscausal {
namespace detail {

// Nearest-neighbor conditional mutual information workspace. All pairwise
// max-norm distances are cached as float matrices so each permutation costs
// two passes over the matrix rows instead of rebuilding geometry:
// I(x;y|z) = psi(k) + <psi(n_z+1) - psi(n_xz+1) - psi(n_yz+1)> with strict-<
// neighborhood counts at the kth joint-neighbor radius. A permutation
// rearranges only the y factor, so d_joint(i,j) = max(d_xz(i,j),
// d_y(perm(i), perm(j))).
class CmiKnnEstimator {
public:
    CmiKnnEstimator(const std::vector<double>& x, const std::vector<double>& y,
                    const std::vector<std::vector<double>>& z, int k, int shuffle_neighbors, Rng& jitter_rng)
        : n_(x.size()), k_(k), has_z_(!z.empty()) {
        const auto jittered = [&](const std::vector<double>& v) {
            const double sd = stddev_of(v);
            const double amp = 1e-8 * (sd > 0.0 ? sd : 1.0);  // breaks duplicate points only
            std::vector<double> out(n_);
            for (std::size_t i = 0; i < n_; ++i) out[i] = v[i] + amp * jitter_rng.normal();
            return out;
        };
        const auto jx = jittered(x);
        const auto jy = jittered(y);
        std::vector<std::vector<double>> jz;
        jz.reserve(z.size());
        for (const auto& col : z) jz.push_back(jittered(col));

        dxz_.resize(n_ * n_);
        dy_.resize(n_ * n_);
        if (has_z_) dz_.resize(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                double zdist = 0.0;
                for (const auto& col : jz) zdist = std::max(zdist, std::abs(col[i] - col[j]));
                if (has_z_) dz_[i * n_ + j] = static_cast<float>(zdist);
                dxz_[i * n_ + j] = static_cast<float>(std::max(std::abs(jx[i] - jx[j]), zdist));
                dy_[i * n_ + j] = static_cast<float>(std::abs(jy[i] - jy[j]));
            }
        }
        sorted_dxz_ = dxz_;
        for (std::size_t i = 0; i < n_; ++i) {
            std::sort(sorted_dxz_.begin() + static_cast<std::ptrdiff_t>(i * n_),
                      sorted_dxz_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_));
        }
        if (has_z_) {
            sorted_dz_ = dz_;
            for (std::size_t i = 0; i < n_; ++i) {
                std::sort(sorted_dz_.begin() + static_cast<std::ptrdiff_t>(i * n_),
                          sorted_dz_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_));
            }
            // Local-permutation pools: each row's nearest points in z, self included.
            const auto pool = std::min<std::size_t>(static_cast<std::size_t>(shuffle_neighbors), n_);
            z_neighbors_.assign(n_, {});
            std::vector<std::size_t> idx(n_);
            for (std::size_t i = 0; i < n_; ++i) {
                for (std::size_t j = 0; j < n_; ++j) idx[j] = j;
                std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(pool - 1), idx.end(),
                                 [&](std::size_t a, std::size_t b) {
                                     const float da = dz_[i * n_ + a], db = dz_[i * n_ + b];
                                     if (da != db) return da < db;
                                     return a < b;
                                 });
                z_neighbors_[i].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(pool));
            }
        }
        psi_.resize(n_ + 2);
        psi_[0] = 0.0;
        for (std::size_t i = 1; i < psi_.size(); ++i) psi_[i] = digamma(static_cast<double>(i));
        scratch_.resize(n_);
    }

    std::size_t size() const { return n_; }

    // Raw (unclamped) estimate for y rearranged by perm; identity = observed.
    double statistic(const std::vector<std::size_t>& perm) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const float* dxz_row = dxz_.data() + i * n_;
            const float* dy_row = dy_.data() + perm[i] * n_;
            std::size_t m = 0;
            for (std::size_t j = 0; j < n_; ++j) {
                if (j == i) continue;
                scratch_[m++] = std::max(dxz_row[j], dy_row[perm[j]]);
            }
            std::nth_element(scratch_.begin(), scratch_.begin() + (k_ - 1), scratch_.begin() + static_cast<std::ptrdiff_t>(m));
            const float eps = scratch_[static_cast<std::size_t>(k_ - 1)];

            const std::size_t n_xz = count_below(sorted_dxz_, i, eps) - 1;  // self distance 0 always counts
            std::size_t n_z, n_yz = 0;
            if (has_z_) {
                n_z = count_below(sorted_dz_, i, eps) - 1;
                const float* dz_row = dz_.data() + i * n_;
                for (std::size_t j = 0; j < n_; ++j) {
                    if (j != i && std::max(dz_row[j], dy_row[perm[j]]) < eps) ++n_yz;
                }
            } else {
                n_z = n_ - 1;
                for (std::size_t j = 0; j < n_; ++j) {
                    if (j != i && dy_row[perm[j]] < eps) ++n_yz;
                }
            }
            acc += psi_[n_z + 1] - psi_[n_xz + 1] - psi_[n_yz + 1];
        }
        return psi_[static_cast<std::size_t>(k_)] + acc / static_cast<double>(n_);
    }

    // Permutation restricted to z-neighborhoods: each row receives the y value
    // of a not-yet-used z-neighbor, falling back to any unused row. Without z
    // this is a plain uniform shuffle.
    std::vector<std::size_t> local_permutation(Rng& rng) const {
        auto perm = identity_permutation(n_);
        if (!has_z_) {
            rng.shuffle(perm);
            return perm;
        }
        auto order = identity_permutation(n_);
        rng.shuffle(order);
        std::vector<std::uint8_t> used(n_, 0);
        std::vector<std::size_t> pool;
        for (std::size_t i : order) {
            pool = z_neighbors_[i];
            rng.shuffle(pool);
            std::size_t chosen = n_;
            for (std::size_t cand : pool) {
                if (!used[cand]) {
                    chosen = cand;
                    break;
                }
            }
            if (chosen == n_) {
                const std::size_t start = rng.below(n_);
                for (std::size_t t = 0; t < n_; ++t) {
                    const std::size_t cand = (start + t) % n_;
                    if (!used[cand]) {
                        chosen = cand;
                        break;
                    }
                }
            }
            perm[i] = chosen;
            used[chosen] = 1;
        }
        return perm;
    }

private:
    std::size_t count_below(const std::vector<float>& sorted_rows, std::size_t row, float eps) const {
        const auto begin = sorted_rows.begin() + static_cast<std::ptrdiff_t>(row * n_);
        return static_cast<std::size_t>(std::lower_bound(begin, begin + static_cast<std::ptrdiff_t>(n_), eps) - begin);
    }

    std::size_t n_;
    int k_;
    bool has_z_;
    std::vector<float> dxz_, dy_, dz_;
    std::vector<float> sorted_dxz_, sorted_dz_;
    std::vector<std::vector<std::size_t>> z_neighbors_;
    std::vector<double> psi_;
    std::vector<float> scratch_;
};

}  // namespace detail

// KSG-style conditional mutual information with a local permutation test.
// Roles are canonicalized before jitter and permutation so cmi_knn(x, y) and
// cmi_knn(y, x) are identical. The reported statistic is clamped at 0; the
// permutation comparison uses the raw estimate.
inline CITestResult cmi_knn(const CIQuery& q_in, const CITestOptions& opts = {}) {
    std::size_t n = detail::checked_query_size(q_in, opts);
    const auto cap = static_cast<std::size_t>(opts.cmi_max_samples);
    const bool capped = cap > 0 && n > cap;
    CIQuery capped_query;
    if (capped) {
        capped_query = detail::subsample_query(q_in, cap);
        n = cap;
    }
    const CIQuery& q = capped ? capped_query : q_in;
    const int k = opts.knn_k > 0
                      ? opts.knn_k
                      : std::max(10, std::min(static_cast<int>(n) / 10, 60));
    if (k < 1) throw ConfigError("cmi_knn: k must be >= 1");
    if (static_cast<std::size_t>(k) >= n) {
        throw InsufficientSamplesError("cmi_knn: k=" + std::to_string(k) + " needs more than k samples, have " +
                                       std::to_string(n));
    }
    const bool swapped = detail::swap_for_canonical_roles(q.x, q.y);
    const auto& a = swapped ? q.y : q.x;
    const auto& b = swapped ? q.x : q.y;

    Rng jitter_rng(stable_mix(opts.seed, 0x6A697474u));
    detail::CmiKnnEstimator est(a, b, q.z, k, opts.shuffle_neighbors, jitter_rng);
    const double raw = est.statistic(identity_permutation(n));

    CITestResult res;
    res.test_name = CITestName::CMIknn;
    res.n_effective = static_cast<int>(n);
    res.statistic = std::max(0.0, raw);

    const int B = opts.cmi_permutations;
    const int guard = static_cast<int>(std::ceil(opts.alpha_guard * static_cast<double>(B + 1)));
    Rng rng(stable_mix(opts.seed, 0x636D69u));
    int hits = 0, done = 0;
    for (int iter = 0; iter < B; ++iter) {
        const auto perm = est.local_permutation(rng);
        ++done;
        if (est.statistic(perm) >= raw) {
            if (++hits >= guard) break;  // p > alpha_guard is already certain
        }
    }
    res.p_value = static_cast<double>(1 + hits) / static_cast<double>(done + 1);
    return res;
}

}  // namespace tscausal
