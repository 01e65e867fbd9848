#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "tscausal/stats.hpp"

using namespace tscausal;

TEST_CASE("mean, variance and stddev agree with direct formulas") {
    const std::vector<double> v{1.0, 2.0, 4.0, 8.0};
    REQUIRE(mean_of(v) == Catch::Approx(3.75));
    // sample variance with ddof=1: sum((x-m)^2)/3
    const double expected = ((1 - 3.75) * (1 - 3.75) + (2 - 3.75) * (2 - 3.75) + (4 - 3.75) * (4 - 3.75) +
                             (8 - 3.75) * (8 - 3.75)) /
                            3.0;
    REQUIRE(variance_of(v) == Catch::Approx(expected));
    REQUIRE(stddev_of(v) == Catch::Approx(std::sqrt(expected)));
}

TEST_CASE("pearson matches a hand computation and handles degenerate input") {
    const std::vector<double> a{1, 2, 3, 4, 5};
    const std::vector<double> b{2, 4, 6, 8, 10};
    REQUIRE(pearson(a, b) == Catch::Approx(1.0));
    const std::vector<double> c{5, 4, 3, 2, 1};
    REQUIRE(pearson(a, c) == Catch::Approx(-1.0));
    const std::vector<double> flat{3, 3, 3, 3, 3};
    REQUIRE(pearson(a, flat) == 0.0);

    // cross-check against the covariance formula on random data
    Rng rng(11);
    auto x = testutil::noise(rng, 200);
    auto y = testutil::noise(rng, 200);
    double sxy = 0, sxx = 0, syy = 0;
    const double mx = mean_of(x), my = mean_of(y);
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    REQUIRE(pearson(x, y) == Catch::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-12));
}

TEST_CASE("average ranks resolve ties by midpoint") {
    const std::vector<double> v{10.0, 20.0, 20.0, 5.0};
    const auto r = average_ranks(v);
    REQUIRE(r == std::vector<double>{2.0, 3.5, 3.5, 1.0});
}

TEST_CASE("normal scores are monotone and symmetric") {
    const std::vector<double> v{0.3, -1.0, 2.5, 0.9};
    const auto s = normal_scores(v);
    // order preserved
    REQUIRE(s[1] < s[0]);
    REQUIRE(s[0] < s[3]);
    REQUIRE(s[3] < s[2]);
    // rank k of n maps to phi^{-1}(k/(n+1))
    REQUIRE(s[1] == Catch::Approx(normal_quantile(1.0 / 5.0)));
    REQUIRE(s[2] == Catch::Approx(normal_quantile(4.0 / 5.0)));
    // symmetric ranks give opposite scores
    REQUIRE(s[1] == Catch::Approx(-s[2]));
}

TEST_CASE("quantile_type7 matches linear interpolation of order statistics") {
    std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    REQUIRE(quantile_type7(v, 0.0) == Catch::Approx(1.0));
    REQUIRE(quantile_type7(v, 1.0) == Catch::Approx(4.0));
    REQUIRE(quantile_type7(v, 0.5) == Catch::Approx(2.5));
    // h = (n-1)q = 0.75 -> between first and second order statistic
    REQUIRE(quantile_type7(v, 0.25) == Catch::Approx(1.75));
}

TEST_CASE("digamma agrees with known values") {
    // psi(1) = -euler_gamma, psi(2) = 1 - euler_gamma
    const double euler = 0.5772156649015329;
    REQUIRE(digamma(1.0) == Catch::Approx(-euler).epsilon(1e-12));
    REQUIRE(digamma(2.0) == Catch::Approx(1.0 - euler).epsilon(1e-12));
    REQUIRE(digamma(10.0) == Catch::Approx(2.2517525890667214).epsilon(1e-10));
}

TEST_CASE("ols_residuals are orthogonal to the design") {
    Rng rng(5);
    const std::size_t n = 300;
    auto z1 = testutil::noise(rng, n);
    auto z2 = testutil::noise(rng, n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 2.0 + 0.5 * z1[i] - 1.5 * z2[i] + rng.normal();

    const auto r = ols_residuals(y, {z1, z2});
    REQUIRE(std::abs(mean_of(r)) < 1e-10);
    double dz1 = 0, dz2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        dz1 += r[i] * z1[i];
        dz2 += r[i] * z2[i];
    }
    REQUIRE(std::abs(dz1) / n < 1e-10);
    REQUIRE(std::abs(dz2) / n < 1e-10);
}

TEST_CASE("ols_residuals with empty design removes only the mean") {
    const std::vector<double> y{1.0, 3.0, 5.0};
    const auto r = ols_residuals(y, {});
    REQUIRE(r[0] == Catch::Approx(-2.0));
    REQUIRE(r[1] == Catch::Approx(0.0));
    REQUIRE(r[2] == Catch::Approx(2.0));
}

TEST_CASE("ols_residuals rejects an exactly collinear design") {
    Rng rng(9);
    auto z1 = testutil::noise(rng, 50);
    std::vector<double> z2(z1.size());
    for (std::size_t i = 0; i < z1.size(); ++i) z2[i] = 2.0 * z1[i] - 1.0;
    auto y = testutil::noise(rng, 50);
    REQUIRE_THROWS_AS(ols_residuals(y, {z1, z2}), DataError);
}

TEST_CASE("weighted ols_residuals solve the reweighted normal equations") {
    Rng rng(6);
    const std::size_t n = 200;
    auto z = testutil::noise(rng, n);
    std::vector<double> y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = 1.0 + 2.0 * z[i] + rng.normal();
        w[i] = 0.5 + 0.01 * static_cast<double>(i % 7);
    }
    const auto r = ols_residuals(y, {z}, &w);
    // weighted residuals are orthogonal to the weighted design columns
    double d0 = 0, d1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        d0 += r[i] * w[i];
        d1 += r[i] * w[i] * z[i];
    }
    REQUIRE(std::abs(d0) / n < 1e-10);
    REQUIRE(std::abs(d1) / n < 1e-10);
}

TEST_CASE("correlation_t_pvalue matches the analytic two-sided t tail") {
    // r=0 -> p=1; |r|=1 -> p=0
    REQUIRE(correlation_t_pvalue(0.0, 30.0) == Catch::Approx(1.0));
    REQUIRE(correlation_t_pvalue(1.0, 30.0) == 0.0);
    // symmetric in the sign of r
    REQUIRE(correlation_t_pvalue(0.3, 40.0) == Catch::Approx(correlation_t_pvalue(-0.3, 40.0)));
    // monotone: stronger correlation, smaller p
    REQUIRE(correlation_t_pvalue(0.5, 40.0) < correlation_t_pvalue(0.2, 40.0));
    // df <= 0 degenerates to 1
    REQUIRE(correlation_t_pvalue(0.9, 0.0) == 1.0);
}

namespace {

// Direct double-centering distance correlation, the O(n^2) textbook formula.
double dcor_reference(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    auto centered = [&](const std::vector<double>& v) {
        std::vector<double> d(n * n);
        std::vector<double> row(n, 0.0);
        double grand = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                d[i * n + j] = std::abs(v[i] - v[j]);
                row[i] += d[i * n + j];
            }
            grand += row[i];
        }
        for (std::size_t i = 0; i < n; ++i) row[i] /= static_cast<double>(n);
        grand /= static_cast<double>(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                d[i * n + j] += grand - row[i] - row[j];
            }
        }
        return d;
    };
    const auto A = centered(x);
    const auto B = centered(y);
    double vxy = 0, vxx = 0, vyy = 0;
    for (std::size_t k = 0; k < n * n; ++k) {
        vxy += A[k] * B[k];
        vxx += A[k] * A[k];
        vyy += B[k] * B[k];
    }
    if (vxx <= 0.0 || vyy <= 0.0) return 0.0;
    return std::sqrt(vxy / std::sqrt(vxx * vyy));
}

}  // namespace

TEST_CASE("DistanceCorrelation matches the double-centering reference") {
    Rng rng(17);
    for (int rep = 0; rep < 5; ++rep) {
        const std::size_t n = 40 + static_cast<std::size_t>(rep) * 13;
        auto x = testutil::noise(rng, n);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = 0.4 * x[i] * x[i] + 0.6 * rng.normal();
        const DistanceCorrelation dc(x, y);
        const double got = dc.statistic(identity_permutation(n));
        REQUIRE(got == Catch::Approx(dcor_reference(x, y)).margin(1e-9));
    }
}

TEST_CASE("DistanceCorrelation permutation path equals reference on permuted y") {
    Rng rng(23);
    const std::size_t n = 60;
    auto x = testutil::noise(rng, n);
    auto y = testutil::noise(rng, n);
    const DistanceCorrelation dc(x, y);
    auto perm = identity_permutation(n);
    rng.shuffle(perm);
    std::vector<double> y_perm(n);
    for (std::size_t i = 0; i < n; ++i) y_perm[i] = y[perm[i]];
    REQUIRE(dc.statistic(perm) == Catch::Approx(dcor_reference(x, y_perm)).margin(1e-9));
}

TEST_CASE("distance correlation detects nonlinear dependence pearson misses") {
    Rng rng(31);
    const std::size_t n = 400;
    auto x = testutil::noise(rng, n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * x[i] + 0.1 * rng.normal();
    REQUIRE(std::abs(pearson(x, y)) < 0.2);
    const DistanceCorrelation dc(x, y);
    REQUIRE(dc.statistic(identity_permutation(n)) > 0.4);
}
