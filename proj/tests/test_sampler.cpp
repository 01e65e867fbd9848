#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "tscausal/sampler.hpp"
#include "helpers.hpp"

using namespace tscausal;

namespace {

MeltingCycle cycle_with(int id, double prod_s, double energy, double weight) {
    MeltingCycle c;
    c.id = id;
    c.stats.production_time_s = prod_s;
    c.stats.energy_kwh = energy;
    c.stats.weight_tonne = weight;
    c.stats.specific_energy_kwh_per_tonne = energy / weight;
    return c;
}

// Independent linear-interpolation quantile on a sorted copy.
double quantile_oracle(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<MeltingCycle> tight_cluster(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<MeltingCycle> cycles;
    for (int i = 0; i < n; ++i) {
        const double prod = rng.uniform(2900.0, 3100.0);
        const double energy = rng.uniform(4000.0, 4400.0);
        cycles.push_back(cycle_with(i, prod, energy, 10.0));
    }
    return cycles;
}

}  // namespace

TEST_CASE("remove_outlier_cycles fences exactly match a sort-based quartile oracle") {
    auto cycles = tight_cluster(99, 31);
    cycles.push_back(cycle_with(99, 30000.0, 4200.0, 10.0));  // 10x the typical duration

    SamplerConfig cfg;
    const auto [kept, removed] = remove_outlier_cycles(cycles, cfg);
    REQUIRE(removed.size() == 1);
    REQUIRE(removed[0].cycle_id == 99);
    REQUIRE(removed[0].feature == std::string("production_time_s"));
    REQUIRE(removed[0].value == 30000.0);
    REQUIRE(kept.size() == 99);

    // full behavioral check against the oracle, feature by feature
    for (std::size_t f = 0; f < 3; ++f) {
        std::vector<double> v;
        for (const auto& c : cycles) v.push_back(cycle_feature(c, f));
        const double q1 = quantile_oracle(v, 0.25);
        const double q3 = quantile_oracle(v, 0.75);
        const double lo = q1 - cfg.iqr_multiplier * (q3 - q1);
        const double hi = q3 + cfg.iqr_multiplier * (q3 - q1);
        for (const auto& c : kept) {
            const double x = cycle_feature(c, f);
            REQUIRE(x >= lo);
            REQUIRE(x <= hi);
        }
    }
}

TEST_CASE("remove_outlier_cycles keeps identical cycles and respects an unbounded fence") {
    std::vector<MeltingCycle> cycles(10, cycle_with(0, 3000.0, 4200.0, 10.0));
    for (int i = 0; i < 10; ++i) cycles[static_cast<std::size_t>(i)].id = i;
    SamplerConfig cfg;
    auto [kept, removed] = remove_outlier_cycles(cycles, cfg);
    REQUIRE(removed.empty());
    REQUIRE(kept.size() == 10);

    auto wild = tight_cluster(20, 5);
    wild.push_back(cycle_with(20, 90000.0, 90000.0, 10.0));
    cfg.iqr_multiplier = 1e12;
    std::tie(kept, removed) = remove_outlier_cycles(wild, cfg);
    REQUIRE(removed.empty());
    REQUIRE(kept.size() == wild.size());
}

TEST_CASE("remove_outlier_cycles is independent of input ordering") {
    auto cycles = tight_cluster(40, 8);
    cycles.push_back(cycle_with(40, 30000.0, 4200.0, 10.0));
    SamplerConfig cfg;
    const auto [kept_a, removed_a] = remove_outlier_cycles(cycles, cfg);

    Rng rng(77);
    auto shuffled = cycles;
    rng.shuffle(shuffled);
    const auto [kept_b, removed_b] = remove_outlier_cycles(shuffled, cfg);

    auto ids = [](const std::vector<MeltingCycle>& v) {
        std::set<int> s;
        for (const auto& c : v) s.insert(c.id);
        return s;
    };
    REQUIRE(ids(kept_a) == ids(kept_b));
    REQUIRE(removed_a.size() == removed_b.size());
}

TEST_CASE("remove_outlier_cycles needs at least 4 cycles") {
    const std::vector<MeltingCycle> three = {cycle_with(0, 1, 1, 1), cycle_with(1, 2, 2, 1), cycle_with(2, 3, 3, 1)};
    REQUIRE_THROWS_AS(remove_outlier_cycles(three, SamplerConfig{}), DataError);
}

TEST_CASE("emd_1d on hand-checked samples") {
    REQUIRE(emd_1d({0.5, 1.5, 2.5}, {0.5, 1.5, 2.5}) == 0.0);
    REQUIRE(emd_1d({0.0}, {1.0}) == 1.0);                     // point masses one unit apart
    REQUIRE(emd_1d({0.0, 1.0}, {0.0, 3.0}) == 1.0);           // coupling (0-0, 1-3)/2
    REQUIRE(emd_1d({0.0}, {1.0, 3.0}) == 2.0);                // split mass: 0.5*1 + 0.5*3
    REQUIRE_THROWS_AS(emd_1d({}, {1.0}), DataError);
}

TEST_CASE("emd_1d equals the sorted-coupling oracle for equal sample sizes") {
    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(30);
        std::vector<double> a(n), b(n);
        for (auto& v : a) v = rng.uniform(-5.0, 5.0);
        for (auto& v : b) v = rng.uniform(-5.0, 5.0);
        auto sa = a, sb = b;
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        double oracle = 0.0;
        for (std::size_t i = 0; i < n; ++i) oracle += std::abs(sa[i] - sb[i]);
        oracle /= static_cast<double>(n);
        REQUIRE_THAT(emd_1d(a, b), Catch::Matchers::WithinAbs(oracle, 1e-12));
    }
}

TEST_CASE("emd_1d behaves as a metric and respects translation") {
    Rng rng(321);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(1 + rng.below(8)), b(1 + rng.below(8)), c(1 + rng.below(8));
        for (auto& v : a) v = rng.uniform(-2.0, 2.0);
        for (auto& v : b) v = rng.uniform(-2.0, 2.0);
        for (auto& v : c) v = rng.uniform(-2.0, 2.0);
        const double ab = emd_1d(a, b), ba = emd_1d(b, a);
        REQUIRE_THAT(ab, Catch::Matchers::WithinAbs(ba, 1e-12));
        REQUIRE(ab >= 0.0);
        REQUIRE(emd_1d(a, a) == 0.0);
        REQUIRE(ab <= emd_1d(a, c) + emd_1d(c, b) + 1e-12);
    }
    std::vector<double> base = {0.0, 0.7, 1.9, 3.2};
    auto shifted = base;
    for (auto& v : shifted) v += 2.5;
    REQUIRE_THAT(emd_1d(base, shifted), Catch::Matchers::WithinAbs(2.5, 1e-12));
}

TEST_CASE("mmd_squared on hand-checked samples") {
    const std::vector<std::vector<double>> a = {{0.0}}, b = {{1.0}};
    // k(a,a) + k(b,b) - 2 k(a,b) with unit bandwidth: 2 - 2 exp(-1/2)
    REQUIRE_THAT(mmd_squared(a, b, 1.0), Catch::Matchers::WithinAbs(2.0 - 2.0 * std::exp(-0.5), 1e-14));

    const std::vector<std::vector<double>> s = {{0.3, -1.0}, {2.0, 0.5}, {-0.7, 0.1}};
    REQUIRE(mmd_squared(s, s) == 0.0);  // identical samples cancel exactly
}

TEST_CASE("mmd_squared is symmetric and never meaningfully negative") {
    Rng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t na = 2 + rng.below(10), nb = 2 + rng.below(10);
        std::vector<std::vector<double>> a(na, std::vector<double>(3)), b(nb, std::vector<double>(3));
        for (auto& r : a) {
            for (auto& v : r) v = rng.normal();
        }
        for (auto& r : b) {
            for (auto& v : r) v = rng.normal();
        }
        const double ab = mmd_squared(a, b), ba = mmd_squared(b, a);
        REQUIRE_THAT(ab, Catch::Matchers::WithinAbs(ba, 1e-12));
        REQUIRE(ab >= -1e-12);
    }
}

TEST_CASE("mmd_squared shrinks on average as same-distribution samples grow") {
    Rng rng(99);
    auto draw = [&](std::size_t n) {
        std::vector<std::vector<double>> s(n, std::vector<double>(2));
        for (auto& r : s) {
            for (auto& v : r) v = rng.normal();
        }
        return s;
    };
    double small_avg = 0.0, large_avg = 0.0;
    for (int rep = 0; rep < 8; ++rep) {
        small_avg += mmd_squared(draw(20), draw(20), 1.0);
        large_avg += mmd_squared(draw(200), draw(200), 1.0);
    }
    REQUIRE(large_avg < small_avg);
}

TEST_CASE("mmd_squared validates its inputs") {
    const std::vector<std::vector<double>> a = {{0.0, 1.0}}, b = {{1.0}};
    REQUIRE_THROWS_AS(mmd_squared(a, b), DataError);
    REQUIRE_THROWS_AS(mmd_squared({}, b), DataError);
    REQUIRE_THROWS_AS(mmd_squared(b, b, -1.0), ConfigError);
}

TEST_CASE("a full-fraction draw reproduces the cluster with zero discrepancy") {
    auto cycles = tight_cluster(25, 2);
    SamplerConfig cfg;
    cfg.fraction = 1.0;
    cfg.seed = 11;
    const auto [sel, rep] = sample_and_validate(cycles, cfg);
    REQUIRE(sel.size() == cycles.size());
    for (std::size_t i = 0; i < sel.size(); ++i) REQUIRE(sel[i].id == cycles[i].id);
    REQUIRE(rep.pass);
    REQUIRE(rep.retries_used == 0);
    for (double e : rep.emd) REQUIRE(e == 0.0);
    REQUIRE(rep.mmd == 0.0);
}

TEST_CASE("homogeneous clusters pass validation under default thresholds") {
    int passes = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto cycles = tight_cluster(400, 1000 + seed);
        SamplerConfig cfg;
        cfg.fraction = 0.05;  // 20 of 400
        cfg.seed = seed;
        const auto [sel, rep] = sample_and_validate(cycles, cfg);
        REQUIRE(sel.size() == 20);
        passes += rep.pass ? 1 : 0;
    }
    REQUIRE(passes >= 18);
}

TEST_CASE("a two-mode cluster cannot be represented by one cycle") {
    std::vector<MeltingCycle> cycles;
    for (int i = 0; i < 10; ++i) {
        // two well-separated modes in every feature
        const double base = i < 5 ? 1000.0 : 9000.0;
        cycles.push_back(cycle_with(i, base + i, base * 2 + i, 10.0 + (i < 5 ? 0.0 : 30.0)));
    }
    SamplerConfig cfg;
    cfg.fraction = 0.1;  // selects exactly 1 cycle
    cfg.seed = 3;

    // oracle: enumerate all one-cycle subsets; none can satisfy the thresholds
    std::vector<double> mu(4), sd(4);
    for (std::size_t f = 0; f < 4; ++f) {
        std::vector<double> v;
        for (const auto& c : cycles) v.push_back(cycle_feature(c, f));
        mu[f] = mean_of(v);
        sd[f] = stddev_of(v);
    }
    for (const auto& c : cycles) {
        double worst = 0.0;
        for (std::size_t f = 0; f < 4; ++f) {
            std::vector<double> full;
            for (const auto& cc : cycles) full.push_back((cycle_feature(cc, f) - mu[f]) / sd[f]);
            const std::vector<double> one = {(cycle_feature(c, f) - mu[f]) / sd[f]};
            worst = std::max(worst, emd_1d(one, full));
        }
        REQUIRE(worst > cfg.emd_threshold);
    }

    const auto [sel, rep] = sample_and_validate(cycles, cfg);
    REQUIRE(sel.size() == 1);
    REQUIRE_FALSE(rep.pass);
    REQUIRE(rep.retries_used == cfg.max_retries);
}

TEST_CASE("sample_and_validate is deterministic including the retry path") {
    auto cycles = tight_cluster(60, 4);
    SamplerConfig cfg;
    cfg.fraction = 0.1;
    cfg.seed = 21;
    const auto [sel_a, rep_a] = sample_and_validate(cycles, cfg);
    const auto [sel_b, rep_b] = sample_and_validate(cycles, cfg);
    REQUIRE(sel_a.size() == sel_b.size());
    for (std::size_t i = 0; i < sel_a.size(); ++i) REQUIRE(sel_a[i].id == sel_b[i].id);
    REQUIRE(rep_a.pass == rep_b.pass);
    REQUIRE(rep_a.retries_used == rep_b.retries_used);
    REQUIRE(rep_a.emd == rep_b.emd);
    REQUIRE(rep_a.mmd == rep_b.mmd);

    REQUIRE_THROWS_AS(sample_and_validate({}, cfg), DataError);
}

TEST_CASE("constant features z-score to zero and cannot fail validation") {
    auto cycles = tight_cluster(40, 6);
    for (auto& c : cycles) c.stats.weight_tonne = 10.0;  // exactly constant
    SamplerConfig cfg;
    cfg.fraction = 0.25;
    cfg.seed = 1;
    const auto [sel, rep] = sample_and_validate(cycles, cfg);
    (void)sel;
    REQUIRE(rep.feature_names.back() == std::string("weight_tonne"));
    REQUIRE(rep.emd.back() == 0.0);
}

TEST_CASE("concatenate appends cycles in order and records junctions") {
    const std::size_t T = 60;
    Rng rng(14);
    auto ds = testutil::make_dataset({testutil::noise(rng, T), testutil::noise(rng, T)});
    ds.timestamps.resize(T);
    for (std::size_t t = 0; t < T; ++t) ds.timestamps[t] = static_cast<std::int64_t>(t * 10);

    MeltingCycle a, b, c;
    a.id = 0, a.start_row = 0, a.end_row = 10;
    b.id = 1, b.start_row = 10, b.end_row = 30;
    c.id = 2, c.start_row = 30, c.end_row = 60;
    b.cluster = 3;

    const auto seq = concatenate({a, b, c}, ds);
    REQUIRE(seq.data.rows() == 60);
    REQUIRE(seq.boundary_rows == std::vector<std::size_t>{10, 30});
    REQUIRE(seq.provenance ==
            std::vector<std::pair<int, int>>{{-1, 0}, {3, 1}, {-1, 2}});
    REQUIRE(seq.data.timestamps.empty());  // concatenation manufactures a new time axis
    for (std::size_t t = 0; t < 60; ++t) REQUIRE(seq.data.values[0][t] == ds.values[0][t]);

    const auto single = concatenate({b}, ds);
    REQUIRE(single.boundary_rows.empty());
    REQUIRE(single.data.rows() == 20);

    // permuting the order moves junctions but preserves the data multiset
    const auto perm = concatenate({c, a, b}, ds);
    REQUIRE(perm.boundary_rows == std::vector<std::size_t>{30, 40});
    auto sorted_vals = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    REQUIRE(sorted_vals(perm.data.values[1]) == sorted_vals(seq.data.values[1]));

    MeltingCycle bad;
    bad.start_row = 50, bad.end_row = 70;
    REQUIRE_THROWS_AS(concatenate({bad}, ds), DataError);
    REQUIRE_THROWS_AS(concatenate({}, ds), DataError);
}
