#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tscausal/common.hpp"
#include "tscausal/dataset.hpp"

namespace testutil {

// Gaussian i.i.d. column.
inline std::vector<double> noise(tscausal::Rng& rng, std::size_t n, double sd = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = sd * rng.normal();
    return v;
}

// AR(1) series with coefficient phi and unit innovations.
inline std::vector<double> ar1(tscausal::Rng& rng, std::size_t n, double phi) {
    std::vector<double> v(n);
    double prev = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        prev = phi * prev + rng.normal();
        v[t] = prev;
    }
    return v;
}

// Wraps plain columns as a fully observed dataset with ids 1..N.
inline tscausal::TimeSeriesDataset make_dataset(std::vector<std::vector<double>> cols,
                                                double interval_s = 10.0) {
    tscausal::TimeSeriesDataset ds;
    ds.sample_interval_s = interval_s;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        ds.variables.push_back({static_cast<int>(c) + 1, "X" + std::to_string(c + 1), "",
                                tscausal::VariableRole::process});
        ds.mask.emplace_back(cols[c].size(), std::uint8_t{1});
        ds.values.push_back(std::move(cols[c]));
    }
    ds.check();
    return ds;
}

// Unique scratch directory under the system temp root; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0;; ++i) {
            auto cand = base / (tag + "-" + std::to_string(i));
            std::error_code ec;
            if (std::filesystem::create_directories(cand, ec) && !ec) {
                path_ = cand;
                break;
            }
            if (i > 10000) throw std::runtime_error("cannot create temp dir for " + tag);
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace testutil
