#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "io.hpp"
#include "stats.hpp"

namespace tscausal {

enum class VariableRole { process, energy, auxiliary };

inline const char* to_string(VariableRole r) {
    switch (r) {
        case VariableRole::process: return "process";
        case VariableRole::energy: return "energy";
        case VariableRole::auxiliary: return "auxiliary";
    }
    return "auxiliary";
}

inline VariableRole variable_role_from_string(const std::string& s) {
    if (s == "process") return VariableRole::process;
    if (s == "energy") return VariableRole::energy;
    if (s == "auxiliary") return VariableRole::auxiliary;
    throw ConfigError("unknown variable role: " + s);
}

struct VariableMeta {
    int index = 0;  // 1-based id, stable across variable drops
    std::string name;
    std::string unit;
    VariableRole role = VariableRole::auxiliary;
};

// T x N multivariate series. Missing cells are NaN in `values` with mask 0;
// mask 1 means observed. Immutable by convention once built: every pipeline
// stage returns a new dataset.
struct TimeSeriesDataset {
    std::vector<VariableMeta> variables;
    std::vector<std::vector<double>> values;       // [variable][row]
    std::vector<std::vector<std::uint8_t>> mask;   // [variable][row]
    double sample_interval_s = 10.0;
    std::vector<std::int64_t> timestamps;          // optional; empty = row index * interval

    std::size_t rows() const { return values.empty() ? 0 : values.front().size(); }
    std::size_t cols() const { return variables.size(); }

    double time_at(std::size_t row) const {
        if (!timestamps.empty()) return static_cast<double>(timestamps[row]);
        return static_cast<double>(row) * sample_interval_s;
    }

    int find_variable(const std::string& name) const {
        for (std::size_t i = 0; i < variables.size(); ++i) {
            if (variables[i].name == name) return static_cast<int>(i);
        }
        return -1;
    }

    int column_of_index(int index) const {
        for (std::size_t i = 0; i < variables.size(); ++i) {
            if (variables[i].index == index) return static_cast<int>(i);
        }
        return -1;
    }

    void check() const {
        if (values.size() != variables.size() || mask.size() != variables.size()) {
            throw DataError("dataset: values/mask/variable counts differ");
        }
        const std::size_t t = rows();
        for (std::size_t c = 0; c < values.size(); ++c) {
            if (values[c].size() != t || mask[c].size() != t) {
                throw DataError("dataset: ragged columns");
            }
        }
        if (sample_interval_s <= 0.0) throw DataError("dataset: sample_interval_s must be positive");
        for (std::size_t i = 0; i < variables.size(); ++i) {
            if (variables[i].name.empty()) throw DataError("dataset: variable with empty name");
            for (std::size_t j = i + 1; j < variables.size(); ++j) {
                if (variables[i].index == variables[j].index) {
                    throw DataError("dataset: duplicate variable index " + std::to_string(variables[i].index));
                }
            }
        }
    }
};

struct DroppedVariable {
    std::string name;
    int index = 0;
    std::string reason;  // "missing-fraction" or "zero-variance"
    double detail = 0.0; // the offending fraction, or 0 for zero variance
};

struct StandardizationReport {
    struct PerVariable {
        std::string name;
        int index = 0;
        double mean = 0.0;
        double stddev = 1.0;
        std::size_t observed = 0;
    };
    std::vector<PerVariable> scaling;
    std::vector<DroppedVariable> variables_dropped;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["scaling"] = nlohmann::ordered_json::array();
        for (const auto& s : scaling) {
            j["scaling"].push_back({{"index", s.index},
                                    {"name", s.name},
                                    {"mean", s.mean},
                                    {"stddev", s.stddev},
                                    {"observed", s.observed}});
        }
        j["variables_dropped"] = nlohmann::ordered_json::array();
        for (const auto& d : variables_dropped) {
            j["variables_dropped"].push_back({{"index", d.index},
                                              {"name", d.name},
                                              {"reason", d.reason},
                                              {"detail", d.detail}});
        }
        return j;
    }
};

// The 12-variable induction-furnace channel list this toolkit is organized
// around. Indices are stable ids: downstream reports identify causal pairs by
// these numbers, so they are never renumbered even after variables are dropped.
inline std::vector<VariableMeta> default_furnace_schema() {
    return {
        {1, "Weight", "kg", VariableRole::process},
        {2, "State", "bit", VariableRole::auxiliary},
        {3, "Temperature", "degC", VariableRole::process},
        {4, "Frequency", "Hz", VariableRole::process},
        {5, "Voltage", "V", VariableRole::process},
        {6, "Current", "A", VariableRole::process},
        {7, "Isolation resistance", "kOhm", VariableRole::auxiliary},
        {8, "Energy act", "kWh", VariableRole::energy},
        {9, "Energy specific", "kWh/tonne", VariableRole::energy},
        {10, "Power", "kW", VariableRole::energy},
        {11, "Cooling water temperature", "degC", VariableRole::auxiliary},
        {12, "Cooling water quantity", "L/min", VariableRole::auxiliary},
    };
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u + static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// Accepts "YYYY-MM-DD[T ]HH:MM:SS" (optional trailing Z) or plain integer seconds.
inline std::optional<std::int64_t> parse_timestamp(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    if (s.find_first_not_of("-0123456789") == std::string::npos) {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec == std::errc() && ptr == s.data() + s.size()) return v;
        return std::nullopt;
    }
    int y, mo, d, h, mi, se;
    char sep;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &se) == 7 &&
        (sep == 'T' || sep == ' ')) {
        return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
    }
    return std::nullopt;
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

// Loads a CSV whose header matches the schema names (an optional leading
// `timestamp` column is recognized). Empty or non-numeric cells become masked
// entries. Row order is preserved; a timestamp column must be non-decreasing.
inline TimeSeriesDataset load_csv(const std::string& path, const std::vector<VariableMeta>& schema,
                                  double sample_interval_s = 10.0) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
    auto header = detail::split_csv_line(line);
    for (auto& h : header) h = detail::trim(h);

    std::size_t first_var_col = 0;
    const bool has_timestamp = !header.empty() && header[0] == "timestamp";
    if (has_timestamp) first_var_col = 1;

    if (header.size() - first_var_col != schema.size()) {
        throw DataError("CSV header has " + std::to_string(header.size() - first_var_col) +
                        " variable columns, schema expects " + std::to_string(schema.size()));
    }
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (header[first_var_col + i] != schema[i].name) {
            throw DataError("CSV header mismatch at column " + std::to_string(first_var_col + i + 1) +
                            ": got '" + header[first_var_col + i] + "', schema expects '" + schema[i].name + "'");
        }
    }

    TimeSeriesDataset ds;
    ds.variables = schema;
    ds.sample_interval_s = sample_interval_s;
    ds.values.assign(schema.size(), {});
    ds.mask.assign(schema.size(), {});

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("CSV row " + std::to_string(row + 2) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(header.size()));
        }
        if (has_timestamp) {
            const auto ts = detail::parse_timestamp(cells[0]);
            if (!ts) throw DataError("CSV row " + std::to_string(row + 2) + ": unparsable timestamp '" + cells[0] + "'");
            if (!ds.timestamps.empty() && *ts < ds.timestamps.back()) {
                throw DataError("CSV row " + std::to_string(row + 2) + ": non-monotonic timestamp");
            }
            ds.timestamps.push_back(*ts);
        }
        for (std::size_t c = 0; c < schema.size(); ++c) {
            const auto v = detail::parse_double(cells[first_var_col + c]);
            ds.values[c].push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
            ds.mask[c].push_back(v ? 1 : 0);
        }
        ++row;
    }
    ds.check();
    return ds;
}

// Builds a schema from the CSV header alone (all roles auxiliary, indices 1..N).
inline std::vector<VariableMeta> schema_from_header(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
    auto header = detail::split_csv_line(line);
    std::vector<VariableMeta> schema;
    std::size_t start = (!header.empty() && detail::trim(header[0]) == "timestamp") ? 1 : 0;
    for (std::size_t i = start; i < header.size(); ++i) {
        schema.push_back({static_cast<int>(i - start + 1), detail::trim(header[i]), "", VariableRole::auxiliary});
    }
    return schema;
}

// Writes the dataset back out; masked cells become empty cells. Finite values
// use shortest round-trip formatting so load(write(ds)) is bit-identical.
inline void write_csv(const TimeSeriesDataset& ds, const std::string& path) {
    AtomicFile file(path);
    auto& out = file.stream();
    const bool has_timestamp = !ds.timestamps.empty();
    if (has_timestamp) out << "timestamp,";
    for (std::size_t c = 0; c < ds.variables.size(); ++c) {
        out << ds.variables[c].name << (c + 1 < ds.variables.size() ? "," : "\n");
    }
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (has_timestamp) out << ds.timestamps[r] << ",";
        for (std::size_t c = 0; c < ds.variables.size(); ++c) {
            if (ds.mask[c][r]) out << detail::format_double(ds.values[c][r]);
            out << (c + 1 < ds.variables.size() ? "," : "\n");
        }
    }
    file.commit();
}

// Removes variables whose missing fraction exceeds the threshold.
inline std::pair<TimeSeriesDataset, StandardizationReport>
drop_sparse_variables(const TimeSeriesDataset& ds, double max_missing_fraction = 0.99) {
    if (max_missing_fraction < 0.0 || max_missing_fraction > 1.0) {
        throw ConfigError("max_missing_fraction must lie in [0, 1]");
    }
    TimeSeriesDataset out;
    out.sample_interval_s = ds.sample_interval_s;
    out.timestamps = ds.timestamps;
    StandardizationReport report;
    const double t = static_cast<double>(ds.rows());
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        std::size_t missing = 0;
        for (auto m : ds.mask[c]) missing += (m == 0);
        const double frac = t > 0.0 ? static_cast<double>(missing) / t : 0.0;
        if (frac > max_missing_fraction) {
            report.variables_dropped.push_back({ds.variables[c].name, ds.variables[c].index, "missing-fraction", frac});
        } else {
            out.variables.push_back(ds.variables[c]);
            out.values.push_back(ds.values[c]);
            out.mask.push_back(ds.mask[c]);
        }
    }
    if (out.variables.empty()) {
        throw DataError("drop_sparse_variables: every variable exceeded the missing-fraction threshold");
    }
    return {std::move(out), std::move(report)};
}

// Z-scores every variable over its observed entries; zero-variance variables
// are dropped. The mask is preserved exactly.
inline std::pair<TimeSeriesDataset, StandardizationReport> standardize(const TimeSeriesDataset& ds) {
    TimeSeriesDataset out;
    out.sample_interval_s = ds.sample_interval_s;
    out.timestamps = ds.timestamps;
    StandardizationReport report;
    for (std::size_t c = 0; c < ds.cols(); ++c) {
        std::vector<double> observed;
        observed.reserve(ds.rows());
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            if (ds.mask[c][r]) observed.push_back(ds.values[c][r]);
        }
        if (observed.size() < 2) {
            throw DataError("standardize: variable '" + ds.variables[c].name + "' has fewer than 2 observed values");
        }
        const double mu = mean_of(observed);
        const double sd = stddev_of(observed);
        if (sd <= 0.0) {
            report.variables_dropped.push_back({ds.variables[c].name, ds.variables[c].index, "zero-variance", 0.0});
            continue;
        }
        std::vector<double> col(ds.rows(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            if (ds.mask[c][r]) col[r] = (ds.values[c][r] - mu) / sd;
        }
        out.variables.push_back(ds.variables[c]);
        out.values.push_back(std::move(col));
        out.mask.push_back(ds.mask[c]);
        report.scaling.push_back({ds.variables[c].name, ds.variables[c].index, mu, sd, observed.size()});
    }
    if (out.variables.empty()) throw DataError("standardize: every variable had zero variance");
    return {std::move(out), std::move(report)};
}

}  // namespace tscausal
