#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "common.hpp"

namespace tscausal {

// Collects output in memory and renames a temp file over the target on
// commit, so readers never observe a partially written file.
class AtomicFile {
public:
    explicit AtomicFile(std::filesystem::path path) : path_(std::move(path)) {}
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;

    std::ostream& stream() { return buf_; }

    void commit() {
        const auto parent = path_.parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        const auto tmp = path_.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw DataError("cannot write file: " + tmp);
            out << buf_.str();
            if (!out) throw DataError("write failed: " + tmp);
        }
        std::filesystem::rename(tmp, path_);
    }

private:
    std::filesystem::path path_;
    std::ostringstream buf_;
};

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    AtomicFile f(path);
    f.stream() << content;
    f.commit();
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace tscausal
