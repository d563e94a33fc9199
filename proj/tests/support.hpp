#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "morphkit/cli.hpp"
#include "morphkit/configdb.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// 20,000-record dataset, seed 1; built once per process.
inline const morphkit::ConfigDatabase& shared_db() {
    static const morphkit::ConfigDatabase db = morphkit::generate_dataset(20000, 1, morphkit::MaterialParams{});
    return db;
}

inline const morphkit::ConfigDatabase& small_db() {
    static const morphkit::ConfigDatabase db = morphkit::generate_dataset(200, 7, morphkit::MaterialParams{});
    return db;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    ScratchDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("morphkit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

inline CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "morphkit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliResult r;
    r.code = morphkit::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

/// Dataset file written once per process (for CLI tests).
inline const fs::path& shared_dataset_file() {
    static const ScratchDir dir;
    static const fs::path p = [] {
        const fs::path f = dir / "dataset.csv";
        std::ofstream out(f);
        morphkit::write_dataset(out, shared_db());
        return f;
    }();
    return p;
}

}  // namespace testing_support
