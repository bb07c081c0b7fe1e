#pragma once
// Shared helpers for the unit and acceptance tests.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ccvol/probmap.hpp"

namespace ccvol::testing {

namespace fs = std::filesystem;

inline ProbMap random_map(std::mt19937_64& gen, Dims dims, Spacing spacing = {}) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> v(dims.voxels());
    for (float& x : v) x = u(gen);
    return ProbMap(dims, spacing, std::move(v));
}

inline ProbMap constant_map(Dims dims, float value, Spacing spacing = {}) {
    return ProbMap(dims, spacing, std::vector<float>(dims.voxels(), value));
}

// Fresh, empty directory under the system temp dir.
inline fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ccvol_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs the ccvol CLI with `args` (already shell-quoted), capturing stdout/stderr.
inline CliResult run_cli(const std::string& args, const fs::path& scratch) {
    const fs::path out = scratch / "cli_stdout.txt";
    const fs::path err = scratch / "cli_stderr.txt";
    const std::string cmd = std::string("\"") + CCVOL_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
}

inline std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace ccvol::testing
