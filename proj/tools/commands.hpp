#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ccvol::cli {

namespace fs = std::filesystem;

// Exit-code contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

struct FeaturizeOptions {
    std::vector<fs::path> input_dirs;  // maps with the same file name across dirs are averaged
    std::optional<fs::path> manifest;
    fs::path out_csv;
};

struct CalibrateOptions {
    fs::path records_csv;
    double alpha = 0.15;
    std::string method = "clustered";
    int k = 3;
    std::uint64_t seed = 0;
    fs::path out_model;
};

struct PredictOptions {
    std::optional<fs::path> records_csv;
    std::vector<fs::path> map_dirs;
    fs::path model;
    fs::path out_csv;
};

struct EvaluateOptions {
    fs::path intervals_csv;
    fs::path truth_csv;
    fs::path out_summary;                // JSON; a .txt twin is written next to it
    std::optional<fs::path> out_triage;  // default: <out_summary stem>.triage.csv
};

struct SimulateOptions {
    fs::path config_file;
    fs::path out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;  // key=value, applied after the file
};

// Each returns an exit code; ValidationError / IoError propagate to main.
int cmd_featurize(const FeaturizeOptions& o);
int cmd_calibrate(const CalibrateOptions& o);
int cmd_predict(const PredictOptions& o);
int cmd_evaluate(const EvaluateOptions& o);
int cmd_simulate(const SimulateOptions& o);

// Flat `key = value` text; '#' starts a comment. Throws ValidationError on a
// line without '=' or a repeated key.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source);

}  // namespace ccvol::cli
