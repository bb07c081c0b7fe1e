#pragma once
// File formats: NPY v1.0 probability maps with a `.spacing` sidecar, and the
// CSV tables exchanged between pipeline stages.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccvol/probmap.hpp"

namespace ccvol {

// ---- numbers ----

// Shortest decimal that parses back to the same double; "inf" for +infinity.
std::string format_real(double value);
// Inverse of format_real. Accepts "inf"; throws ValidationError otherwise.
double parse_real(std::string_view text);

// ---- NPY ----

// Reads a v1.x/v2.x NPY file holding little-endian float32, C-order, 3D.
ProbMap read_npy(const std::filesystem::path& path, Spacing spacing = {});
void write_npy(const std::filesystem::path& path, const ProbMap& map);

std::filesystem::path spacing_path_for(const std::filesystem::path& npy_path);
Spacing read_spacing(const std::filesystem::path& path);
void write_spacing(const std::filesystem::path& path, const Spacing& spacing);

struct LoadedMap {
    ProbMap map;
    bool spacing_defaulted = false;  // no sidecar was found; (1, 1, 1) mm used
};

// NPY plus its `<stem>.spacing` sidecar when present.
LoadedMap load_map(const std::filesystem::path& npy_path);
// Writes `<dir>/<id>.npy` and `<dir>/<id>.spacing`.
void save_map(const std::filesystem::path& dir, const std::string& id, const ProbMap& map);

// ---- CSV ----

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column, or nullopt.
    std::optional<std::size_t> column(std::string_view name) const;
};

// Plain comma-separated text, no quoting. Throws ValidationError if unreadable
// or if a row's width differs from the header.
CsvTable read_csv(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

// Header `id,low_mm3,point_mm3,high_mm3,true_volume_mm3,h0,...,h79`.
std::vector<std::string> record_csv_header();
std::string records_to_csv(const std::vector<SampleRecord>& records);
std::vector<SampleRecord> read_records_csv(const std::filesystem::path& path);

// `id -> true_volume_mm3` from any CSV with those two columns; rows with an
// empty volume are skipped.
std::map<std::string, double> read_truth_csv(const std::filesystem::path& path);

// Throws ValidationError if `id` would break the CSV layout.
void check_id(std::string_view id);

}  // namespace ccvol
