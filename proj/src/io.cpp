#include "ccvol/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "ccvol/error.hpp"

namespace ccvol {

namespace fs = std::filesystem;

std::string format_real(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

double parse_real(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
    if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || end != text.data() + text.size() || std::isnan(value)) {
        throw ValidationError("not a real number: '" + std::string(text) + "'");
    }
    return value;
}

// ---- NPY ----

namespace {

constexpr char kNpyMagic[] = "\x93NUMPY";

inline std::uint32_t bswap32(std::uint32_t v) noexcept { return __builtin_bswap32(v); }

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw ValidationError("cannot read " + path.string());
    return std::move(ss).str();
}

std::string header_value(const std::string& header, const std::string& key, const fs::path& path) {
    const std::string quoted = "'" + key + "'";
    const auto k = header.find(quoted);
    if (k == std::string::npos) throw ValidationError(path.string() + ": NPY header lacks " + quoted);
    auto colon = header.find(':', k + quoted.size());
    if (colon == std::string::npos) throw ValidationError(path.string() + ": malformed NPY header");
    std::size_t start = colon + 1;
    while (start < header.size() && header[start] == ' ') ++start;
    if (start >= header.size()) throw ValidationError(path.string() + ": malformed NPY header");
    std::size_t end;
    if (header[start] == '(') {
        end = header.find(')', start);
        if (end == std::string::npos) throw ValidationError(path.string() + ": malformed NPY shape");
        ++end;
    } else if (header[start] == '\'') {
        end = header.find('\'', start + 1);
        if (end == std::string::npos) throw ValidationError(path.string() + ": malformed NPY header");
        ++end;
    } else {
        end = header.find_first_of(",}", start);
        if (end == std::string::npos) end = header.size();
    }
    return header.substr(start, end - start);
}

std::vector<std::size_t> parse_shape(const std::string& text, const fs::path& path) {
    std::vector<std::size_t> shape;
    std::size_t i = 1;  // skip '('
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == ',')) ++i;
        if (i >= text.size() || text[i] == ')') break;
        std::size_t value = 0;
        auto [end, ec] = std::from_chars(text.data() + i, text.data() + text.size(), value);
        if (ec != std::errc{}) throw ValidationError(path.string() + ": malformed NPY shape " + text);
        shape.push_back(value);
        i = static_cast<std::size_t>(end - text.data());
    }
    return shape;
}

}  // namespace

ProbMap read_npy(const fs::path& path, Spacing spacing) {
    const std::string bytes = read_all(path);
    if (bytes.size() < 10 || bytes.compare(0, 6, kNpyMagic, 6) != 0) {
        throw ValidationError(path.string() + ": not an NPY file");
    }
    const auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0, header_start = 0;
    if (major == 1) {
        header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
        header_start = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) throw ValidationError(path.string() + ": truncated NPY header");
        for (int b = 0; b < 4; ++b) header_len |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[8 + b])) << (8 * b);
        header_start = 12;
    } else {
        throw ValidationError(path.string() + ": unsupported NPY version " + std::to_string(major));
    }
    if (bytes.size() < header_start + header_len) throw ValidationError(path.string() + ": truncated NPY header");
    const std::string header = bytes.substr(header_start, header_len);

    const std::string descr = header_value(header, "descr", path);
    if (descr != "'<f4'") throw ValidationError(path.string() + ": dtype " + descr + " is not little-endian float32");
    if (header_value(header, "fortran_order", path) != "False") {
        throw ValidationError(path.string() + ": Fortran-order arrays are not supported");
    }
    const auto shape = parse_shape(header_value(header, "shape", path), path);
    if (shape.size() != 3) throw ValidationError(path.string() + ": expected a 3D array (nz, ny, nx)");
    const Dims dims{shape[0], shape[1], shape[2]};

    const std::size_t data_start = header_start + header_len;
    const std::size_t n = dims.voxels();
    if (bytes.size() - data_start != n * sizeof(float)) {
        throw ValidationError(path.string() + ": data size does not match shape");
    }
    std::vector<float> values(n);
    std::memcpy(values.data(), bytes.data() + data_start, n * sizeof(float));
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : values) v = std::bit_cast<float>(bswap32(std::bit_cast<std::uint32_t>(v)));
    }
    try {
        return ProbMap(dims, spacing, std::move(values));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_npy(const fs::path& path, const ProbMap& map) {
    const Dims& d = map.dims();
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(d.nz) + ", " +
                         std::to_string(d.ny) + ", " + std::to_string(d.nx) + "), }";
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    std::string out(kNpyMagic, 6);
    out.push_back('\x01');
    out.push_back('\x00');
    out.push_back(static_cast<char>(header.size() & 0xff));
    out.push_back(static_cast<char>((header.size() >> 8) & 0xff));
    out += header;
    const auto values = map.values();
    const std::size_t offset = out.size();
    out.resize(offset + values.size() * sizeof(float));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto le = bswap32(std::bit_cast<std::uint32_t>(values[i]));
            std::memcpy(out.data() + offset + i * sizeof(float), &le, sizeof le);
        }
    } else {
        std::memcpy(out.data() + offset, values.data(), values.size() * sizeof(float));
    }
    write_text_file(path, out);
}

fs::path spacing_path_for(const fs::path& npy_path) {
    fs::path p = npy_path;
    p.replace_extension(".spacing");
    return p;
}

Spacing read_spacing(const fs::path& path) {
    std::istringstream in(read_all(path));
    std::string a, b, c, extra;
    if (!(in >> a >> b >> c) || (in >> extra)) {
        throw ValidationError(path.string() + ": expected three reals 'dz dy dx'");
    }
    Spacing s{parse_real(a), parse_real(b), parse_real(c)};
    for (double v : {s.dz, s.dy, s.dx}) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(path.string() + ": spacing must be finite and > 0");
    }
    return s;
}

void write_spacing(const fs::path& path, const Spacing& s) {
    write_text_file(path, format_real(s.dz) + " " + format_real(s.dy) + " " + format_real(s.dx) + "\n");
}

LoadedMap load_map(const fs::path& npy_path) {
    const fs::path sidecar = spacing_path_for(npy_path);
    if (fs::exists(sidecar)) return {read_npy(npy_path, read_spacing(sidecar)), false};
    return {read_npy(npy_path, Spacing{}), true};
}

void save_map(const fs::path& dir, const std::string& id, const ProbMap& map) {
    check_id(id);
    write_npy(dir / (id + ".npy"), map);
    write_spacing(dir / (id + ".spacing"), map.spacing());
}

// ---- CSV ----

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.emplace_back(line.substr(start));
            break;
        }
        cells.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
    std::istringstream in(read_all(path));
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(table.header.size()) + " columns, found " +
                                  std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    if (table.header.empty()) throw ValidationError(path.string() + ": empty CSV");
    return table;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw IoError("failed writing " + path.string());
}

void check_id(std::string_view id) {
    if (id.empty() || id.find_first_of(",\n\r\"") != std::string_view::npos) {
        throw ValidationError("invalid sample id '" + std::string(id) + "' (empty or contains , \" or newline)");
    }
}

std::vector<std::string> record_csv_header() {
    std::vector<std::string> h{"id", "low_mm3", "point_mm3", "high_mm3", "true_volume_mm3"};
    for (int b = 0; b < kHistogramBins; ++b) h.push_back("h" + std::to_string(b));
    return h;
}

std::string records_to_csv(const std::vector<SampleRecord>& records) {
    std::string out;
    const auto header = record_csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& r : records) {
        check_id(r.id);
        out += r.id;
        out += ',' + format_real(r.triple.low_mm3);
        out += ',' + format_real(r.triple.point_mm3);
        out += ',' + format_real(r.triple.high_mm3);
        out += ',';
        if (r.true_volume_mm3) out += format_real(*r.true_volume_mm3);
        for (double c : r.feature.counts) out += ',' + format_real(c);
        out += '\n';
    }
    return out;
}

std::vector<SampleRecord> read_records_csv(const fs::path& path) {
    const CsvTable table = read_csv(path);
    if (table.header != record_csv_header()) {
        throw ValidationError(path.string() + ": header is not the record schema id,low_mm3,point_mm3,high_mm3,"
                                              "true_volume_mm3,h0..h79");
    }
    std::vector<SampleRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t row = 0; row < table.rows.size(); ++row) {
        const auto& cells = table.rows[row];
        const std::string where = path.string() + " row " + std::to_string(row + 1);
        try {
            SampleRecord r;
            r.id = cells[0];
            check_id(r.id);
            r.triple = {parse_real(cells[1]), parse_real(cells[2]), parse_real(cells[3])};
            for (double v : {r.triple.low_mm3, r.triple.point_mm3, r.triple.high_mm3}) {
                if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("volumes must be finite and >= 0");
            }
            if (!cells[4].empty()) {
                r.true_volume_mm3 = parse_real(cells[4]);
                if (!(*r.true_volume_mm3 >= 0.0) || !std::isfinite(*r.true_volume_mm3)) {
                    throw ValidationError("true_volume_mm3 must be finite and >= 0");
                }
            }
            for (int b = 0; b < kHistogramBins; ++b) {
                const double c = parse_real(cells[5 + static_cast<std::size_t>(b)]);
                if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("histogram counts must be finite and >= 0");
                r.feature.counts[static_cast<std::size_t>(b)] = c;
            }
            records.push_back(std::move(r));
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    return records;
}

std::map<std::string, double> read_truth_csv(const fs::path& path) {
    const CsvTable table = read_csv(path);
    const auto id_col = table.column("id");
    const auto vol_col = table.column("true_volume_mm3");
    if (!id_col || !vol_col) throw ValidationError(path.string() + ": needs columns id and true_volume_mm3");
    std::map<std::string, double> truth;
    for (std::size_t row = 0; row < table.rows.size(); ++row) {
        const auto& cells = table.rows[row];
        if (cells[*vol_col].empty()) continue;
        double v;
        try {
            v = parse_real(cells[*vol_col]);
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + " row " + std::to_string(row + 1) + ": " + e.what());
        }
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError(path.string() + " row " + std::to_string(row + 1) + ": true_volume_mm3 must be >= 0");
        }
        if (!truth.emplace(cells[*id_col], v).second) {
            throw ValidationError(path.string() + ": duplicate id " + cells[*id_col]);
        }
    }
    return truth;
}

}  // namespace ccvol
