#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "ccvol/conformal.hpp"
#include "ccvol/error.hpp"
#include "ccvol/io.hpp"
#include "ccvol/metrics.hpp"
#include "ccvol/probmap.hpp"
#include "ccvol/synth.hpp"

namespace ccvol::cli {

namespace {

const char* const kIntervalHeader = "id,low,point,high,cluster_index,q_applied";

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(trim(item));
    return parts;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void ensure_parent(const fs::path& file) {
    const fs::path parent = file.parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
}

// Sorted *.npy stems of a directory.
std::vector<std::string> npy_stems(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw ValidationError("cannot read input directory " + dir.string());
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".npy") stems.push_back(entry.path().stem().string());
    }
    if (ec) throw ValidationError("cannot list " + dir.string() + ": " + ec.message());
    std::sort(stems.begin(), stems.end());
    return stems;
}

// Loads, averages across directories and featurizes every map.
std::vector<SampleRecord> featurize_dirs(const std::vector<fs::path>& dirs,
                                         const std::map<std::string, double>* truth) {
    if (dirs.empty()) throw ValidationError("no input directory given");
    const std::vector<std::string> stems = npy_stems(dirs.front());
    if (stems.empty()) throw ValidationError("no input maps in " + dirs.front().string());
    for (std::size_t d = 1; d < dirs.size(); ++d) {
        if (npy_stems(dirs[d]) != stems) {
            throw ValidationError("input directory " + dirs[d].string() + " does not hold the same map names as " +
                                  dirs.front().string());
        }
    }
    std::vector<SampleRecord> records;
    records.reserve(stems.size());
    for (const auto& stem : stems) {
        check_id(stem);
        std::vector<ProbMap> maps;
        for (const auto& dir : dirs) {
            LoadedMap loaded = load_map(dir / (stem + ".npy"));
            if (loaded.spacing_defaulted) {
                std::cerr << "warning: " << (dir / (stem + ".npy")).string()
                          << ": no .spacing sidecar, assuming 1 1 1 mm\n";
            }
            maps.push_back(std::move(loaded.map));
        }
        std::optional<double> true_volume;
        if (truth) {
            if (auto it = truth->find(stem); it != truth->end()) true_volume = it->second;
        }
        ProbMap mean = [&] {
            try {
                return mean_maps(maps);
            } catch (const ValidationError& e) {
                throw ValidationError("map " + stem + ": " + e.what());
            }
        }();
        records.push_back(make_record(stem, mean, true_volume));
    }
    return records;
}

std::string interval_row(const std::string& id, const IntervalPrediction& p) {
    std::string row = id + ',' + format_real(p.low_mm3) + ',' + format_real(p.point_mm3) + ',' +
                      format_real(p.high_mm3) + ',';
    if (p.cluster_index) row += std::to_string(*p.cluster_index);
    row += ',' + format_real(p.q_applied) + '\n';
    return row;
}

struct IntervalRow {
    std::string id;
    IntervalPrediction interval;
};

std::vector<IntervalRow> read_intervals(const fs::path& path) {
    const CsvTable table = read_csv(path);
    if (table.header != split(kIntervalHeader, ',')) {
        throw ValidationError(path.string() + ": header is not " + std::string(kIntervalHeader));
    }
    std::vector<IntervalRow> rows;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& c = table.rows[i];
        try {
            IntervalRow r;
            r.id = c[0];
            r.interval.low_mm3 = parse_real(c[1]);
            r.interval.point_mm3 = parse_real(c[2]);
            r.interval.high_mm3 = parse_real(c[3]);
            if (!c[4].empty()) {
                int idx = 0;
                auto [end, ec] = std::from_chars(c[4].data(), c[4].data() + c[4].size(), idx);
                if (ec != std::errc{} || end != c[4].data() + c[4].size()) {
                    throw ValidationError("bad cluster_index '" + c[4] + "'");
                }
                r.interval.cluster_index = idx;
            }
            r.interval.q_applied = parse_real(c[5]);
            if (!(r.interval.low_mm3 >= 0.0) || !(r.interval.high_mm3 >= r.interval.low_mm3) ||
                !(r.interval.point_mm3 >= 0.0)) {
                throw ValidationError("interval must satisfy 0 <= low <= high and point >= 0");
            }
            rows.push_back(std::move(r));
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + " row " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return rows;
}

// ---- simulate config ----

double as_real(const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return parse_real(it->second);
    } catch (const ValidationError&) {
        throw ValidationError(key + ": '" + it->second + "' is not a number");
    }
}

std::uint64_t as_count(const std::map<std::string, std::string>& kv, const std::string& key, std::uint64_t fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::uint64_t v = 0;
    const std::string& s = it->second;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) {
        throw ValidationError(key + ": '" + s + "' is not a non-negative integer");
    }
    return v;
}

std::vector<double> as_reals(const std::map<std::string, std::string>& kv, const std::string& key, std::size_t count) {
    const auto parts = split(kv.at(key), ',');
    if (parts.size() != count) throw ValidationError(key + ": expected " + std::to_string(count) + " comma-separated values");
    std::vector<double> out;
    for (const auto& p : parts) {
        try {
            out.push_back(parse_real(p));
        } catch (const ValidationError&) {
            throw ValidationError(key + ": '" + p + "' is not a number");
        }
    }
    return out;
}

const std::set<std::string> kSimulateKeys = {
    "mode", "dims", "spacing_mm", "lesion_count_mean", "lesion_radius_range_mm", "noise_regimes", "blur_sigma_mm",
    "seed", "n", "n_cal", "n_test", "alpha", "method", "k", "seeds", "threads"};

GeneratorConfig generator_from(const std::map<std::string, std::string>& kv) {
    GeneratorConfig g;
    if (kv.count("dims")) {
        const auto d = as_reals(kv, "dims", 3);
        for (double v : d) {
            if (!(v >= 1.0) || v != std::floor(v)) throw ValidationError("dims: components must be integers >= 1");
        }
        g.dims = {static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[2])};
    }
    if (kv.count("spacing_mm")) {
        const auto s = as_reals(kv, "spacing_mm", 3);
        g.spacing = {s[0], s[1], s[2]};
    }
    g.lesion_count_mean = as_real(kv, "lesion_count_mean", g.lesion_count_mean);
    if (kv.count("lesion_radius_range_mm")) {
        const auto r = as_reals(kv, "lesion_radius_range_mm", 2);
        g.lesion_radius_min_mm = r[0];
        g.lesion_radius_max_mm = r[1];
    }
    if (kv.count("noise_regimes")) {
        g.noise_regimes.clear();
        for (const auto& pair : split(kv.at("noise_regimes"), ',')) {
            const auto ws = split(pair, ':');
            if (ws.size() != 2) throw ValidationError("noise_regimes: expected weight:sigma pairs, got '" + pair + "'");
            try {
                g.noise_regimes.push_back({parse_real(ws[0]), parse_real(ws[1])});
            } catch (const ValidationError&) {
                throw ValidationError("noise_regimes: '" + pair + "' is not weight:sigma");
            }
        }
    }
    g.blur_sigma_mm = as_real(kv, "blur_sigma_mm", g.blur_sigma_mm);
    g.seed = as_count(kv, "seed", g.seed);
    g.validate();
    return g;
}

void write_dataset(const GeneratorConfig& gen, std::size_t n, unsigned threads, const fs::path& out_dir) {
    const fs::path maps_dir = out_dir / "maps";
    std::error_code ec;
    fs::create_directories(maps_dir, ec);
    if (ec) throw IoError("cannot create " + maps_dir.string() + ": " + ec.message());
    std::string manifest = "id,true_volume_mm3,regime_index\n";
    // Batches keep memory flat for large n.
    constexpr std::size_t kBatch = 256;
    for (std::size_t start = 0; start < n; start += kBatch) {
        const std::size_t count = std::min(kBatch, n - start);
        for (const auto& s : generate(gen, count, start, threads)) {
            save_map(maps_dir, s.id, s.map);
            manifest += s.id + ',' + format_real(s.true_volume_mm3) + ',' + std::to_string(s.regime_index) + '\n';
        }
    }
    write_text_file(out_dir / "manifest.csv", manifest);
    std::cout << "wrote " << n << " maps to " << maps_dir.string() << " and manifest.csv\n";
}

std::string experiment_report(const ExperimentConfig& cfg, const ExperimentResult& res) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "alpha %.4g  target coverage %.4g  n_cal %zu  n_test %zu  replicates %zu\n",
                  cfg.alpha, 1.0 - cfg.alpha, cfg.n_cal, cfg.n_test, cfg.replicates);
    out += line;
    out += "method        regime  mean_coverage  min_coverage  mean_CAr-CEr(%)\n";
    const int regimes = static_cast<int>(cfg.generator.noise_regimes.size());
    for (Method m : cfg.methods) {
        for (int g = -1; g < (regimes > 1 ? regimes : 0); ++g) {
            const auto mean = res.mean(m, g);
            if (mean.replicates == 0) continue;
            char car[32] = "n/a";
            if (mean.car_minus_cer) std::snprintf(car, sizeof car, "%.1f", 100.0 * *mean.car_minus_cer);
            std::snprintf(line, sizeof line, "%-13s %-7s %-14.4f %-13.4f %s\n", to_string(m),
                          g < 0 ? "all" : std::to_string(g).c_str(), mean.coverage, mean.min_coverage, car);
            out += line;
        }
    }
    return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ValidationError(source + ":" + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate key " + key);
        }
    }
    return kv;
}

int cmd_featurize(const FeaturizeOptions& o) {
    std::optional<std::map<std::string, double>> truth;
    if (o.manifest) truth = read_truth_csv(*o.manifest);
    const auto records = featurize_dirs(o.input_dirs, truth ? &*truth : nullptr);
    ensure_parent(o.out_csv);
    write_text_file(o.out_csv, records_to_csv(records));
    std::size_t with_truth = 0;
    for (const auto& r : records) with_truth += r.true_volume_mm3.has_value();
    std::cout << "featurized " << records.size() << " maps (" << with_truth << " with true volume) -> "
              << o.out_csv.string() << "\n";
    return kExitOk;
}

int cmd_calibrate(const CalibrateOptions& o) {
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw ValidationError("--alpha must lie strictly inside (0, 1)");
    const Method method = parse_method(o.method);
    const std::string raw = slurp(o.records_csv);
    const auto records = read_records_csv(o.records_csv);
    if (records.empty()) throw ValidationError(o.records_csv.string() + ": no records");
    for (const auto& r : records) {
        if (!r.true_volume_mm3) throw ValidationError("record " + r.id + " has no true_volume_mm3; calibration needs it");
    }

    CalibrationModel model = method == Method::Clustered ? calibrate_clustered(records, o.alpha, o.k, o.seed)
                                                         : calibrate_conventional(records, o.alpha);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(raw)));
    model.created_from = "calibrate records=" + o.records_csv.filename().string() + " fnv1a64=" + hash +
                         " method=" + to_string(method) +
                         (method == Method::Clustered ? " k=" + std::to_string(o.k) + " seed=" + std::to_string(o.seed)
                                                      : std::string());
    ensure_parent(o.out_model);
    save_model(model, o.out_model);

    const std::size_t rank = conformal_rank(records.size(), o.alpha);
    std::cout << "calibrated " << to_string(method) << " model on " << records.size() << " records, alpha "
              << format_real(o.alpha) << "\n";
    std::cout << "  global: n " << records.size() << "  rank " << rank << "  q " << format_real(model.q_global) << "\n";
    bool any_inf = std::isinf(model.q_global);
    if (model.cluster_model) {
        for (std::size_t c = 0; c < model.q_per_cluster->size(); ++c) {
            const double q = (*model.q_per_cluster)[c];
            const auto size = static_cast<std::size_t>(model.cluster_model->sizes[c]);
            std::cout << "  cluster " << c << ": n " << size << "  rank " << conformal_rank(size, o.alpha) << "  q "
                      << format_real(q) << "\n";
            any_inf = any_inf || std::isinf(q);
        }
    }
    if (any_inf) {
        std::cerr << "WARNING: at least one correction q is infinite: ceil((n+1)(1-alpha)) exceeds n for that group.\n"
                     "WARNING: intervals using it are unbounded above; use more calibration data, fewer clusters or a "
                     "larger alpha.\n";
    }
    std::cout << "model -> " << o.out_model.string() << "\n";
    return kExitOk;
}

int cmd_predict(const PredictOptions& o) {
    const CalibrationModel model = load_model(o.model);
    std::vector<SampleRecord> records;
    if (o.records_csv && !o.map_dirs.empty()) throw ValidationError("give either --records or --maps, not both");
    if (o.records_csv) {
        records = read_records_csv(*o.records_csv);
    } else if (!o.map_dirs.empty()) {
        records = featurize_dirs(o.map_dirs, nullptr);
    } else {
        throw ValidationError("one of --records or --maps is required");
    }
    if (model.cluster_model && model.cluster_model->feature_dim() != static_cast<std::size_t>(kHistogramBins)) {
        throw ValidationError("model cluster centers have dimension " +
                              std::to_string(model.cluster_model->feature_dim()) + ", features have " +
                              std::to_string(kHistogramBins));
    }

    std::string out = std::string(kIntervalHeader) + "\n";
    std::vector<std::string> degenerate;
    for (const auto& r : records) {
        const IntervalPrediction p = predict_interval(model, r.triple, &r.feature);
        if (p.degenerate) degenerate.push_back(r.id);
        out += interval_row(r.id, p);
    }
    ensure_parent(o.out_csv);
    write_text_file(o.out_csv, out);
    if (!degenerate.empty()) {
        std::cerr << "warning: " << degenerate.size() << " interval(s) collapsed by a negative correction:";
        for (const auto& id : degenerate) std::cerr << ' ' << id;
        std::cerr << "\n";
    }
    std::cout << "predicted " << records.size() << " intervals -> " << o.out_csv.string() << "\n";
    return kExitOk;
}

int cmd_evaluate(const EvaluateOptions& o) {
    const auto intervals = read_intervals(o.intervals_csv);
    const auto truth = read_truth_csv(o.truth_csv);
    std::vector<std::string> missing;
    for (const auto& row : intervals) {
        if (!truth.count(row.id)) missing.push_back(row.id);
    }
    if (intervals.empty() || !missing.empty()) {
        std::string msg = intervals.empty() ? "no intervals to evaluate" : "ids without a true volume in " + o.truth_csv.string() + ":";
        for (const auto& id : missing) msg += " " + id;
        throw ValidationError(msg);
    }

    std::vector<TriageRecord> triage;
    triage.reserve(intervals.size());
    for (const auto& row : intervals) triage.push_back(classify_record(row.interval, truth.at(row.id), row.id));
    const TriageSummary summary = summarize(triage);

    fs::path triage_path = o.out_triage ? *o.out_triage : fs::path(o.out_summary).replace_extension(".triage.csv");
    fs::path text_path = fs::path(o.out_summary).replace_extension(".txt");
    ensure_parent(o.out_summary);
    ensure_parent(triage_path);
    write_text_file(triage_path, triage_to_csv(triage));
    write_text_file(o.out_summary, summary_to_json(summary));
    const std::string text = summary_to_text(summary);
    write_text_file(text_path, text);
    std::cout << text;
    if (summary.confident_misses > 0) {
        std::cerr << "note: " << summary.confident_misses
                  << " confident prediction(s) whose interval misses the true risk category\n";
    }
    return kExitOk;
}

int cmd_simulate(const SimulateOptions& o) {
    auto kv = parse_key_values(slurp(o.config_file), o.config_file.string());
    for (const auto& ov : o.overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + ov + "'");
        kv[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
    }
    if (o.seed) kv["seed"] = std::to_string(*o.seed);
    for (const auto& [key, value] : kv) {
        if (!kSimulateKeys.count(key)) throw ValidationError("unknown config key: " + key);
    }

    const std::string mode = kv.count("mode") ? kv.at("mode") : "experiment";
    const GeneratorConfig gen = generator_from(kv);
    const auto threads = static_cast<unsigned>(as_count(kv, "threads", 1));

    std::error_code ec;
    fs::create_directories(o.out_dir, ec);
    if (ec) throw IoError("cannot create " + o.out_dir.string() + ": " + ec.message());

    if (mode == "dataset") {
        const auto n = as_count(kv, "n", 100);
        if (n < 1) throw ValidationError("n: must be >= 1");
        write_dataset(gen, n, threads, o.out_dir);
        return kExitOk;
    }
    if (mode != "experiment") throw ValidationError("mode: expected dataset or experiment, got '" + mode + "'");

    ExperimentConfig cfg;
    cfg.generator = gen;
    cfg.n_cal = as_count(kv, "n_cal", cfg.n_cal);
    cfg.n_test = as_count(kv, "n_test", cfg.n_test);
    cfg.alpha = as_real(kv, "alpha", cfg.alpha);
    cfg.k = static_cast<int>(as_count(kv, "k", static_cast<std::uint64_t>(cfg.k)));
    cfg.replicates = as_count(kv, "seeds", cfg.replicates);
    cfg.threads = threads;
    if (kv.count("method")) {
        const std::string m = kv.at("method");
        if (m == "both") {
            cfg.methods = {Method::Conventional, Method::Clustered};
        } else {
            try {
                cfg.methods = {parse_method(m)};
            } catch (const ValidationError&) {
                throw ValidationError("method: expected conventional, clustered or both, got '" + m + "'");
            }
        }
    }
    cfg.validate();

    const ExperimentResult result = coverage_experiment(cfg);
    write_text_file(o.out_dir / "coverage.csv", experiment_to_csv(result));
    const std::string report = experiment_report(cfg, result);
    write_text_file(o.out_dir / "coverage_summary.txt", report);
    std::cout << report;
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    return kExitOk;
}

}  // namespace ccvol::cli
