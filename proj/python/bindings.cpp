#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "ccvol/clustering.hpp"
#include "ccvol/conformal.hpp"
#include "ccvol/error.hpp"
#include "ccvol/io.hpp"
#include "ccvol/metrics.hpp"
#include "ccvol/probmap.hpp"
#include "ccvol/synth.hpp"

namespace py = pybind11;
using namespace ccvol;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Spacing to_spacing(const std::tuple<double, double, double>& s) {
    return {std::get<0>(s), std::get<1>(s), std::get<2>(s)};
}

ProbMap to_map(const FloatArray& values, const std::tuple<double, double, double>& spacing) {
    if (values.ndim() != 3) throw ValidationError("probability map must be a 3D array");
    const Dims dims{static_cast<std::size_t>(values.shape(0)), static_cast<std::size_t>(values.shape(1)),
                    static_cast<std::size_t>(values.shape(2))};
    std::vector<float> data(values.data(), values.data() + values.size());
    return ProbMap(dims, to_spacing(spacing), std::move(data));
}

FloatArray to_array(const ProbMap& map) {
    const Dims& d = map.dims();
    FloatArray out({d.nz, d.ny, d.nx});
    std::copy(map.values().begin(), map.values().end(), out.mutable_data());
    return out;
}

DoubleArray feature_array(const HistogramFeature& f) {
    DoubleArray out(kHistogramBins);
    std::copy(f.counts.begin(), f.counts.end(), out.mutable_data());
    return out;
}

HistogramFeature feature_from(const DoubleArray& a) {
    if (a.ndim() != 1 || a.shape(0) != kHistogramBins)
        throw ValidationError("feature must have " + std::to_string(kHistogramBins) + " entries");
    HistogramFeature f;
    std::copy(a.data(), a.data() + kHistogramBins, f.counts.begin());
    return f;
}

std::vector<Point> points_from(const DoubleArray& a) {
    if (a.ndim() != 2) throw ValidationError("points must be a 2D array");
    std::vector<Point> out(static_cast<std::size_t>(a.shape(0)));
    const auto d = static_cast<std::size_t>(a.shape(1));
    for (std::size_t i = 0; i < out.size(); ++i) out[i].assign(a.data() + i * d, a.data() + (i + 1) * d);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Conformal volume intervals from segmentation probability maps.";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.attr("HISTOGRAM_BINS") = kHistogramBins;

    py::class_<VolumeTriple>(m, "VolumeTriple")
        .def(py::init<>())
        .def(py::init([](double l, double v, double h) { return VolumeTriple{l, v, h}; }), py::arg("low_mm3"),
             py::arg("point_mm3"), py::arg("high_mm3"))
        .def_readwrite("low_mm3", &VolumeTriple::low_mm3)
        .def_readwrite("point_mm3", &VolumeTriple::point_mm3)
        .def_readwrite("high_mm3", &VolumeTriple::high_mm3)
        .def("__iter__", [](const VolumeTriple& t) {
            return py::iter(py::make_tuple(t.low_mm3, t.point_mm3, t.high_mm3));
        })
        .def("__eq__", [](const VolumeTriple& a, const VolumeTriple& b) { return a == b; })
        .def("__repr__", [](const VolumeTriple& t) {
            return "VolumeTriple(" + format_real(t.low_mm3) + ", " + format_real(t.point_mm3) + ", " +
                   format_real(t.high_mm3) + ")";
        });

    py::class_<SampleRecord>(m, "SampleRecord")
        .def_readwrite("id", &SampleRecord::id)
        .def_readwrite("triple", &SampleRecord::triple)
        .def_readwrite("true_volume_mm3", &SampleRecord::true_volume_mm3)
        .def_property(
            "feature", [](const SampleRecord& r) { return feature_array(r.feature); },
            [](SampleRecord& r, const DoubleArray& a) { r.feature = feature_from(a); });

    m.def(
        "volume_triple", [](const FloatArray& values, std::tuple<double, double, double> spacing) {
            return volume_triple(to_map(values, spacing));
        },
        py::arg("values"), py::arg("spacing") = std::make_tuple(1.0, 1.0, 1.0));
    m.def(
        "histogram_feature",
        [](const FloatArray& values, std::tuple<double, double, double> spacing) {
            return feature_array(histogram_feature(to_map(values, spacing)));
        },
        py::arg("values"), py::arg("spacing") = std::make_tuple(1.0, 1.0, 1.0));
    m.def(
        "mean_maps",
        [](const std::vector<FloatArray>& members) {
            std::vector<ProbMap> maps;
            for (const auto& a : members) maps.push_back(to_map(a, {1.0, 1.0, 1.0}));
            return to_array(mean_maps(maps));
        },
        py::arg("maps"));
    m.def(
        "make_record",
        [](std::string id, const FloatArray& values, std::tuple<double, double, double> spacing,
           std::optional<double> true_volume) { return make_record(std::move(id), to_map(values, spacing), true_volume); },
        py::arg("id"), py::arg("values"), py::arg("spacing") = std::make_tuple(1.0, 1.0, 1.0),
        py::arg("true_volume_mm3") = py::none());

    m.def(
        "load_map",
        [](const std::filesystem::path& path) {
            LoadedMap loaded = load_map(path);
            const Spacing& s = loaded.map.spacing();
            return py::make_tuple(to_array(loaded.map), py::make_tuple(s.dz, s.dy, s.dx));
        },
        py::arg("path"));
    m.def(
        "save_map",
        [](const std::filesystem::path& dir, const std::string& id, const FloatArray& values,
           std::tuple<double, double, double> spacing) { save_map(dir, id, to_map(values, spacing)); },
        py::arg("dir"), py::arg("id"), py::arg("values"), py::arg("spacing") = std::make_tuple(1.0, 1.0, 1.0));
    m.def("read_records_csv", &read_records_csv, py::arg("path"));
    m.def("records_to_csv", &records_to_csv, py::arg("records"));

    py::class_<ClusterModel>(m, "ClusterModel")
        .def_readonly("k", &ClusterModel::k)
        .def_readonly("centers", &ClusterModel::centers)
        .def_readonly("sizes", &ClusterModel::sizes)
        .def_readonly("iteration_count", &ClusterModel::iteration_count)
        .def_readonly("inertia", &ClusterModel::inertia)
        .def_readonly("inertia_history", &ClusterModel::inertia_history)
        .def("assign", [](const ClusterModel& cm, const DoubleArray& point) {
            return assign_nearest(cm, std::span<const double>(point.data(), static_cast<std::size_t>(point.size())));
        });

    m.def(
        "fit_constrained_kmeans",
        [](const DoubleArray& points, int k, std::uint64_t seed) {
            ClusterFit fit = fit_constrained_kmeans(points_from(points), k, seed);
            return py::make_tuple(std::move(fit.model), std::move(fit.assignments));
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 0);

    py::class_<CalibrationModel>(m, "CalibrationModel")
        .def_readonly("alpha", &CalibrationModel::alpha)
        .def_property_readonly("method", [](const CalibrationModel& cm) { return std::string(to_string(cm.method)); })
        .def_readonly("q_global", &CalibrationModel::q_global)
        .def_readonly("q_per_cluster", &CalibrationModel::q_per_cluster)
        .def_readonly("cluster_model", &CalibrationModel::cluster_model)
        .def_readonly("n_calibration", &CalibrationModel::n_calibration)
        .def_readwrite("created_from", &CalibrationModel::created_from)
        .def("to_json", &model_to_json)
        .def_static("from_json", &model_from_json, py::arg("text"))
        .def("save", [](const CalibrationModel& cm, const std::filesystem::path& p) { save_model(cm, p); })
        .def_static("load", &load_model, py::arg("path"))
        .def("__eq__", [](const CalibrationModel& a, const CalibrationModel& b) { return a == b; });

    py::class_<IntervalPrediction>(m, "IntervalPrediction")
        .def(py::init([](double low, double point, double high) {
                 IntervalPrediction p;
                 p.low_mm3 = low;
                 p.point_mm3 = point;
                 p.high_mm3 = high;
                 return p;
             }),
             py::arg("low_mm3"), py::arg("point_mm3"), py::arg("high_mm3"))
        .def_readonly("low_mm3", &IntervalPrediction::low_mm3)
        .def_readonly("point_mm3", &IntervalPrediction::point_mm3)
        .def_readonly("high_mm3", &IntervalPrediction::high_mm3)
        .def_readonly("cluster_index", &IntervalPrediction::cluster_index)
        .def_readonly("q_applied", &IntervalPrediction::q_applied)
        .def_readonly("degenerate", &IntervalPrediction::degenerate)
        .def("__repr__", [](const IntervalPrediction& p) {
            return "IntervalPrediction(" + format_real(p.low_mm3) + ", " + format_real(p.point_mm3) + ", " +
                   format_real(p.high_mm3) + ")";
        });

    m.def("conformity_score", &conformity_score, py::arg("triple"), py::arg("true_volume_mm3"));
    m.def("conformal_rank", &conformal_rank, py::arg("n"), py::arg("alpha"));
    m.def("conformal_quantile", &conformal_quantile, py::arg("scores"), py::arg("alpha"));
    m.def(
        "calibrate",
        [](const std::vector<SampleRecord>& records, double alpha, const std::string& method, int k,
           std::uint64_t seed) {
            if (parse_method(method) == Method::Conventional) return calibrate_conventional(records, alpha);
            return calibrate_clustered(records, alpha, k, seed);
        },
        py::arg("records"), py::arg("alpha"), py::arg("method") = "clustered", py::arg("k") = 2,
        py::arg("seed") = 0);
    m.def(
        "predict",
        [](const CalibrationModel& model, const SampleRecord& record) {
            return predict_interval(model, record.triple, &record.feature);
        },
        py::arg("model"), py::arg("record"));
    m.def("apply_correction", &apply_correction, py::arg("triple"), py::arg("q"));

    m.def("agatston_score", &agatston_score, py::arg("volume_mm3"));
    m.def(
        "risk_category", [](double score) { return std::string(to_string(risk_category(score))); },
        py::arg("score"));

    py::class_<TriageRecord>(m, "TriageRecord")
        .def_readonly("id", &TriageRecord::id)
        .def_readonly("interval", &TriageRecord::interval)
        .def_readonly("true_volume_mm3", &TriageRecord::true_volume_mm3)
        .def_readonly("covered", &TriageRecord::covered)
        .def_readonly("accurate", &TriageRecord::accurate)
        .def_readonly("confident", &TriageRecord::confident)
        .def_readonly("confident_miss", &TriageRecord::confident_miss)
        .def_property_readonly("cell", [](const TriageRecord& r) { return std::string(to_string(r.cell())); });

    py::class_<TriageSummary>(m, "TriageSummary")
        .def_readonly("n_total", &TriageSummary::n_total)
        .def_readonly("n_covered", &TriageSummary::n_covered)
        .def_readonly("ca", &TriageSummary::ca)
        .def_readonly("ce", &TriageSummary::ce)
        .def_readonly("ua", &TriageSummary::ua)
        .def_readonly("ue", &TriageSummary::ue)
        .def_readonly("confident_misses", &TriageSummary::confident_misses)
        .def_readonly("coverage", &TriageSummary::coverage)
        .def_readonly("ca_rate", &TriageSummary::ca_rate)
        .def_readonly("ce_rate", &TriageSummary::ce_rate)
        .def_readonly("car_minus_cer", &TriageSummary::car_minus_cer)
        .def("to_text", &summary_to_text)
        .def("to_json", &summary_to_json);

    m.def("classify", &classify_record, py::arg("interval"), py::arg("true_volume_mm3"), py::arg("id") = "");
    m.def("summarize", &summarize, py::arg("records"));

    py::class_<GeneratorConfig>(m, "GeneratorConfig")
        .def(py::init<>())
        .def_property(
            "dims", [](const GeneratorConfig& g) { return py::make_tuple(g.dims.nz, g.dims.ny, g.dims.nx); },
            [](GeneratorConfig& g, std::tuple<std::size_t, std::size_t, std::size_t> d) {
                g.dims = {std::get<0>(d), std::get<1>(d), std::get<2>(d)};
            })
        .def_property(
            "spacing",
            [](const GeneratorConfig& g) { return py::make_tuple(g.spacing.dz, g.spacing.dy, g.spacing.dx); },
            [](GeneratorConfig& g, std::tuple<double, double, double> s) { g.spacing = to_spacing(s); })
        .def_readwrite("lesion_count_mean", &GeneratorConfig::lesion_count_mean)
        .def_readwrite("lesion_radius_min_mm", &GeneratorConfig::lesion_radius_min_mm)
        .def_readwrite("lesion_radius_max_mm", &GeneratorConfig::lesion_radius_max_mm)
        .def_property(
            "noise_regimes",
            [](const GeneratorConfig& g) {
                std::vector<std::pair<double, double>> out;
                for (const auto& r : g.noise_regimes) out.emplace_back(r.weight, r.sigma);
                return out;
            },
            [](GeneratorConfig& g, const std::vector<std::pair<double, double>>& regimes) {
                g.noise_regimes.clear();
                for (const auto& [w, s] : regimes) g.noise_regimes.push_back({w, s});
            })
        .def_readwrite("blur_sigma_mm", &GeneratorConfig::blur_sigma_mm)
        .def_readwrite("seed", &GeneratorConfig::seed)
        .def("validate", &GeneratorConfig::validate);

    m.def(
        "generate",
        [](const GeneratorConfig& config, std::size_t n, std::uint64_t first_index, unsigned threads) {
            std::vector<SynthSample> samples;
            {
                py::gil_scoped_release release;
                samples = generate(config, n, first_index, threads);
            }
            py::list out;
            for (const auto& s : samples) {
                py::dict d;
                d["id"] = s.id;
                d["values"] = to_array(s.map);
                d["spacing"] = py::make_tuple(s.map.spacing().dz, s.map.spacing().dy, s.map.spacing().dx);
                d["true_volume_mm3"] = s.true_volume_mm3;
                d["regime_index"] = s.regime_index;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("config"), py::arg("n"), py::arg("first_index") = 0, py::arg("threads") = 1);
}
