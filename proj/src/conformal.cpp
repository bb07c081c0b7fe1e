#include "ccvol/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ccvol/error.hpp"

namespace ccvol {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie strictly inside (0, 1)");
}

std::vector<double> scores_of(const std::vector<SampleRecord>& records) {
    std::vector<double> scores;
    scores.reserve(records.size());
    for (const auto& r : records) {
        if (!r.true_volume_mm3) throw ValidationError("calibration record " + r.id + " has no true volume");
        scores.push_back(conformity_score(r.triple, *r.true_volume_mm3));
    }
    return scores;
}

}  // namespace

const char* to_string(Method m) noexcept {
    return m == Method::Clustered ? "clustered" : "conventional";
}

Method parse_method(const std::string& text) {
    if (text == "conventional") return Method::Conventional;
    if (text == "clustered") return Method::Clustered;
    throw ValidationError("unknown method '" + text + "' (expected conventional or clustered)");
}

double conformity_score(const VolumeTriple& triple, double true_volume) {
    if (!(true_volume >= 0.0)) throw ValidationError("true volume must be >= 0");
    return std::max(triple.low_mm3 - true_volume, true_volume - triple.high_mm3);
}

std::size_t conformal_rank(std::size_t n, double alpha) {
    check_alpha(alpha);
    const double product = static_cast<double>(n + 1) * (1.0 - alpha);
    const double nearest = std::round(product);
    if (std::abs(product - nearest) <= 1e-9 * std::max(1.0, product)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(product));
}

double conformal_quantile(std::vector<double> scores, double alpha) {
    if (scores.empty()) throw ValidationError("conformal_quantile: no scores");
    const std::size_t r = conformal_rank(scores.size(), alpha);
    if (r > scores.size()) return kInf;
    if (r == 0) return -kInf;  // unreachable for alpha in (0, 1): (n+1)(1-alpha) > 0
    auto nth = scores.begin() + static_cast<std::ptrdiff_t>(r - 1);
    std::nth_element(scores.begin(), nth, scores.end());
    return *nth;
}

CalibrationModel calibrate_conventional(const std::vector<SampleRecord>& records, double alpha) {
    check_alpha(alpha);
    if (records.empty()) throw ValidationError("calibration needs at least one record");
    CalibrationModel m;
    m.alpha = alpha;
    m.method = Method::Conventional;
    m.q_global = conformal_quantile(scores_of(records), alpha);
    m.n_calibration = records.size();
    return m;
}

ClusteredCalibration calibrate_clustered_detailed(const std::vector<SampleRecord>& records, double alpha, int k,
                                                  std::uint64_t seed) {
    check_alpha(alpha);
    if (records.empty()) throw ValidationError("calibration needs at least one record");
    if (k < 1 || static_cast<std::size_t>(k) > records.size()) {
        throw ValidationError("k = " + std::to_string(k) + " must be in [1, " + std::to_string(records.size()) + "]");
    }
    const std::vector<double> scores = scores_of(records);

    std::vector<Point> features;
    features.reserve(records.size());
    for (const auto& r : records) features.emplace_back(r.feature.counts.begin(), r.feature.counts.end());
    ClusterFit fit = fit_constrained_kmeans(features, k, seed);

    std::vector<std::vector<double>> per_cluster(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < records.size(); ++i) {
        per_cluster[static_cast<std::size_t>(fit.assignments[i])].push_back(scores[i]);
    }
    std::vector<double> q(static_cast<std::size_t>(k));
    for (std::size_t c = 0; c < q.size(); ++c) q[c] = conformal_quantile(std::move(per_cluster[c]), alpha);

    ClusteredCalibration out;
    out.model.alpha = alpha;
    out.model.method = Method::Clustered;
    out.model.q_global = conformal_quantile(scores, alpha);
    out.model.cluster_model = std::move(fit.model);
    out.model.q_per_cluster = std::move(q);
    out.model.n_calibration = records.size();
    out.assignments = std::move(fit.assignments);
    return out;
}

CalibrationModel calibrate_clustered(const std::vector<SampleRecord>& records, double alpha, int k,
                                     std::uint64_t seed) {
    return calibrate_clustered_detailed(records, alpha, k, seed).model;
}

IntervalPrediction apply_correction(const VolumeTriple& triple, double q) {
    IntervalPrediction p;
    p.point_mm3 = triple.point_mm3;
    p.q_applied = q;
    const double lower = triple.low_mm3 - q;
    const double upper = q == kInf ? kInf : triple.high_mm3 + q;
    p.low_mm3 = std::max(0.0, lower);
    p.high_mm3 = upper;
    if (p.high_mm3 < p.low_mm3) {
        p.low_mm3 = p.high_mm3 = std::max(0.0, std::min(lower, upper));
        p.degenerate = true;
    }
    return p;
}

IntervalPrediction predict_interval(const CalibrationModel& model, const VolumeTriple& triple,
                                    const HistogramFeature* feature) {
    if (model.method == Method::Conventional) return apply_correction(triple, model.q_global);
    if (!feature) throw ValidationError("clustered calibration model needs a histogram feature to predict");
    if (!model.cluster_model || !model.q_per_cluster) throw ValidationError("clustered model lacks its clusters");
    const int c = assign_nearest(*model.cluster_model, feature->counts);
    IntervalPrediction p = apply_correction(triple, (*model.q_per_cluster)[static_cast<std::size_t>(c)]);
    p.cluster_index = c;
    return p;
}

}  // namespace ccvol
