#pragma once
// Split conformal calibration of volume intervals.
//
// A calibration sample's conformity score is how far its true volume falls
// outside the pre-calibration interval [L, H] (negative when inside). The
// correction q is the ceil((n+1)(1-alpha))-th smallest score, and test
// intervals become [L - q, H + q]. The clustered variant computes one q per
// histogram cluster and applies the q of the nearest cluster center.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ccvol/clustering.hpp"
#include "ccvol/probmap.hpp"

namespace ccvol {

enum class Method { Conventional, Clustered };

const char* to_string(Method m) noexcept;
Method parse_method(const std::string& text);

struct CalibrationModel {
    double alpha = 0.1;
    Method method = Method::Conventional;
    double q_global = 0.0;  // may be +infinity
    std::optional<ClusterModel> cluster_model;
    std::optional<std::vector<double>> q_per_cluster;
    std::size_t n_calibration = 0;
    std::string created_from;

    bool operator==(const CalibrationModel&) const = default;
};

struct IntervalPrediction {
    double low_mm3 = 0.0;
    double point_mm3 = 0.0;
    double high_mm3 = 0.0;  // may be +infinity
    std::optional<int> cluster_index;
    double q_applied = 0.0;
    // Set when a negative correction crossed the bounds and the interval was
    // collapsed to a single value.
    bool degenerate = false;

    bool operator==(const IntervalPrediction&) const = default;
};

// max(L - V_t, V_t - H). Throws ValidationError if true_volume < 0.
double conformity_score(const VolumeTriple& triple, double true_volume);

// Rank ceil((n+1)(1-alpha)), 1-indexed. Products within 1e-9 (relative) of an
// integer are taken as that integer, so decimal alphas such as 0.15 give the
// rank exact arithmetic would.
std::size_t conformal_rank(std::size_t n, double alpha);

// The conformal_rank-th smallest score, or +infinity when the rank exceeds n.
// Throws ValidationError on empty scores or alpha outside (0, 1).
double conformal_quantile(std::vector<double> scores, double alpha);

CalibrationModel calibrate_conventional(const std::vector<SampleRecord>& records, double alpha);

CalibrationModel calibrate_clustered(const std::vector<SampleRecord>& records, double alpha, int k,
                                     std::uint64_t seed);

// Clustered calibration plus the fitted cluster of each calibration record.
struct ClusteredCalibration {
    CalibrationModel model;
    std::vector<int> assignments;
};
ClusteredCalibration calibrate_clustered_detailed(const std::vector<SampleRecord>& records, double alpha, int k,
                                                  std::uint64_t seed);

// Clustered models require `feature`; throws ValidationError otherwise.
IntervalPrediction predict_interval(const CalibrationModel& model, const VolumeTriple& triple,
                                    const HistogramFeature* feature = nullptr);
// Interval for a given correction q (q may be negative or +infinity).
IntervalPrediction apply_correction(const VolumeTriple& triple, double q);

// ---- persistence ----

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const CalibrationModel& model);
CalibrationModel model_from_json(const std::string& text);
void save_model(const CalibrationModel& model, const std::filesystem::path& path);
CalibrationModel load_model(const std::filesystem::path& path);

}  // namespace ccvol
