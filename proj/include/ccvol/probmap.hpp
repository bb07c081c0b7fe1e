#pragma once
// Voxel probability maps and the quantities derived from them: the thresholded
// (low, point, high) volume triple and the clipped probability histogram.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ccvol {

// Foreground thresholds. A voxel counts towards a volume when its probability
// is strictly greater than the threshold.
inline constexpr double kLowThreshold = 0.7;    // L
inline constexpr double kPointThreshold = 0.5;  // V
inline constexpr double kHighThreshold = 0.3;   // H

// 100 uniform bins over (0, 1]; the 20 at or below 0.2 are discarded.
inline constexpr int kTotalBins = 100;
inline constexpr int kClippedBins = 20;
inline constexpr int kHistogramBins = kTotalBins - kClippedBins;  // 80
inline constexpr double kHistogramFloor = 0.2;

struct Dims {
    std::size_t nz = 0, ny = 0, nx = 0;
    std::size_t voxels() const noexcept { return nz * ny * nx; }
    bool operator==(const Dims&) const = default;
};

struct Spacing {
    double dz = 1.0, dy = 1.0, dx = 1.0;
    double voxel_mm3() const noexcept { return dz * dy * dx; }
    bool operator==(const Spacing&) const = default;
};

// Immutable 3D probability array, C-order (z slowest).
class ProbMap {
public:
    // Throws ValidationError if dims/spacing are invalid, the value count does
    // not match, or any value lies outside [0, 1].
    ProbMap(Dims dims, Spacing spacing, std::vector<float> values);

    const Dims& dims() const noexcept { return dims_; }
    const Spacing& spacing() const noexcept { return spacing_; }
    std::span<const float> values() const noexcept { return values_; }
    float at(std::size_t z, std::size_t y, std::size_t x) const noexcept {
        return values_[(z * dims_.ny + y) * dims_.nx + x];
    }
    double voxel_mm3() const noexcept { return spacing_.voxel_mm3(); }

    bool operator==(const ProbMap&) const = default;

private:
    Dims dims_;
    Spacing spacing_;
    std::vector<float> values_;
};

struct VolumeTriple {
    double low_mm3 = 0.0;
    double point_mm3 = 0.0;
    double high_mm3 = 0.0;
    bool operator==(const VolumeTriple&) const = default;
};

struct HistogramFeature {
    std::array<double, kHistogramBins> counts{};
    bool operator==(const HistogramFeature&) const = default;
};

struct SampleRecord {
    std::string id;
    HistogramFeature feature;
    VolumeTriple triple;
    std::optional<double> true_volume_mm3;
};

// Upper edge of histogram bin b (lower edge of bin b + 1). Edges are the
// correctly rounded decimals 0.21, 0.22, ..., 1.00.
double histogram_upper_edge(int bin) noexcept;

// Element-wise mean. Throws ValidationError on an empty list or a dims/spacing
// mismatch, naming the offending index. Per-voxel sums are taken over sorted
// values, so the result does not depend on argument order.
ProbMap mean_maps(std::span<const ProbMap> maps);

VolumeTriple volume_triple(const ProbMap& map);

HistogramFeature histogram_feature(const ProbMap& map);

// Featurize a map into a record (feature + volume triple).
SampleRecord make_record(std::string id, const ProbMap& map, std::optional<double> true_volume_mm3 = std::nullopt);

}  // namespace ccvol
