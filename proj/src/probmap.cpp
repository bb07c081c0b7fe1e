#include "ccvol/probmap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccvol/error.hpp"

namespace ccvol {

ProbMap::ProbMap(Dims dims, Spacing spacing, std::vector<float> values)
    : dims_(dims), spacing_(spacing), values_(std::move(values)) {
    if (dims_.nz < 1 || dims_.ny < 1 || dims_.nx < 1) {
        throw ValidationError("probability map dims must all be >= 1");
    }
    for (double s : {spacing_.dz, spacing_.dy, spacing_.dx}) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw ValidationError("probability map spacing must be finite and > 0");
        }
    }
    if (values_.size() != dims_.voxels()) {
        throw ValidationError("probability map has " + std::to_string(values_.size()) + " values, dims require " +
                              std::to_string(dims_.voxels()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const float v = values_[i];
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw ValidationError("probability value out of [0, 1] at flat index " + std::to_string(i) + ": " +
                                  std::to_string(v));
        }
    }
}

double histogram_upper_edge(int bin) noexcept {
    return static_cast<double>(kClippedBins + bin + 1) / kTotalBins;
}

ProbMap mean_maps(std::span<const ProbMap> maps) {
    if (maps.empty()) throw ValidationError("mean_maps: empty map list");
    const ProbMap& first = maps.front();
    for (std::size_t m = 1; m < maps.size(); ++m) {
        if (!(maps[m].dims() == first.dims())) {
            throw ValidationError("mean_maps: map " + std::to_string(m) + " dims differ from map 0");
        }
        if (!(maps[m].spacing() == first.spacing())) {
            throw ValidationError("mean_maps: map " + std::to_string(m) + " spacing differs from map 0");
        }
    }
    if (maps.size() == 1) return first;

    const std::size_t n = first.dims().voxels();
    const double count = static_cast<double>(maps.size());
    std::vector<float> out(n);
    std::vector<float> column(maps.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < maps.size(); ++m) column[m] = maps[m].values()[i];
        std::sort(column.begin(), column.end());
        double sum = 0.0;
        for (float v : column) sum += v;
        out[i] = std::clamp(static_cast<float>(sum / count), 0.0f, 1.0f);
    }
    return ProbMap(first.dims(), first.spacing(), std::move(out));
}

VolumeTriple volume_triple(const ProbMap& map) {
    std::size_t low = 0, point = 0, high = 0;
    for (float f : map.values()) {
        const double v = f;
        low += v > kLowThreshold;
        point += v > kPointThreshold;
        high += v > kHighThreshold;
    }
    const double voxel = map.voxel_mm3();
    return {static_cast<double>(low) * voxel, static_cast<double>(point) * voxel, static_cast<double>(high) * voxel};
}

HistogramFeature histogram_feature(const ProbMap& map) {
    HistogramFeature h;
    for (float f : map.values()) {
        const double v = f;
        if (!(v > kHistogramFloor)) continue;
        int b = static_cast<int>(std::ceil((v - kHistogramFloor) * kTotalBins)) - 1;
        b = std::clamp(b, 0, kHistogramBins - 1);
        // Fix up rounding in the estimate against the exact edges.
        while (b > 0 && v <= histogram_upper_edge(b - 1)) --b;
        while (b < kHistogramBins - 1 && v > histogram_upper_edge(b)) ++b;
        h.counts[static_cast<std::size_t>(b)] += 1.0;
    }
    return h;
}

SampleRecord make_record(std::string id, const ProbMap& map, std::optional<double> true_volume_mm3) {
    if (true_volume_mm3 && !(*true_volume_mm3 >= 0.0)) {
        throw ValidationError("record " + id + ": true volume must be >= 0");
    }
    return SampleRecord{std::move(id), histogram_feature(map), volume_triple(map), true_volume_mm3};
}

}  // namespace ccvol
