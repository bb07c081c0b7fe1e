#pragma once
// Constrained K-means with balanced cluster sizes.
//
// Each assignment step solves, exactly, the transportation problem
//
//   min  sum_i cost[i][assign[i]]
//   s.t. every cluster receives floor(n/k) or ceil(n/k) points,
//
// i.e. the sizes are as equal as n and k allow. The update step is the usual
// centroid update, so the objective never increases between iterations.

#include <cstdint>
#include <span>
#include <vector>

namespace ccvol {

using Point = std::vector<double>;

struct ClusterModel {
    int k = 0;
    std::vector<Point> centers;
    std::vector<int> sizes;              // members per cluster at the final assignment
    int iteration_count = 0;             // assignment steps performed
    double inertia = 0.0;                // sum of squared distances to assigned centers
    std::vector<double> inertia_history; // inertia after each assignment step

    std::size_t feature_dim() const noexcept { return centers.empty() ? 0 : centers.front().size(); }
    bool operator==(const ClusterModel&) const = default;
};

struct ClusterFit {
    ClusterModel model;
    std::vector<int> assignments;
};

inline constexpr int kMaxKMeansIterations = 100;

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

// Min-cost assignment of n rows to k = cost[0].size() columns with every column
// receiving floor(n/k) or ceil(n/k) rows. `cost` is row-major n x k.
// Successive shortest augmenting paths over the k-node cluster graph.
std::vector<int> balanced_assignment(std::span<const double> cost, std::size_t n, std::size_t k);

// Throws ValidationError if k < 1, k > n, dimensions disagree, a component is
// non-finite, or there are fewer than k distinct points.
ClusterFit fit_constrained_kmeans(const std::vector<Point>& points, int k, std::uint64_t seed);

// Index of the nearest center (squared Euclidean); ties go to the lowest index.
// Throws ValidationError on a dimension mismatch.
int assign_nearest(const ClusterModel& model, std::span<const double> point);

}  // namespace ccvol
