#include "ccvol/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>

#include "ccvol/error.hpp"
#include "ccvol/rng.hpp"

namespace ccvol {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kKMeansStream = 0x6b6d65616e73ull;  // "kmeans"

// Strict improvement with a small relative margin, so rounding noise in the
// move costs cannot create spurious negative cycles.
inline bool improves(double candidate, double current) noexcept {
    if (current == kInf) return candidate < kInf;
    return candidate < current - 1e-12 * (1.0 + std::abs(current));
}

}  // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::vector<int> balanced_assignment(std::span<const double> cost, std::size_t n, std::size_t k) {
    if (k == 0 || n < k) throw ValidationError("balanced_assignment: need 1 <= k <= n");
    if (cost.size() != n * k) throw ValidationError("balanced_assignment: cost matrix size mismatch");

    const std::size_t base = n / k;   // every cluster gets at least this many
    const std::size_t extra = n % k;  // this many clusters get one more
    const std::size_t overflow = k;   // node index of the shared "one more" slot pool

    auto c = [&](std::size_t i, std::size_t j) { return cost[i * k + j]; };

    std::vector<int> assign(n, -1);
    std::vector<std::size_t> size(k, 0);
    std::size_t extras_used = 0;

    // moves[a * k + b]: points in cluster a keyed by the cost change of moving them to b.
    using Entry = std::pair<double, std::size_t>;
    using MinHeap = std::priority_queue<Entry, std::vector<Entry>, std::greater<>>;
    std::vector<MinHeap> moves(k * k);

    auto cheapest_move = [&](std::size_t a, std::size_t b) -> const Entry* {
        auto& heap = moves[a * k + b];
        while (!heap.empty() && assign[heap.top().second] != static_cast<int>(a)) heap.pop();
        return heap.empty() ? nullptr : &heap.top();
    };
    auto place = [&](std::size_t p, std::size_t cluster) {
        assign[p] = static_cast<int>(cluster);
        for (std::size_t b = 0; b < k; ++b) {
            if (b != cluster) moves[cluster * k + b].emplace(c(p, b) - c(p, cluster), p);
        }
    };

    const std::size_t nodes = k + 1;
    std::vector<double> dist(nodes);
    std::vector<long> pred(nodes);            // -1: reached directly from the new point
    std::vector<long> pred_point(nodes);      // point moved along the arc into this node, or -1
    std::vector<char> on_path(nodes);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            dist[j] = c(i, j);
            pred[j] = -1;
            pred_point[j] = -1;
        }
        dist[overflow] = kInf;
        pred[overflow] = -1;
        pred_point[overflow] = -1;

        // Bellman-Ford over the k cluster nodes plus the overflow node.
        for (std::size_t round = 0; round < nodes; ++round) {
            bool changed = false;
            for (std::size_t a = 0; a < k; ++a) {
                if (dist[a] == kInf) continue;
                for (std::size_t b = 0; b < k; ++b) {
                    if (b == a) continue;
                    const Entry* e = cheapest_move(a, b);
                    if (!e) continue;
                    const double nd = dist[a] + e->first;
                    if (improves(nd, dist[b])) {
                        dist[b] = nd;
                        pred[b] = static_cast<long>(a);
                        pred_point[b] = static_cast<long>(e->second);
                        changed = true;
                    }
                }
                if (extra > 0 && size[a] <= base && improves(dist[a], dist[overflow])) {
                    dist[overflow] = dist[a];
                    pred[overflow] = static_cast<long>(a);
                    pred_point[overflow] = -1;
                    changed = true;
                }
            }
            if (extra > 0 && dist[overflow] < kInf) {
                // Take over the extra slot of a cluster currently holding one.
                for (std::size_t b = 0; b < k; ++b) {
                    if (size[b] == base + 1 && improves(dist[overflow], dist[b])) {
                        dist[b] = dist[overflow];
                        pred[b] = static_cast<long>(overflow);
                        pred_point[b] = -1;
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }

        long end = -1;
        double best = kInf;
        for (std::size_t j = 0; j < k; ++j) {
            if (size[j] < base && dist[j] < best) {
                best = dist[j];
                end = static_cast<long>(j);
            }
        }
        if (extra > 0 && extras_used < extra && dist[overflow] < best) end = static_cast<long>(overflow);
        if (end < 0) throw std::logic_error("balanced_assignment: no augmenting path");

        // Walk back to the entry cluster, collecting moves.
        std::fill(on_path.begin(), on_path.end(), 0);
        std::vector<std::pair<std::size_t, std::size_t>> path_moves;  // (point, to)
        long node = end;
        long entry = -1;
        while (node >= 0) {
            if (on_path[static_cast<std::size_t>(node)]) throw std::logic_error("balanced_assignment: cyclic path");
            on_path[static_cast<std::size_t>(node)] = 1;
            const auto v = static_cast<std::size_t>(node);
            if (pred_point[v] >= 0) path_moves.emplace_back(static_cast<std::size_t>(pred_point[v]), v);
            if (pred[v] < 0) entry = node;
            node = pred[v];
        }
        for (auto [p, to] : path_moves) {
            --size[static_cast<std::size_t>(assign[p])];
            ++size[to];
            place(p, to);
        }
        ++size[static_cast<std::size_t>(entry)];
        place(i, static_cast<std::size_t>(entry));
        extras_used = static_cast<std::size_t>(std::count(size.begin(), size.end(), base + 1));
    }
    return assign;
}

namespace {

std::vector<Point> kmeanspp_init(const std::vector<Point>& pts, int k, std::uint64_t seed) {
    CounterRng rng(seed, kKMeansStream);
    const std::size_t n = pts.size();
    std::vector<Point> centers;
    centers.push_back(pts[rng.below(n)]);
    std::vector<double> nearest(n, kInf);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(pts[i], centers.back()));
            total += nearest[i];
        }
        const double target = rng.uniform() * total;
        double running = 0.0;
        std::size_t chosen = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (nearest[i] <= 0.0) continue;
            running += nearest[i];
            chosen = i;
            if (running > target) break;
        }
        centers.push_back(pts[chosen]);
    }
    return centers;
}

}  // namespace

ClusterFit fit_constrained_kmeans(const std::vector<Point>& points, int k, std::uint64_t seed) {
    const std::size_t n = points.size();
    if (k < 1) throw ValidationError("constrained k-means: k must be >= 1");
    if (static_cast<std::size_t>(k) > n) {
        throw ValidationError("constrained k-means: k = " + std::to_string(k) + " exceeds the number of samples " +
                              std::to_string(n));
    }
    const std::size_t dim = points.front().size();
    if (dim == 0) throw ValidationError("constrained k-means: empty feature vectors");
    for (std::size_t i = 0; i < n; ++i) {
        if (points[i].size() != dim) throw ValidationError("constrained k-means: feature " + std::to_string(i) + " has wrong dimension");
        for (double v : points[i]) {
            if (!std::isfinite(v)) throw ValidationError("constrained k-means: non-finite component in feature " + std::to_string(i));
        }
    }

    // Work in lexicographic order so the result does not depend on input order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
    std::vector<Point> pts;
    pts.reserve(n);
    for (std::size_t idx : order) pts.push_back(points[idx]);
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < n; ++i) distinct += pts[i] != pts[i - 1];
    if (distinct < static_cast<std::size_t>(k)) {
        throw ValidationError("constrained k-means: only " + std::to_string(distinct) + " distinct features for k = " +
                              std::to_string(k));
    }

    const auto kk = static_cast<std::size_t>(k);
    std::vector<Point> centers = kmeanspp_init(pts, k, seed);
    std::vector<double> cost(n * kk);
    std::vector<int> current;
    ClusterModel model;
    model.k = k;

    auto total_cost = [&](const std::vector<int>& a) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += cost[i * kk + static_cast<std::size_t>(a[i])];
        return s;
    };

    for (int it = 1; it <= kMaxKMeansIterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < kk; ++j) cost[i * kk + j] = squared_distance(pts[i], centers[j]);
        }
        std::vector<int> next = balanced_assignment(cost, n, kk);
        double objective = total_cost(next);
        model.iteration_count = it;
        if (!current.empty()) {
            const double kept = total_cost(current);
            if (next == current || objective >= kept) {
                model.inertia_history.push_back(kept);
                break;
            }
        }
        model.inertia_history.push_back(objective);
        current = std::move(next);
        if (it == kMaxKMeansIterations) break;

        std::vector<Point> sums(kk, Point(dim, 0.0));
        std::vector<std::size_t> counts(kk, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(current[i]);
            ++counts[c];
            for (std::size_t d = 0; d < dim; ++d) sums[c][d] += pts[i][d];
        }
        for (std::size_t c = 0; c < kk; ++c) {
            for (std::size_t d = 0; d < dim; ++d) sums[c][d] /= static_cast<double>(counts[c]);
        }
        centers = std::move(sums);
    }

    model.centers = std::move(centers);
    model.inertia = model.inertia_history.back();
    model.sizes.assign(kk, 0);
    ClusterFit fit;
    fit.assignments.assign(n, -1);
    for (std::size_t s = 0; s < n; ++s) {
        fit.assignments[order[s]] = current[s];
        ++model.sizes[static_cast<std::size_t>(current[s])];
    }
    fit.model = std::move(model);
    return fit;
}

int assign_nearest(const ClusterModel& model, std::span<const double> point) {
    if (model.centers.empty()) throw ValidationError("assign_nearest: model has no centers");
    if (point.size() != model.feature_dim()) {
        throw ValidationError("assign_nearest: feature dimension " + std::to_string(point.size()) +
                              " does not match model dimension " + std::to_string(model.feature_dim()));
    }
    int best = 0;
    double best_d = squared_distance(point, model.centers[0]);
    for (std::size_t c = 1; c < model.centers.size(); ++c) {
        const double d = squared_distance(point, model.centers[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace ccvol
