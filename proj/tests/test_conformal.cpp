#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ccvol/conformal.hpp"
#include "ccvol/error.hpp"
#include "test_support.hpp"

using namespace ccvol;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ceil((n+1)(100-a)/100) in integers, for alpha = a/100.
std::size_t rank_oracle(std::size_t n, int a) {
    return ((n + 1) * static_cast<std::size_t>(100 - a) + 99) / 100;
}

double sort_oracle(std::vector<double> s, std::size_t rank) {
    if (rank > s.size()) return kInf;
    std::sort(s.begin(), s.end());
    return s[rank - 1];
}

SampleRecord record_with_score(const std::string& id, double score, double base = 100.0) {
    // L = base, H = base + 10, V_t = base - score, so score = L - V_t for score >= -5.
    SampleRecord r;
    r.id = id;
    r.triple = {base, base + 5.0, base + 10.0};
    r.true_volume_mm3 = base - score;
    return r;
}

}  // namespace

TEST_SUITE("conformal") {

TEST_CASE("conformity score examples") {
    CHECK(conformity_score({10, 15, 20}, 15) == -5.0);
    CHECK(conformity_score({10, 15, 20}, 25) == 5.0);
    CHECK(conformity_score({10, 15, 20}, 8) == 2.0);
    CHECK(conformity_score({0, 0, 0}, 0) == 0.0);
    CHECK_THROWS_AS(conformity_score({0, 0, 0}, -1), ValidationError);
}

TEST_CASE("quantile examples") {
    CHECK(conformal_quantile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.5) == 6.0);
    CHECK(conformal_quantile({5}, 0.15) == kInf);
    CHECK(conformal_quantile({3, 1, 2}, 0.3) == 3.0);
    CHECK(conformal_quantile({2, 2, 2, 1}, 0.5) == 2.0);
    CHECK(conformal_rank(849, 0.15) == 723);
    CHECK_THROWS_AS(conformal_quantile({}, 0.1), ValidationError);
    CHECK_THROWS_AS(conformal_quantile({1}, 0.0), ValidationError);
    CHECK_THROWS_AS(conformal_quantile({1}, 1.0), ValidationError);
    CHECK_THROWS_AS(conformal_quantile({1}, std::nan("")), ValidationError);
}

TEST_CASE("quantile equals the integer-rank sort oracle") {
    std::mt19937_64 gen(12);
    std::normal_distribution<double> z(0.0, 10.0);
    for (std::size_t n = 1; n <= 1000; n += (n < 220 ? 1 : 37)) {
        std::vector<double> s(n);
        for (double& x : s) x = std::round(z(gen) * 4.0) / 4.0;  // ties included
        for (int a = 1; a <= 99; ++a) {
            const double alpha = a / 100.0;
            REQUIRE(conformal_rank(n, alpha) == rank_oracle(n, a));
            REQUIRE(conformal_quantile(s, alpha) == sort_oracle(s, rank_oracle(n, a)));
        }
    }
}

TEST_CASE("conventional calibration") {
    CHECK(calibrate_conventional({record_with_score("a", 1.0)}, 0.15).q_global == kInf);

    std::vector<SampleRecord> nine;
    for (int i = 1; i <= 9; ++i) nine.push_back(record_with_score("r" + std::to_string(i), i));
    CHECK(calibrate_conventional(nine, 0.1).q_global == 9.0);

    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> u(-5.0, 50.0);
    std::vector<SampleRecord> recs;
    std::vector<double> scores;
    for (int i = 0; i < 199; ++i) {
        recs.push_back(record_with_score("r" + std::to_string(i), u(gen)));
        scores.push_back(conformity_score(recs.back().triple, *recs.back().true_volume_mm3));
    }
    const CalibrationModel m = calibrate_conventional(recs, 0.15);
    CHECK(m.q_global == sort_oracle(scores, 170));
    CHECK(m.n_calibration == 199);
    CHECK(m.method == Method::Conventional);

    recs[3].true_volume_mm3.reset();
    CHECK_THROWS_AS(calibrate_conventional(recs, 0.15), ValidationError);
    CHECK_THROWS_AS(calibrate_conventional({}, 0.15), ValidationError);
}

TEST_CASE("clustered calibration") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Two groups with distinct histograms: low-noise scores near 0, high-noise near 50.
    std::vector<SampleRecord> recs;
    std::vector<double> g0, g1;
    for (int i = 0; i < 120; ++i) {
        const bool noisy = i % 2 == 1;
        SampleRecord r = record_with_score("r" + std::to_string(i), noisy ? 50.0 + 10.0 * u(gen) : u(gen));
        for (int b = 0; b < kHistogramBins; ++b)
            r.feature.counts[static_cast<std::size_t>(b)] = (noisy ? (b < 40 ? 30.0 : 2.0) : (b < 40 ? 1.0 : 20.0)) +
                                                            std::floor(3.0 * u(gen));
        (noisy ? g1 : g0).push_back(conformity_score(r.triple, *r.true_volume_mm3));
        recs.push_back(std::move(r));
    }
    const ClusteredCalibration c = calibrate_clustered_detailed(recs, 0.15, 2, 3);
    REQUIRE(c.model.q_per_cluster);
    for (std::size_t i = 0; i < recs.size(); ++i) CHECK(c.assignments[i] == c.assignments[i % 2]);
    const int noisy_cluster = c.assignments[1];
    CHECK((*c.model.q_per_cluster)[static_cast<std::size_t>(noisy_cluster)] == sort_oracle(g1, rank_oracle(60, 15)));
    CHECK((*c.model.q_per_cluster)[static_cast<std::size_t>(1 - noisy_cluster)] ==
          sort_oracle(g0, rank_oracle(60, 15)));
    CHECK(c.model.q_global == calibrate_conventional(recs, 0.15).q_global);

    const CalibrationModel one = calibrate_clustered(recs, 0.15, 1, 3);
    CHECK(*one.q_per_cluster == std::vector<double>{calibrate_conventional(recs, 0.15).q_global});

    CHECK_THROWS_AS(calibrate_clustered(recs, 0.15, 0, 3), ValidationError);
    CHECK_THROWS_AS(calibrate_clustered(std::vector<SampleRecord>(recs.begin(), recs.begin() + 3), 0.15, 4, 3),
                    ValidationError);
}

TEST_CASE("clustered calibration balances 864 records into 5 clusters") {
    std::mt19937_64 gen(864);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<SampleRecord> recs;
    for (int i = 0; i < 864; ++i) {
        SampleRecord r = record_with_score("r" + std::to_string(i), 10.0 * u(gen));
        for (double& h : r.feature.counts) h = std::floor(50.0 * u(gen));
        recs.push_back(std::move(r));
    }
    const CalibrationModel m = calibrate_clustered(recs, 0.15, 5, 1);
    std::vector<int> sizes = m.cluster_model->sizes;
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<int>{172, 173, 173, 173, 173});
}

TEST_CASE("prediction examples") {
    CalibrationModel m;
    m.q_global = 2.0;
    const IntervalPrediction p = predict_interval(m, {8, 12, 22});
    CHECK(p.low_mm3 == 6.0);
    CHECK(p.point_mm3 == 12.0);
    CHECK(p.high_mm3 == 24.0);
    CHECK_FALSE(p.cluster_index);

    const IntervalPrediction widened = apply_correction({10, 15, 20}, 4.0);
    CHECK(widened.low_mm3 == 6.0);
    CHECK(widened.high_mm3 == 24.0);
    const IntervalPrediction narrowed = apply_correction({2, 5, 9}, -1.0);
    CHECK(narrowed.low_mm3 == 3.0);
    CHECK(narrowed.high_mm3 == 8.0);
    const IntervalPrediction collapsed = apply_correction({2, 5, 9}, -10.0);
    CHECK(collapsed.degenerate);
    CHECK(collapsed.low_mm3 == 0.0);
    CHECK(collapsed.high_mm3 == 0.0);
    CHECK(collapsed.point_mm3 == 5.0);

    const IntervalPrediction clipped = apply_correction({1, 4, 5}, 3.0);
    CHECK(clipped.low_mm3 == 0.0);
    CHECK(clipped.high_mm3 == 8.0);

    const IntervalPrediction shrunk = apply_correction({4, 6, 9}, -1.0);
    CHECK(shrunk.low_mm3 == 5.0);
    CHECK(shrunk.high_mm3 == 8.0);
    CHECK_FALSE(shrunk.degenerate);

    const IntervalPrediction crossed = apply_correction({4, 6, 9}, -5.0);
    CHECK(crossed.degenerate);
    CHECK(crossed.low_mm3 == 4.0);
    CHECK(crossed.high_mm3 == 4.0);

    const IntervalPrediction unbounded = apply_correction({4, 6, 9}, kInf);
    CHECK(unbounded.low_mm3 == 0.0);
    CHECK(unbounded.high_mm3 == kInf);

    const IntervalPrediction unchanged = apply_correction({4, 6, 9}, 0.0);
    CHECK(unchanged.low_mm3 == 4.0);
    CHECK(unchanged.high_mm3 == 9.0);

    CalibrationModel clustered;
    clustered.method = Method::Clustered;
    CHECK_THROWS_AS(predict_interval(clustered, {1, 2, 3}), ValidationError);
}

TEST_CASE("interval width is non-decreasing in q") {
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int t = 0; t < 500; ++t) {
        double a = u(gen), b = u(gen), c = u(gen);
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        const double q1 = u(gen) - 50.0, q2 = q1 + u(gen) / 10.0;
        const IntervalPrediction p1 = apply_correction({a, b, c}, q1), p2 = apply_correction({a, b, c}, q2);
        CHECK(p1.low_mm3 <= p1.high_mm3);
        CHECK(p2.high_mm3 - p2.low_mm3 >= p1.high_mm3 - p1.low_mm3);
        if (!p1.degenerate) {
            CHECK(p2.low_mm3 <= p1.low_mm3);
            CHECK(p2.high_mm3 >= p1.high_mm3);
        }
    }
}

TEST_CASE("model json round trip") {
    CalibrationModel m;
    m.alpha = 0.15;
    m.method = Method::Clustered;
    m.q_global = 3.25;
    m.n_calibration = 7;
    m.created_from = "unit test";
    ClusterModel cm;
    cm.k = 2;
    cm.centers = {{0.1, 1.0 / 3.0}, {2.5, 1e-17}};
    cm.sizes = {4, 3};
    cm.iteration_count = 2;
    cm.inertia = 0.7;
    cm.inertia_history = {0.9, 0.7};
    m.cluster_model = cm;
    m.q_per_cluster = std::vector<double>{kInf, -1.5};
    CHECK(model_from_json(model_to_json(m)) == m);

    CalibrationModel conv;
    conv.q_global = kInf;
    CHECK(model_from_json(model_to_json(conv)) == conv);

    const auto dir = ccvol::testing::fresh_dir("conformal_model");
    save_model(m, dir / "m.json");
    CHECK(load_model(dir / "m.json") == m);

    CHECK_THROWS_AS(model_from_json("{not json"), ValidationError);
    CHECK_THROWS_AS(model_from_json("{}"), ValidationError);
    std::string bumped = model_to_json(conv);
    const auto pos = bumped.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    bumped.replace(pos, 19, "\"format_version\": 2");
    CHECK_THROWS_AS(model_from_json(bumped), ValidationError);
    CHECK_THROWS_AS(load_model(dir / "absent.json"), ValidationError);
}

}
