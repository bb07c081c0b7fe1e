#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ccvol/clustering.hpp"
#include "ccvol/error.hpp"
#include "ccvol/synth.hpp"

using namespace ccvol;

namespace {

GeneratorConfig small_config() {
    GeneratorConfig g;
    g.dims = {8, 24, 24};
    return g;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("samples are a pure function of (config, index)") {
    const GeneratorConfig g = small_config();
    const auto serial = generate(g, 12, 5, 1);
    const auto threaded = generate(g, 12, 5, 4);
    REQUIRE(serial.size() == 12);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].id == sample_id(5 + i));
        CHECK(serial[i].map == threaded[i].map);
        CHECK(serial[i].true_volume_mm3 == threaded[i].true_volume_mm3);
        const SynthSample one = generate_one(g, 5 + i);
        CHECK(one.map == serial[i].map);
    }
    GeneratorConfig other = g;
    other.seed = 2;
    CHECK_FALSE(generate_one(other, 5).map == serial[0].map);
    CHECK(sample_id(42) == "s000042");
}

TEST_CASE("no lesions gives zero volume") {
    GeneratorConfig g = small_config();
    g.lesion_count_mean = 0.0;
    for (const auto& s : generate(g, 10)) {
        CHECK(s.true_volume_mm3 == 0.0);
        CHECK(std::all_of(s.map.values().begin(), s.map.values().end(), [](float v) { return v >= 0.0f && v <= 1.0f; }));
    }
}

TEST_CASE("noiseless, unblurred maps reproduce the mask exactly") {
    GeneratorConfig g = small_config();
    g.noise_regimes = {{1.0, 0.0}};
    g.blur_sigma_mm = 0.0;
    bool any_lesion = false;
    for (const auto& s : generate(g, 40)) {
        const VolumeTriple t = volume_triple(s.map);
        CHECK(t.low_mm3 == s.true_volume_mm3);
        CHECK(t.point_mm3 == s.true_volume_mm3);
        CHECK(t.high_mm3 == s.true_volume_mm3);
        CHECK(conformity_score(t, s.true_volume_mm3) == 0.0);
        any_lesion = any_lesion || s.true_volume_mm3 > 0.0;
        // The true volume is a whole number of voxels.
        const double voxels = s.true_volume_mm3 / s.map.voxel_mm3();
        CHECK(std::abs(voxels - std::round(voxels)) < 1e-9);
    }
    CHECK(any_lesion);
}

TEST_CASE("noise regimes separate in scores and histogram clusters") {
    GeneratorConfig g = small_config();
    g.noise_regimes = {{0.5, 0.02}, {0.5, 0.25}};
    const auto samples = generate(g, 200);
    double sum[2] = {0, 0};
    int count[2] = {0, 0};
    std::vector<Point> features;
    for (const auto& s : samples) {
        const auto r = static_cast<std::size_t>(s.regime_index);
        sum[r] += std::abs(conformity_score(volume_triple(s.map), s.true_volume_mm3));
        ++count[r];
        const HistogramFeature h = histogram_feature(s.map);
        features.emplace_back(h.counts.begin(), h.counts.end());
    }
    REQUIRE(count[0] > 60);
    REQUIRE(count[1] > 60);
    CHECK(sum[1] / count[1] > 2.0 * sum[0] / count[0]);

    const ClusterFit fit = fit_constrained_kmeans(features, 2, 7);
    int agree = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) agree += fit.assignments[i] == samples[i].regime_index;
    const double purity = std::max(agree, static_cast<int>(samples.size()) - agree) / double(samples.size());
    CHECK(purity >= 0.9);
}

TEST_CASE("config validation names the field") {
    GeneratorConfig g = small_config();
    g.noise_regimes = {{0.5, 0.1}, {0.4, 0.2}};
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("noise_regimes"), ValidationError);
    g = small_config();
    g.dims.ny = 0;
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("dims"), ValidationError);
    g = small_config();
    g.lesion_radius_min_mm = 5.0;
    g.lesion_radius_max_mm = 2.0;
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("lesion_radius_range_mm"), ValidationError);
    g = small_config();
    g.blur_sigma_mm = -1.0;
    CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("blur_sigma_mm"), ValidationError);
}

TEST_CASE("coverage experiment reports every replicate, method and regime") {
    ExperimentConfig e;
    e.generator = small_config();
    e.generator.noise_regimes = {{0.5, 0.02}, {0.5, 0.25}};
    e.n_cal = 60;
    e.n_test = 60;
    e.replicates = 2;
    e.k = 2;
    const ExperimentResult r = coverage_experiment(e);
    CHECK(r.rows.size() == 2 * 2 * 3);
    for (const auto& row : r.rows) {
        CHECK(row.coverage >= 0.0);
        CHECK(row.coverage <= 1.0);
        CHECK(row.seed == replicate_seed(e, row.replicate));
        if (row.regime == -1) CHECK(row.n == 60);
    }
    const auto m = r.mean(Method::Clustered, -1);
    CHECK(m.replicates == 2);
    CHECK(experiment_to_csv(r) == experiment_to_csv(coverage_experiment(e)));

    e.n_cal = 1;
    e.k = 2;
    CHECK_THROWS_AS(coverage_experiment(e), ValidationError);
}

}
