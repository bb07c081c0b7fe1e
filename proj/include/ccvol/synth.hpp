#pragma once
// Seeded synthetic (probability map, true volume) pairs.
//
// Each sample: a Poisson number of spherical lesions at uniform positions with
// uniform radii; the ground-truth mask is their union. The probability map is
// the mask blurred by a Gaussian, plus zero-mean Gaussian noise whose sigma is
// drawn per sample from a mixture of noise regimes, clamped to [0, 1].
//
// Random numbers come from Philox4x32-10 keyed on mix_seed(seed, 0) with the
// sample index as stream id, so sample i is a pure function of (config, i).

#include <cstdint>
#include <string>
#include <vector>

#include "ccvol/conformal.hpp"
#include "ccvol/metrics.hpp"
#include "ccvol/probmap.hpp"

namespace ccvol {

struct NoiseRegime {
    double weight = 1.0;
    double sigma = 0.0;
    bool operator==(const NoiseRegime&) const = default;
};

struct GeneratorConfig {
    Dims dims{32, 96, 96};
    Spacing spacing{1.0, 0.7, 0.7};
    double lesion_count_mean = 4.0;
    double lesion_radius_min_mm = 1.0;
    double lesion_radius_max_mm = 4.0;
    std::vector<NoiseRegime> noise_regimes{{1.0, 0.05}};
    double blur_sigma_mm = 0.7;
    std::uint64_t seed = 1;

    // Throws ValidationError naming the offending field.
    void validate() const;
};

struct SynthSample {
    std::string id;
    ProbMap map;
    double true_volume_mm3 = 0.0;
    int regime_index = 0;
};

SynthSample generate_one(const GeneratorConfig& config, std::uint64_t index);

// Samples first_index .. first_index + n - 1. `threads` > 1 splits the index
// range; the output does not depend on it.
std::vector<SynthSample> generate(const GeneratorConfig& config, std::size_t n, std::uint64_t first_index = 0,
                                  unsigned threads = 1);

std::string sample_id(std::uint64_t index);

// ---- coverage experiment ----

struct ExperimentConfig {
    GeneratorConfig generator;
    std::size_t n_cal = 500;
    std::size_t n_test = 1000;
    double alpha = 0.15;
    std::vector<Method> methods{Method::Conventional, Method::Clustered};
    int k = 2;
    std::size_t replicates = 20;
    unsigned threads = 1;

    void validate() const;
};

struct ExperimentRow {
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    Method method = Method::Conventional;
    int regime = -1;  // -1: all test samples
    std::size_t n = 0;
    double coverage = 0.0;
    std::optional<double> ca_rate, ce_rate, car_minus_cer;
};

struct ExperimentResult {
    std::vector<ExperimentRow> rows;
    // Flags raised during calibration, e.g. replicate/cluster pairs whose q was +infinity.
    std::vector<std::string> warnings;

    // Means over replicates of rows matching (method, regime); undefined rates
    // are skipped in their means.
    struct Mean {
        std::size_t replicates = 0;
        double coverage = 0.0;
        double min_coverage = 0.0;
        std::optional<double> car_minus_cer;
    };
    Mean mean(Method method, int regime) const;
};

// Seed of replicate r: mix_seed(generator.seed, r + 1). Calibration and test
// samples are indices [0, n_cal) and [n_cal, n_cal + n_test) of that stream.
std::uint64_t replicate_seed(const ExperimentConfig& config, std::size_t replicate);

ExperimentResult coverage_experiment(const ExperimentConfig& config);

// Header `replicate,seed,method,regime,n,coverage,ca_rate,ce_rate,car_minus_cer`.
std::string experiment_to_csv(const ExperimentResult& result);

}  // namespace ccvol
