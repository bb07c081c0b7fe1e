#include "ccvol/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>

#include "ccvol/error.hpp"
#include "ccvol/io.hpp"
#include "ccvol/rng.hpp"

namespace ccvol {

void GeneratorConfig::validate() const {
    if (dims.nz < 1 || dims.ny < 1 || dims.nx < 1) throw ValidationError("dims: every component must be >= 1");
    for (double s : {spacing.dz, spacing.dy, spacing.dx}) {
        if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("spacing_mm: every component must be finite and > 0");
    }
    if (!(lesion_count_mean >= 0.0) || lesion_count_mean > 100.0) {
        throw ValidationError("lesion_count_mean: must lie in [0, 100]");
    }
    if (!(lesion_radius_min_mm > 0.0) || !(lesion_radius_max_mm >= lesion_radius_min_mm) ||
        !std::isfinite(lesion_radius_max_mm)) {
        throw ValidationError("lesion_radius_range_mm: need 0 < min <= max");
    }
    if (noise_regimes.empty()) throw ValidationError("noise_regimes: at least one regime is required");
    double total = 0.0;
    for (const auto& r : noise_regimes) {
        if (!(r.weight >= 0.0)) throw ValidationError("noise_regimes: weights must be >= 0");
        if (!(r.sigma >= 0.0) || !std::isfinite(r.sigma)) throw ValidationError("noise_regimes: sigmas must be >= 0");
        total += r.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("noise_regimes: weights must sum to 1");
    if (!(blur_sigma_mm >= 0.0) || !std::isfinite(blur_sigma_mm)) throw ValidationError("blur_sigma_mm: must be >= 0");
}

std::string sample_id(std::uint64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(index));
    return buf;
}

namespace {

// In-place 1D Gaussian along one axis of a C-order (nz, ny, nx) volume, zero outside.
void blur_axis(std::vector<double>& data, const Dims& d, int axis, double sigma_vox) {
    if (sigma_vox <= 0.0) return;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma_vox));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        const double w = std::exp(-0.5 * (t * t) / (sigma_vox * sigma_vox));
        kernel[static_cast<std::size_t>(t + radius)] = w;
        total += w;
    }
    for (double& w : kernel) w /= total;

    const std::size_t len = axis == 0 ? d.nz : axis == 1 ? d.ny : d.nx;
    const std::size_t stride = axis == 0 ? d.ny * d.nx : axis == 1 ? d.nx : 1;
    const std::size_t lines = d.voxels() / len;
    std::vector<double> line(len), out(len);
    for (std::size_t l = 0; l < lines; ++l) {
        // Base offset of line l: enumerate all positions with axis coordinate 0.
        std::size_t base;
        if (axis == 0) {
            base = l;
        } else if (axis == 1) {
            base = (l / d.nx) * d.ny * d.nx + (l % d.nx);
        } else {
            base = l * d.nx;
        }
        bool any = false;
        for (std::size_t i = 0; i < len; ++i) {
            line[i] = data[base + i * stride];
            any = any || line[i] != 0.0;
        }
        if (!any) continue;
        const auto r = static_cast<std::size_t>(radius);
        for (std::size_t i = 0; i < len; ++i) {
            double s = 0.0;
            if (i >= r && i + r < len) {
                const double* src = &line[i - r];
                for (std::size_t t = 0; t < kernel.size(); ++t) s += kernel[t] * src[t];
            } else {
                for (int t = -radius; t <= radius; ++t) {
                    const long j = static_cast<long>(i) + t;
                    if (j < 0 || j >= static_cast<long>(len)) continue;
                    s += kernel[static_cast<std::size_t>(t + radius)] * line[static_cast<std::size_t>(j)];
                }
            }
            out[i] = s;
        }
        for (std::size_t i = 0; i < len; ++i) data[base + i * stride] = out[i];
    }
}

}  // namespace

SynthSample generate_one(const GeneratorConfig& config, std::uint64_t index) {
    const Dims& d = config.dims;
    const Spacing& sp = config.spacing;
    CounterRng rng(mix_seed(config.seed, 0), index);

    int regime = static_cast<int>(config.noise_regimes.size()) - 1;
    {
        const double u = rng.uniform();
        double cumulative = 0.0;
        for (std::size_t r = 0; r < config.noise_regimes.size(); ++r) {
            cumulative += config.noise_regimes[r].weight;
            if (u < cumulative) {
                regime = static_cast<int>(r);
                break;
            }
        }
    }

    std::vector<double> field(d.voxels(), 0.0);
    std::size_t mask_count = 0;
    const std::uint64_t lesions = rng.poisson(config.lesion_count_mean);
    for (std::uint64_t l = 0; l < lesions; ++l) {
        const double cz = rng.uniform() * static_cast<double>(d.nz) * sp.dz;
        const double cy = rng.uniform() * static_cast<double>(d.ny) * sp.dy;
        const double cx = rng.uniform() * static_cast<double>(d.nx) * sp.dx;
        const double r = config.lesion_radius_min_mm +
                         (config.lesion_radius_max_mm - config.lesion_radius_min_mm) * rng.uniform();
        auto range = [r](double c, double s, std::size_t n) {
            const long lo = std::max(0L, static_cast<long>(std::floor((c - r) / s)));
            const long hi = std::min(static_cast<long>(n) - 1, static_cast<long>(std::ceil((c + r) / s)));
            return std::pair{lo, hi};
        };
        const auto [z0, z1] = range(cz, sp.dz, d.nz);
        const auto [y0, y1] = range(cy, sp.dy, d.ny);
        const auto [x0, x1] = range(cx, sp.dx, d.nx);
        for (long z = z0; z <= z1; ++z) {
            const double dz = static_cast<double>(z) * sp.dz - cz;
            for (long y = y0; y <= y1; ++y) {
                const double dy = static_cast<double>(y) * sp.dy - cy;
                for (long x = x0; x <= x1; ++x) {
                    const double dx = static_cast<double>(x) * sp.dx - cx;
                    if (dz * dz + dy * dy + dx * dx > r * r) continue;
                    double& v = field[(static_cast<std::size_t>(z) * d.ny + static_cast<std::size_t>(y)) * d.nx +
                                      static_cast<std::size_t>(x)];
                    if (v == 0.0) {
                        v = 1.0;
                        ++mask_count;
                    }
                }
            }
        }
    }

    if (config.blur_sigma_mm > 0.0 && mask_count > 0) {
        blur_axis(field, d, 0, config.blur_sigma_mm / sp.dz);
        blur_axis(field, d, 1, config.blur_sigma_mm / sp.dy);
        blur_axis(field, d, 2, config.blur_sigma_mm / sp.dx);
    }

    const double sigma = config.noise_regimes[static_cast<std::size_t>(regime)].sigma;
    std::vector<float> values(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        double v = field[i];
        if (sigma > 0.0) v += sigma * rng.normal();
        values[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }

    return SynthSample{sample_id(index), ProbMap(d, sp, std::move(values)),
                       static_cast<double>(mask_count) * sp.voxel_mm3(), regime};
}

namespace {

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

std::vector<SynthSample> generate(const GeneratorConfig& config, std::size_t n, std::uint64_t first_index,
                                  unsigned threads) {
    config.validate();
    if (n < 1) throw ValidationError("n: must be >= 1");
    std::vector<std::optional<SynthSample>> slots(n);
    parallel_for(n, threads, [&](std::size_t i) { slots[i] = generate_one(config, first_index + i); });
    std::vector<SynthSample> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// ---- coverage experiment ----

void ExperimentConfig::validate() const {
    generator.validate();
    if (n_cal < 1) throw ValidationError("n_cal: must be >= 1");
    if (n_test < 1) throw ValidationError("n_test: must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha: must lie in (0, 1)");
    if (methods.empty()) throw ValidationError("method: at least one method is required");
    if (k < 1) throw ValidationError("k: must be >= 1");
    if (replicates < 1) throw ValidationError("seeds: at least one replicate is required");
}

std::uint64_t replicate_seed(const ExperimentConfig& config, std::size_t replicate) {
    return mix_seed(config.generator.seed, replicate + 1);
}

ExperimentResult::Mean ExperimentResult::mean(Method method, int regime) const {
    Mean m;
    m.min_coverage = std::numeric_limits<double>::infinity();
    double car_sum = 0.0;
    std::size_t car_n = 0;
    for (const auto& row : rows) {
        if (row.method != method || row.regime != regime) continue;
        ++m.replicates;
        m.coverage += row.coverage;
        m.min_coverage = std::min(m.min_coverage, row.coverage);
        if (row.car_minus_cer) {
            car_sum += *row.car_minus_cer;
            ++car_n;
        }
    }
    if (m.replicates > 0) m.coverage /= static_cast<double>(m.replicates);
    if (car_n > 0) m.car_minus_cer = car_sum / static_cast<double>(car_n);
    return m;
}

ExperimentResult coverage_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentResult result;
    const std::size_t total = config.n_cal + config.n_test;
    const int regimes = static_cast<int>(config.generator.noise_regimes.size());

    for (std::size_t rep = 0; rep < config.replicates; ++rep) {
        GeneratorConfig gen = config.generator;
        gen.seed = replicate_seed(config, rep);

        std::vector<SampleRecord> records(total);
        std::vector<int> regime_of(total);
        parallel_for(total, config.threads, [&](std::size_t i) {
            SynthSample s = generate_one(gen, i);
            records[i] = make_record(std::move(s.id), s.map, s.true_volume_mm3);
            regime_of[i] = s.regime_index;
        });
        const std::vector<SampleRecord> calibration(records.begin(), records.begin() + static_cast<long>(config.n_cal));

        for (Method method : config.methods) {
            const CalibrationModel model = method == Method::Clustered
                                               ? calibrate_clustered(calibration, config.alpha, config.k, gen.seed)
                                               : calibrate_conventional(calibration, config.alpha);
            auto warn_inf = [&](double q, const std::string& what) {
                if (std::isinf(q)) {
                    result.warnings.push_back("replicate " + std::to_string(rep) + " " + to_string(method) + ": " +
                                              what + " q = inf");
                }
            };
            if (model.q_per_cluster) {
                for (std::size_t c = 0; c < model.q_per_cluster->size(); ++c) {
                    warn_inf((*model.q_per_cluster)[c], "cluster " + std::to_string(c));
                }
            } else {
                warn_inf(model.q_global, "global");
            }

            std::vector<TriageRecord> triage(config.n_test);
            parallel_for(config.n_test, config.threads, [&](std::size_t t) {
                const SampleRecord& r = records[config.n_cal + t];
                triage[t] = classify_record(predict_interval(model, r.triple, &r.feature), *r.true_volume_mm3, r.id);
            });

            auto add_row = [&](int regime, const std::vector<TriageRecord>& subset) {
                if (subset.empty()) return;
                const TriageSummary s = summarize(subset);
                result.rows.push_back(ExperimentRow{rep, gen.seed, method, regime, s.n_total, s.coverage, s.ca_rate,
                                                    s.ce_rate, s.car_minus_cer});
            };
            add_row(-1, triage);
            if (regimes > 1) {
                for (int g = 0; g < regimes; ++g) {
                    std::vector<TriageRecord> subset;
                    for (std::size_t t = 0; t < config.n_test; ++t) {
                        if (regime_of[config.n_cal + t] == g) subset.push_back(triage[t]);
                    }
                    add_row(g, subset);
                }
            }
        }
    }
    return result;
}

std::string experiment_to_csv(const ExperimentResult& result) {
    std::string out = "replicate,seed,method,regime,n,coverage,ca_rate,ce_rate,car_minus_cer\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
    for (const auto& r : result.rows) {
        out += std::to_string(r.replicate) + ',' + std::to_string(r.seed) + ',' + to_string(r.method) + ',' +
               (r.regime < 0 ? std::string("all") : std::to_string(r.regime)) + ',' + std::to_string(r.n) + ',' +
               format_real(r.coverage) + ',' + opt(r.ca_rate) + ',' + opt(r.ce_rate) + ',' + opt(r.car_minus_cer) +
               '\n';
    }
    return out;
}

}  // namespace ccvol
