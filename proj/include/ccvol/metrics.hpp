#pragma once
// Agatston-proxy risk categories and interval triage metrics.

#include <optional>
#include <string>
#include <vector>

#include "ccvol/conformal.hpp"

namespace ccvol {

// Estimated Agatston score per mm^3 of calcium volume.
inline constexpr double kAgatstonPerMm3 = 3.13;

// Score ranges [0,3) [3,100) [100,400) [400,1000) [1000,inf).
enum class RiskCategory { NoRisk = 0, Low, Moderate, High, VeryHigh };
inline constexpr int kRiskCategoryCount = 5;

const char* to_string(RiskCategory c) noexcept;

// Throws ValidationError for negative or NaN scores.
RiskCategory risk_category(double score);

inline double agatston_score(double volume_mm3) noexcept { return kAgatstonPerMm3 * volume_mm3; }

enum class TriageCell { CA, CE, UA, UE };
const char* to_string(TriageCell c) noexcept;

struct TriageRecord {
    std::string id;
    IntervalPrediction interval;
    double true_volume_mm3 = 0.0;
    double predicted_score = 0.0;
    double true_score = 0.0;
    bool covered = false;
    bool accurate = false;
    bool confident = false;
    // Confident, but the interval does not reach the true category at all.
    bool confident_miss = false;

    TriageCell cell() const noexcept;
};

// accurate: point score and true score share a category. uncertain: the
// interval's categories include the true one and at least one other.
// Everything else, including an interval that misses the true category, is
// confident.
TriageRecord classify_record(const IntervalPrediction& interval, double true_volume_mm3, std::string id = {});

struct TriageSummary {
    std::size_t n_total = 0, n_covered = 0;
    std::size_t ca = 0, ce = 0, ua = 0, ue = 0;
    std::size_t confident_misses = 0;
    double coverage = 0.0;
    // Fractions in [0, 1]; nullopt when the denominator is zero.
    std::optional<double> ca_rate, ce_rate, car_minus_cer;
};

// Throws ValidationError on an empty list.
TriageSummary summarize(const std::vector<TriageRecord>& records);

// Rates as percentages to one decimal; undefined rates print as "n/a".
std::string summary_to_text(const TriageSummary& s);
std::string summary_to_json(const TriageSummary& s);

// Header `id,low,point,high,true_volume,predicted_score,true_score,covered,cell`.
std::string triage_to_csv(const std::vector<TriageRecord>& records);

}  // namespace ccvol
