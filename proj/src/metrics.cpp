#include "ccvol/metrics.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "ccvol/error.hpp"
#include "ccvol/io.hpp"

namespace ccvol {

const char* to_string(RiskCategory c) noexcept {
    switch (c) {
        case RiskCategory::NoRisk: return "NoRisk";
        case RiskCategory::Low: return "Low";
        case RiskCategory::Moderate: return "Moderate";
        case RiskCategory::High: return "High";
        case RiskCategory::VeryHigh: return "VeryHigh";
    }
    return "?";
}

const char* to_string(TriageCell c) noexcept {
    switch (c) {
        case TriageCell::CA: return "CA";
        case TriageCell::CE: return "CE";
        case TriageCell::UA: return "UA";
        case TriageCell::UE: return "UE";
    }
    return "?";
}

RiskCategory risk_category(double score) {
    if (!(score >= 0.0)) throw ValidationError("risk score must be >= 0");
    if (score < 3.0) return RiskCategory::NoRisk;
    if (score < 100.0) return RiskCategory::Low;
    if (score < 400.0) return RiskCategory::Moderate;
    if (score < 1000.0) return RiskCategory::High;
    return RiskCategory::VeryHigh;
}

TriageCell TriageRecord::cell() const noexcept {
    if (confident) return accurate ? TriageCell::CA : TriageCell::CE;
    return accurate ? TriageCell::UA : TriageCell::UE;
}

TriageRecord classify_record(const IntervalPrediction& interval, double true_volume_mm3, std::string id) {
    if (!(true_volume_mm3 >= 0.0)) throw ValidationError("true volume must be >= 0");
    TriageRecord t;
    t.id = std::move(id);
    t.interval = interval;
    t.true_volume_mm3 = true_volume_mm3;
    t.predicted_score = agatston_score(interval.point_mm3);
    t.true_score = agatston_score(true_volume_mm3);
    t.covered = interval.low_mm3 <= true_volume_mm3 && true_volume_mm3 <= interval.high_mm3;

    const RiskCategory truth = risk_category(t.true_score);
    t.accurate = risk_category(t.predicted_score) == truth;

    // The interval's scores span a contiguous run of categories.
    const auto first = static_cast<int>(risk_category(agatston_score(interval.low_mm3)));
    const auto last = std::isinf(interval.high_mm3) ? static_cast<int>(RiskCategory::VeryHigh)
                                                    : static_cast<int>(risk_category(agatston_score(interval.high_mm3)));
    const int true_index = static_cast<int>(truth);
    const bool contains_truth = first <= true_index && true_index <= last;
    const bool uncertain = contains_truth && last > first;
    t.confident = !uncertain;
    t.confident_miss = !contains_truth;
    return t;
}

TriageSummary summarize(const std::vector<TriageRecord>& records) {
    if (records.empty()) throw ValidationError("summarize: no records");
    TriageSummary s;
    s.n_total = records.size();
    for (const auto& r : records) {
        s.n_covered += r.covered;
        s.confident_misses += r.confident_miss;
        switch (r.cell()) {
            case TriageCell::CA: ++s.ca; break;
            case TriageCell::CE: ++s.ce; break;
            case TriageCell::UA: ++s.ua; break;
            case TriageCell::UE: ++s.ue; break;
        }
    }
    s.coverage = static_cast<double>(s.n_covered) / static_cast<double>(s.n_total);
    if (s.ca + s.ua > 0) s.ca_rate = static_cast<double>(s.ca) / static_cast<double>(s.ca + s.ua);
    if (s.ce + s.ue > 0) s.ce_rate = static_cast<double>(s.ce) / static_cast<double>(s.ce + s.ue);
    if (s.ca_rate && s.ce_rate) s.car_minus_cer = *s.ca_rate - *s.ce_rate;
    return s;
}

namespace {

std::string percent(const std::optional<double>& rate) {
    if (!rate) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *rate);
    return buf;
}

}  // namespace

std::string summary_to_text(const TriageSummary& s) {
    char coverage[32];
    std::snprintf(coverage, sizeof coverage, "%.4f", s.coverage);
    std::string out;
    out += "n_total          " + std::to_string(s.n_total) + "\n";
    out += "n_covered        " + std::to_string(s.n_covered) + "\n";
    out += "coverage         " + std::string(coverage) + "\n";
    out += "CA / CE / UA / UE  " + std::to_string(s.ca) + " / " + std::to_string(s.ce) + " / " + std::to_string(s.ua) +
           " / " + std::to_string(s.ue) + "\n";
    out += "CA rate (%)      " + percent(s.ca_rate) + "\n";
    out += "CE rate (%)      " + percent(s.ce_rate) + "\n";
    out += "CAr-CEr (%)      " + percent(s.car_minus_cer) + "\n";
    out += "confident misses " + std::to_string(s.confident_misses) + "\n";
    return out;
}

std::string summary_to_json(const TriageSummary& s) {
    nlohmann::json j = nlohmann::json::object();
    j["n_total"] = s.n_total;
    j["n_covered"] = s.n_covered;
    j["coverage"] = s.coverage;
    j["ca"] = s.ca;
    j["ce"] = s.ce;
    j["ua"] = s.ua;
    j["ue"] = s.ue;
    j["confident_misses"] = s.confident_misses;
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    j["ca_rate"] = opt(s.ca_rate);
    j["ce_rate"] = opt(s.ce_rate);
    j["car_minus_cer"] = opt(s.car_minus_cer);
    return j.dump(2) + "\n";
}

std::string triage_to_csv(const std::vector<TriageRecord>& records) {
    std::string out = "id,low,point,high,true_volume,predicted_score,true_score,covered,cell\n";
    for (const auto& r : records) {
        out += r.id;
        out += ',' + format_real(r.interval.low_mm3);
        out += ',' + format_real(r.interval.point_mm3);
        out += ',' + format_real(r.interval.high_mm3);
        out += ',' + format_real(r.true_volume_mm3);
        out += ',' + format_real(r.predicted_score);
        out += ',' + format_real(r.true_score);
        out += r.covered ? ",1," : ",0,";
        out += to_string(r.cell());
        out += '\n';
    }
    return out;
}

}  // namespace ccvol
