#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "ccvol/error.hpp"
#include "ccvol/metrics.hpp"

using namespace ccvol;

namespace {

IntervalPrediction interval(double low, double point, double high) {
    IntervalPrediction p;
    p.low_mm3 = low;
    p.point_mm3 = point;
    p.high_mm3 = high;
    return p;
}

// Volume whose score lands in the middle of each category.
constexpr double kMidVolume[5] = {0.5, 50.0 / 3.13, 250.0 / 3.13, 700.0 / 3.13, 2000.0 / 3.13};

TriageRecord make_cell(TriageCell cell) {
    const double truth = kMidVolume[1];
    switch (cell) {
        case TriageCell::CA: return classify_record(interval(truth, truth, truth), truth);
        case TriageCell::CE: return classify_record(interval(kMidVolume[3], kMidVolume[3], kMidVolume[3]), truth);
        case TriageCell::UA: return classify_record(interval(kMidVolume[0], truth, kMidVolume[2]), truth);
        case TriageCell::UE: return classify_record(interval(kMidVolume[0], kMidVolume[2], kMidVolume[2]), truth);
    }
    return {};
}

std::vector<TriageRecord> table_counts(int ca, int ua, int ce, int ue) {
    std::vector<TriageRecord> out;
    for (int i = 0; i < ca; ++i) out.push_back(make_cell(TriageCell::CA));
    for (int i = 0; i < ua; ++i) out.push_back(make_cell(TriageCell::UA));
    for (int i = 0; i < ce; ++i) out.push_back(make_cell(TriageCell::CE));
    for (int i = 0; i < ue; ++i) out.push_back(make_cell(TriageCell::UE));
    return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("risk categories") {
    CHECK(risk_category(0.0) == RiskCategory::NoRisk);
    CHECK(risk_category(2.99) == RiskCategory::NoRisk);
    CHECK(risk_category(3.0) == RiskCategory::Low);
    CHECK(risk_category(99.99) == RiskCategory::Low);
    CHECK(risk_category(100.0) == RiskCategory::Moderate);
    CHECK(risk_category(400.0) == RiskCategory::High);
    CHECK(risk_category(999.0) == RiskCategory::High);
    CHECK(risk_category(1000.0) == RiskCategory::VeryHigh);
    CHECK(risk_category(std::numeric_limits<double>::infinity()) == RiskCategory::VeryHigh);
    CHECK_THROWS_AS(risk_category(-1.0), ValidationError);
    CHECK(agatston_score(10.0) == doctest::Approx(31.3));
}

TEST_CASE("classify examples") {
    const TriageRecord ca = classify_record(interval(5, 10, 15), 10, "a");
    CHECK(ca.covered);
    CHECK(ca.accurate);
    CHECK(ca.confident);
    CHECK(ca.cell() == TriageCell::CA);

    // Interval spans Low and Moderate; the point lands in Moderate, truth in Low.
    const TriageRecord ue = classify_record(interval(20, 40, 50), 25);
    CHECK(ue.cell() == TriageCell::UE);
    CHECK(ue.covered);

    // A confident interval entirely in Moderate while the truth is Low.
    const TriageRecord ce = classify_record(interval(40, 45, 50), 20);
    CHECK(ce.cell() == TriageCell::CE);
    CHECK_FALSE(ce.covered);
    CHECK(ce.confident_miss);

    // Coverage is inclusive at both ends.
    CHECK(classify_record(interval(5, 6, 7), 5).covered);
    CHECK(classify_record(interval(5, 6, 7), 7).covered);
    CHECK_THROWS_AS(classify_record(interval(5, 6, 7), -1), ValidationError);

    for (TriageCell c : {TriageCell::CA, TriageCell::CE, TriageCell::UA, TriageCell::UE})
        CHECK(make_cell(c).cell() == c);
}

TEST_CASE("ensemble triage counts reproduce the reported rates") {
    const TriageSummary s = summarize(table_counts(54, 15, 2, 10));
    CHECK(s.n_total == 81);
    REQUIRE(s.ca_rate);
    REQUIRE(s.ce_rate);
    REQUIRE(s.car_minus_cer);
    CHECK(std::abs(100.0 * *s.ca_rate - 78.3) <= 0.05);
    CHECK(std::abs(100.0 * *s.ce_rate - 16.7) <= 0.05);
    CHECK(std::abs(100.0 * *s.car_minus_cer - 61.6) <= 0.05);
    const std::string text = summary_to_text(s);
    CHECK(text.find("78.3") != std::string::npos);
    CHECK(text.find("16.7") != std::string::npos);
    CHECK(text.find("61.6") != std::string::npos);
}

TEST_CASE("undefined rates") {
    const TriageSummary s = summarize(table_counts(5, 0, 0, 0));
    CHECK(s.ca_rate == 1.0);
    CHECK_FALSE(s.ce_rate);
    CHECK_FALSE(s.car_minus_cer);
    CHECK(summary_to_text(s).find("n/a") != std::string::npos);
    const auto j = nlohmann::json::parse(summary_to_json(s));
    CHECK(j["ce_rate"].is_null());
    CHECK(j["ca"] == 5);
    CHECK_THROWS_AS(summarize({}), ValidationError);
}

TEST_CASE("coverage counts") {
    std::vector<TriageRecord> recs;
    for (int i = 0; i < 81; ++i) recs.push_back(classify_record(interval(10, 12, 14), i < 63 ? 12.0 : 20.0));
    CHECK(summarize(recs).n_covered == 63);
    CHECK(std::round(100.0 * summarize(recs).coverage) == 78.0);

    std::vector<TriageRecord> inf;
    for (int i = 0; i < 10; ++i)
        inf.push_back(classify_record(interval(0, 5, std::numeric_limits<double>::infinity()), 100.0 * i));
    CHECK(summarize(inf).coverage == 1.0);
}

TEST_CASE("triage cells partition the records") {
    std::mt19937_64 gen(19);
    std::uniform_real_distribution<double> u(0.0, 500.0);
    std::vector<TriageRecord> recs;
    for (int i = 0; i < 2000; ++i) {
        double a = u(gen), b = u(gen), c = u(gen);
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        recs.push_back(classify_record(interval(a, b, c), u(gen)));
    }
    const TriageSummary s = summarize(recs);
    CHECK(s.ca + s.ce + s.ua + s.ue == s.n_total);
    CHECK(s.confident_misses <= s.ca + s.ce);
    for (const auto& r : recs) {
        if (r.covered) CHECK_FALSE(r.confident_miss);
        if (!r.confident) CHECK_FALSE(r.confident_miss);
    }
    const std::string csv = triage_to_csv(recs);
    CHECK(csv.rfind("id,low,point,high,true_volume,predicted_score,true_score,covered,cell\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == recs.size() + 1);
}

}
