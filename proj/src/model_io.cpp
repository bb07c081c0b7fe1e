#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "ccvol/conformal.hpp"
#include "ccvol/error.hpp"
#include "ccvol/io.hpp"

namespace ccvol {

using nlohmann::json;

namespace {

// +infinity is stored as the string "inf"; finite values as JSON numbers in
// shortest round-trip form.
json encode_real(double v) {
    if (std::isinf(v) && v > 0) return "inf";
    if (!std::isfinite(v)) throw ValidationError("cannot serialize non-finite value other than +inf");
    return v;
}

double decode_real(const json& j, const char* field) {
    if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (j.is_number()) return j.get<double>();
    throw ValidationError(std::string("model field ") + field + " is not a real or \"inf\"");
}

const json& require(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) throw ValidationError(std::string("model document lacks field ") + key);
    return obj.at(key);
}

}  // namespace

std::string model_to_json(const CalibrationModel& m) {
    json doc = json::object();
    doc["format_version"] = kModelFormatVersion;
    doc["alpha"] = m.alpha;
    doc["method"] = to_string(m.method);
    doc["n_calibration"] = m.n_calibration;
    doc["q_global"] = encode_real(m.q_global);
    if (m.cluster_model && m.q_per_cluster) {
        const ClusterModel& c = *m.cluster_model;
        json cluster = json::object();
        cluster["k"] = c.k;
        json centers = json::array();
        for (const auto& center : c.centers) {
            json row = json::array();
            for (double v : center) row.push_back(encode_real(v));
            centers.push_back(std::move(row));
        }
        cluster["centers"] = std::move(centers);
        json q = json::array();
        for (double v : *m.q_per_cluster) q.push_back(encode_real(v));
        cluster["q_per_cluster"] = std::move(q);
        cluster["sizes"] = c.sizes;
        cluster["iteration_count"] = c.iteration_count;
        cluster["inertia"] = encode_real(c.inertia);
        json history = json::array();
        for (double v : c.inertia_history) history.push_back(encode_real(v));
        cluster["inertia_history"] = std::move(history);
        doc["cluster"] = std::move(cluster);
    } else {
        doc["cluster"] = nullptr;
    }
    doc["created_from"] = m.created_from;
    return doc.dump(2) + "\n";
}

CalibrationModel model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed model document: ") + e.what());
    }
    try {
        const json& version = require(doc, "format_version");
        if (!version.is_number_integer() || version.get<int>() != kModelFormatVersion) {
            throw ValidationError("model format_version " + version.dump() + " is not supported (expected " +
                                  std::to_string(kModelFormatVersion) + ")");
        }
        CalibrationModel m;
        m.alpha = decode_real(require(doc, "alpha"), "alpha");
        if (!(m.alpha > 0.0 && m.alpha < 1.0)) throw ValidationError("model alpha must lie in (0, 1)");
        m.method = parse_method(require(doc, "method").get<std::string>());
        m.n_calibration = require(doc, "n_calibration").get<std::size_t>();
        m.q_global = decode_real(require(doc, "q_global"), "q_global");
        m.created_from = require(doc, "created_from").get<std::string>();

        const json& cluster = require(doc, "cluster");
        if (m.method == Method::Clustered) {
            if (!cluster.is_object()) throw ValidationError("clustered model lacks its cluster section");
            ClusterModel c;
            c.k = require(cluster, "k").get<int>();
            if (c.k < 1) throw ValidationError("model cluster k must be >= 1");
            for (const json& row : require(cluster, "centers")) {
                Point center;
                for (const json& v : row) center.push_back(decode_real(v, "centers"));
                c.centers.push_back(std::move(center));
            }
            std::vector<double> q;
            for (const json& v : require(cluster, "q_per_cluster")) q.push_back(decode_real(v, "q_per_cluster"));
            c.sizes = require(cluster, "sizes").get<std::vector<int>>();
            c.iteration_count = require(cluster, "iteration_count").get<int>();
            c.inertia = decode_real(require(cluster, "inertia"), "inertia");
            for (const json& v : require(cluster, "inertia_history")) {
                c.inertia_history.push_back(decode_real(v, "inertia_history"));
            }
            const auto k = static_cast<std::size_t>(c.k);
            if (c.centers.size() != k || q.size() != k || c.sizes.size() != k) {
                throw ValidationError("model cluster section: centers, q_per_cluster and sizes must all have k entries");
            }
            for (const auto& center : c.centers) {
                if (center.size() != c.centers.front().size() || center.empty()) {
                    throw ValidationError("model cluster centers have inconsistent dimensions");
                }
            }
            m.cluster_model = std::move(c);
            m.q_per_cluster = std::move(q);
        } else if (!cluster.is_null()) {
            throw ValidationError("conventional model must have cluster = null");
        }
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed model document: ") + e.what());
    }
}

void save_model(const CalibrationModel& model, const std::filesystem::path& path) {
    write_text_file(path, model_to_json(model));
}

CalibrationModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read model " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return model_from_json(ss.str());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace ccvol
