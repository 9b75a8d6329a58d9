#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcadv/attack.hpp"

namespace pcadv {

// Per-sample attack outcome as persisted to JSON lines.
struct SampleRecord {
    std::string id;
    int true_class = -1;
    int predicted = -1;
    bool skipped = false;
    bool success = false;
    int num_manipulated = 0;
    int num_displaced = 0;
    double chamfer_distance = 0.0;
    double hausdorff_distance = 0.0;
    int iterations = 0;
    double wall_time_s = 0.0;
    std::vector<int> selected;  // indicator indices that binarized to 1

    nlohmann::json to_json() const {
        return nlohmann::json{{"id", id},
                              {"true_class", true_class},
                              {"predicted", predicted},
                              {"skipped", skipped},
                              {"success", success},
                              {"num_manipulated", num_manipulated},
                              {"num_displaced", num_displaced},
                              {"chamfer", chamfer_distance},
                              {"hausdorff", hausdorff_distance},
                              {"iterations", iterations},
                              {"wall_time_s", wall_time_s},
                              {"selected", selected}};
    }

    static SampleRecord from_json(const nlohmann::json& j) {
        SampleRecord r;
        r.id = j.at("id").get<std::string>();
        r.true_class = j.at("true_class").get<int>();
        r.predicted = j.at("predicted").get<int>();
        r.skipped = j.at("skipped").get<bool>();
        r.success = j.at("success").get<bool>();
        r.num_manipulated = j.at("num_manipulated").get<int>();
        r.num_displaced = j.at("num_displaced").get<int>();
        r.chamfer_distance = j.at("chamfer").get<double>();
        r.hausdorff_distance = j.at("hausdorff").get<double>();
        r.iterations = j.at("iterations").get<int>();
        r.wall_time_s = j.value("wall_time_s", 0.0);
        r.selected = j.value("selected", std::vector<int>{});
        return r;
    }
};

inline SampleRecord make_record(const AttackResult& result, const std::string& id,
                                double wall_time_s) {
    SampleRecord r;
    r.id = id;
    r.true_class = result.true_class;
    r.predicted = result.predicted_class;
    r.skipped = result.skipped;
    r.success = result.success;
    r.num_manipulated = result.num_manipulated;
    r.num_displaced = result.num_displaced;
    r.chamfer_distance = result.chamfer_distance;
    r.hausdorff_distance = result.hausdorff_distance;
    r.iterations = result.iterations_used;
    r.wall_time_s = wall_time_s;
    for (std::size_t i = 0; i < result.binary_a.size(); ++i)
        if (result.binary_a[i]) r.selected.push_back(static_cast<int>(i));
    return r;
}

// One aggregate table line, mirroring the success-rate / Chamfer / Hausdorff
// / point-count reporting columns. Distance and point means are taken over
// successful attacks; skipped samples are excluded from every denominator.
struct AggregateRow {
    std::string method;
    std::string mode;
    std::string metric;
    double success_rate = 0.0;
    double chamfer_mean = 0.0;
    double hausdorff_mean = 0.0;
    double points_mean = 0.0;
    int n_samples = 0;  // attacked (non-skipped) samples

    static std::string csv_header() {
        return "method,mode,metric,success_rate,chamfer_mean,hausdorff_mean,points_mean,"
               "n_samples";
    }

    std::string csv_row() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.10g,%.10g,%.10g,%.10g,%d",
                      method.c_str(), mode.c_str(), metric.c_str(), success_rate,
                      chamfer_mean, hausdorff_mean, points_mean, n_samples);
        return buf;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"method", method},
                              {"mode", mode},
                              {"metric", metric},
                              {"success_rate", success_rate},
                              {"chamfer_mean", chamfer_mean},
                              {"hausdorff_mean", hausdorff_mean},
                              {"points_mean", points_mean},
                              {"n_samples", n_samples}};
    }
};

inline AggregateRow aggregate_records(const std::vector<SampleRecord>& records,
                                      const std::string& method, const std::string& mode,
                                      const std::string& metric) {
    AggregateRow row;
    row.method = method;
    row.mode = mode;
    row.metric = metric;
    int successes = 0;
    double chamfer_sum = 0.0, hausdorff_sum = 0.0, points_sum = 0.0;
    for (const auto& r : records) {
        if (r.skipped) continue;
        ++row.n_samples;
        if (!r.success) continue;
        ++successes;
        chamfer_sum += r.chamfer_distance;
        hausdorff_sum += r.hausdorff_distance;
        points_sum += r.num_manipulated;
    }
    if (row.n_samples > 0)
        row.success_rate = static_cast<double>(successes) / row.n_samples;
    if (successes > 0) {
        row.chamfer_mean = chamfer_sum / successes;
        row.hausdorff_mean = hausdorff_sum / successes;
        row.points_mean = points_sum / successes;
    }
    return row;
}

inline void write_records_jsonl(const std::vector<SampleRecord>& records,
                                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write records: " + path);
    for (const auto& r : records) out << r.to_json().dump() << '\n';
}

inline std::vector<SampleRecord> read_records_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read records: " + path);
    std::vector<SampleRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(SampleRecord::from_json(nlohmann::json::parse(line)));
    }
    return records;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string out = AggregateRow::csv_header() + "\n";
    for (const auto& row : rows) out += row.csv_row() + "\n";
    return out;
}

inline void write_aggregate_csv(const std::vector<AggregateRow>& rows,
                                const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write csv: " + path);
    out << aggregate_csv(rows);
}

}  // namespace pcadv
