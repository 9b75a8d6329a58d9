#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcadv/core.hpp"
#include "pcadv/kdtree.hpp"
#include "pcadv/metrics.hpp"
#include "pcadv/net.hpp"

namespace pcadv {

enum class DefenseKind { Outlier, Salient };

inline std::string to_string(DefenseKind k) {
    return k == DefenseKind::Outlier ? "outlier" : "salient";
}
inline DefenseKind defense_kind_from_string(const std::string& s) {
    if (s == "outlier") return DefenseKind::Outlier;
    if (s == "salient") return DefenseKind::Salient;
    throw std::invalid_argument("unknown defense kind: " + s);
}

struct DefenseConfig {
    DefenseKind kind = DefenseKind::Outlier;
    int k_neighbors = 10;
    double alpha = 1.0;      // std-dev multiplier for outlier removal
    int remove_count = 100;  // M for salient removal

    void validate() const {
        if (k_neighbors < 1) throw std::invalid_argument("DefenseConfig: k_neighbors >= 1");
        if (!(alpha > 0.0)) throw std::invalid_argument("DefenseConfig: alpha > 0");
        if (remove_count < 0) throw std::invalid_argument("DefenseConfig: remove_count >= 0");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"kind", to_string(kind)},
                              {"k_neighbors", k_neighbors},
                              {"alpha", alpha},
                              {"remove_count", remove_count}};
    }

    static DefenseConfig from_json(const nlohmann::json& j) {
        static const std::vector<std::string> known{"kind", "k_neighbors", "alpha",
                                                    "remove_count"};
        for (const auto& item : j.items()) {
            if (std::find(known.begin(), known.end(), item.key()) == known.end())
                throw std::invalid_argument("DefenseConfig: unknown field '" + item.key() +
                                            "'");
        }
        DefenseConfig cfg;
        if (j.contains("kind")) cfg.kind = defense_kind_from_string(j.at("kind"));
        if (j.contains("k_neighbors")) cfg.k_neighbors = j.at("k_neighbors").get<int>();
        if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
        if (j.contains("remove_count")) cfg.remove_count = j.at("remove_count").get<int>();
        cfg.validate();
        return cfg;
    }
};

namespace detail {

// mean distance of each point to its k nearest neighbors (self excluded)
inline std::vector<double> knn_mean_distances(const PointCloud& cloud, int k) {
    const std::size_t n = cloud.size();
    std::vector<double> out(n, 0.0);
    const std::size_t kk = static_cast<std::size_t>(k);
    if (n >= kBruteForceNnLimit) {
        KdTree tree(cloud.points);
        for (std::size_t i = 0; i < n; ++i) {
            const auto ids = tree.nearest_k(cloud.points[i], kk + 1);
            double sum = 0.0;
            std::size_t used = 0;
            for (int j : ids) {
                if (used == kk) break;
                if (static_cast<std::size_t>(j) == i) continue;
                sum += distance(cloud.points[i], cloud.points[static_cast<std::size_t>(j)]);
                ++used;
            }
            out[i] = sum / static_cast<double>(kk);
        }
    } else {
        std::vector<double> dists;
        for (std::size_t i = 0; i < n; ++i) {
            dists.clear();
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) dists.push_back(distance(cloud.points[i], cloud.points[j]));
            std::nth_element(dists.begin(), dists.begin() + static_cast<long>(kk) - 1,
                             dists.end());
            double sum = 0.0;
            for (std::size_t j = 0; j < kk; ++j) sum += dists[j];
            out[i] = sum / static_cast<double>(kk);
        }
    }
    return out;
}

}  // namespace detail

// Statistical outlier removal: drop every point whose mean k-NN distance
// exceeds mu + alpha * sigma. Order preserved, never returns an empty cloud.
// Not idempotent: removal shifts mu and sigma, a second pass may remove more.
inline PointCloud outlier_removal(const PointCloud& cloud, const DefenseConfig& cfg) {
    cfg.validate();
    if (cloud.size() <= static_cast<std::size_t>(cfg.k_neighbors))
        throw std::invalid_argument("outlier_removal: need N > k_neighbors");
    const std::vector<double> d = detail::knn_mean_distances(cloud, cfg.k_neighbors);
    const double n = static_cast<double>(d.size());
    double mu = 0.0;
    for (double v : d) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : d) var += (v - mu) * (v - mu);
    const double sigma = std::sqrt(var / n);
    const double cutoff = mu + cfg.alpha * sigma;

    PointCloud out;
    out.label = cloud.label;
    out.id = cloud.id;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (d[i] <= cutoff) out.points.push_back(cloud.points[i]);
    if (out.empty()) {
        const std::size_t keep = static_cast<std::size_t>(
            std::min_element(d.begin(), d.end()) - d.begin());
        out.points.push_back(cloud.points[keep]);
    }
    return out;
}

// Removes the remove_count points with the highest saliency scores (ties by
// lowest index); survivors keep their input order.
inline PointCloud salient_removal(const PointCloud& cloud, const Classifier& net, int label,
                                  const DefenseConfig& cfg) {
    cfg.validate();
    const std::size_t m = static_cast<std::size_t>(cfg.remove_count);
    if (m >= cloud.size())
        throw std::invalid_argument("salient_removal: need remove_count < N");
    const std::vector<double> scores = net.saliency_scores(cloud, label);
    std::vector<std::size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    });
    std::vector<std::uint8_t> removed(cloud.size(), 0);
    for (std::size_t r = 0; r < m; ++r) removed[order[r]] = 1;
    PointCloud out;
    out.label = cloud.label;
    out.id = cloud.id;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (!removed[i]) out.points.push_back(cloud.points[i]);
    return out;
}

inline PointCloud apply_defense(const PointCloud& cloud, const Classifier& net, int label,
                                const DefenseConfig& cfg) {
    return cfg.kind == DefenseKind::Outlier ? outlier_removal(cloud, cfg)
                                            : salient_removal(cloud, net, label, cfg);
}

// Fraction of adversarial examples the classifier recovers to the TRUE class
// after the defense (not merely a changed prediction).
inline double defense_success_rate(const std::vector<PointCloud>& adversarial,
                                   const std::vector<PointCloud>& originals,
                                   const std::vector<int>& labels, const Classifier& net,
                                   const DefenseConfig& cfg) {
    if (adversarial.size() != labels.size() || adversarial.size() != originals.size())
        throw std::invalid_argument("defense_success_rate: misaligned inputs");
    if (adversarial.empty()) return 0.0;
    std::size_t recovered = 0;
    for (std::size_t i = 0; i < adversarial.size(); ++i) {
        const PointCloud defended = apply_defense(adversarial[i], net, labels[i], cfg);
        if (net.predict(defended) == labels[i]) ++recovered;
    }
    return static_cast<double>(recovered) / static_cast<double>(adversarial.size());
}

}  // namespace pcadv
