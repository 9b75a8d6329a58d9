#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcadv/attack.hpp"
#include "pcadv/core.hpp"
#include "pcadv/metrics.hpp"
#include "pcadv/net.hpp"
#include "pcadv/rng.hpp"

namespace pcadv {

// Point-removal attack baselines: drop batches of points chosen by a
// selection strategy until the classifier flips or the budget runs out.
struct RemovalStrategy {
    enum class Kind { Random, Critical, SaliencyHigh, SaliencyLow };

    Kind kind = Kind::Random;
    int batch_size = 16;
    int budget = -1;  // max removable points; -1 means N/2
    std::uint64_t seed = 1;
};

inline std::string to_string(RemovalStrategy::Kind k) {
    switch (k) {
        case RemovalStrategy::Kind::Random: return "random";
        case RemovalStrategy::Kind::Critical: return "critical";
        case RemovalStrategy::Kind::SaliencyHigh: return "saliency_high";
        case RemovalStrategy::Kind::SaliencyLow: return "saliency_low";
    }
    return "?";
}

inline RemovalStrategy::Kind removal_kind_from_string(const std::string& s) {
    if (s == "random") return RemovalStrategy::Kind::Random;
    if (s == "critical") return RemovalStrategy::Kind::Critical;
    if (s == "saliency_high") return RemovalStrategy::Kind::SaliencyHigh;
    if (s == "saliency_low") return RemovalStrategy::Kind::SaliencyLow;
    throw std::invalid_argument("unknown removal strategy: " + s);
}

// The critical set and saliency scores are recomputed after each round since
// pooling winners change as points disappear. binary_a marks removed points
// by original index; the surviving cloud is always a subset of the input.
inline AttackResult removal_attack(const PointCloud& cloud, const Classifier& net, int label,
                                   const RemovalStrategy& strategy) {
    if (strategy.batch_size < 1)
        throw std::invalid_argument("removal_attack: batch_size >= 1");
    const int n = static_cast<int>(cloud.size());
    const int budget = strategy.budget < 0 ? n / 2 : strategy.budget;
    if (budget >= n) throw std::invalid_argument("removal_attack: budget < N required");

    AttackResult result;
    result.true_class = label;
    if (net.predict(cloud) != label) {
        result.skipped = true;
        result.adversarial = cloud;
        result.predicted_class = net.predict(cloud);
        return result;
    }

    Rng rng(strategy.seed);
    PointCloud current = cloud;
    std::vector<int> original_index(cloud.size());
    std::iota(original_index.begin(), original_index.end(), 0);
    result.binary_a.assign(cloud.size(), 0);

    int removed = 0;
    int rounds = 0;
    int predicted = label;
    while (removed < budget) {
        predicted = net.predict(current);
        if (predicted != label) break;
        const int room = static_cast<int>(current.size()) - 1;
        const int take = std::min({strategy.batch_size, budget - removed, room});
        if (take <= 0) break;

        std::vector<std::size_t> chosen;
        switch (strategy.kind) {
            case RemovalStrategy::Kind::Random: {
                std::vector<std::size_t> pool(current.size());
                std::iota(pool.begin(), pool.end(), 0);
                for (int t = 0; t < take; ++t) {
                    const std::size_t pick = t + rng.index(pool.size() - t);
                    std::swap(pool[static_cast<std::size_t>(t)], pool[pick]);
                    chosen.push_back(pool[static_cast<std::size_t>(t)]);
                }
                break;
            }
            case RemovalStrategy::Kind::Critical: {
                std::vector<int> critical = net.critical_points(current);
                if (static_cast<int>(critical.size()) <= take) {
                    for (int c : critical) chosen.push_back(static_cast<std::size_t>(c));
                } else {
                    for (int t = 0; t < take; ++t) {
                        const std::size_t pick = t + rng.index(critical.size() - t);
                        std::swap(critical[static_cast<std::size_t>(t)], critical[pick]);
                        chosen.push_back(static_cast<std::size_t>(critical[static_cast<std::size_t>(t)]));
                    }
                }
                break;
            }
            case RemovalStrategy::Kind::SaliencyHigh:
            case RemovalStrategy::Kind::SaliencyLow: {
                const std::vector<double> scores = net.saliency_scores(current, label);
                std::vector<std::size_t> order(current.size());
                std::iota(order.begin(), order.end(), 0);
                const bool high = strategy.kind == RemovalStrategy::Kind::SaliencyHigh;
                std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                    if (scores[a] != scores[b])
                        return high ? scores[a] > scores[b] : scores[a] < scores[b];
                    return a < b;
                });
                chosen.assign(order.begin(), order.begin() + take);
                break;
            }
        }
        if (chosen.empty()) break;

        std::vector<std::uint8_t> drop(current.size(), 0);
        for (std::size_t c : chosen) drop[c] = 1;
        PointCloud next;
        next.label = cloud.label;
        next.id = cloud.id;
        std::vector<int> next_index;
        for (std::size_t i = 0; i < current.size(); ++i) {
            if (drop[i]) {
                result.binary_a[static_cast<std::size_t>(original_index[i])] = 1;
                ++removed;
            } else {
                next.points.push_back(current.points[i]);
                next_index.push_back(original_index[i]);
            }
        }
        current = std::move(next);
        original_index = std::move(next_index);
        ++rounds;
        predicted = net.predict(current);
        if (predicted != label) break;
    }

    result.adversarial = current;
    result.predicted_class = predicted;
    result.success = predicted != label;
    result.num_manipulated = removed;
    result.num_displaced = 0;  // removal moves nothing
    result.iterations_used = rounds;
    result.chamfer_distance = chamfer(cloud, current);
    result.hausdorff_distance = hausdorff(cloud, current);
    return result;
}

}  // namespace pcadv
