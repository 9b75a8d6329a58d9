#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "pcadv/attack.hpp"
#include "pcadv/core.hpp"
#include "pcadv/kdtree.hpp"
#include "pcadv/net.hpp"

namespace pcadv {

// Overlap between the points a perturbation attack selected and the
// classifier's critical points, by identity and by 5-nearest-neighbor
// proximity (neighborhoods computed within the original cloud).
struct OverlapReport {
    int num_selected = 0;
    int num_critical = 0;
    int num_identical = 0;
    int num_near = 0;
    double frac_identical = 0.0;
    double frac_near = 0.0;

    nlohmann::json to_json() const {
        return nlohmann::json{{"num_selected", num_selected},
                              {"num_critical", num_critical},
                              {"num_identical", num_identical},
                              {"num_near", num_near},
                              {"frac_identical", frac_identical},
                              {"frac_near", frac_near}};
    }
};

inline constexpr std::size_t kOverlapNeighborhood = 5;

inline OverlapReport critical_overlap(const PointCloud& cloud, const AttackResult& result,
                                      const Classifier& net) {
    if (result.binary_a.size() != cloud.size())
        throw std::invalid_argument(
            "critical_overlap: needs a perturbation-mode result (added points have no "
            "counterpart index)");
    const std::vector<int> critical = net.critical_points(cloud);
    std::vector<std::uint8_t> is_critical(cloud.size(), 0);
    for (int c : critical) is_critical[static_cast<std::size_t>(c)] = 1;

    // union of the 5-NN sets of the critical points; each critical point is a
    // member of its own set
    std::vector<std::uint8_t> is_near(cloud.size(), 0);
    const KdTree tree(cloud.points);
    for (int c : critical) {
        is_near[static_cast<std::size_t>(c)] = 1;
        for (int j : tree.nearest_k(cloud.points[static_cast<std::size_t>(c)],
                                    kOverlapNeighborhood))
            is_near[static_cast<std::size_t>(j)] = 1;
    }

    OverlapReport report;
    report.num_critical = static_cast<int>(critical.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!result.binary_a[i]) continue;
        ++report.num_selected;
        if (is_critical[i]) ++report.num_identical;
        if (is_near[i]) ++report.num_near;
    }
    if (report.num_selected > 0) {
        report.frac_identical =
            static_cast<double>(report.num_identical) / report.num_selected;
        report.frac_near = static_cast<double>(report.num_near) / report.num_selected;
    }
    return report;
}

// Untargeted transfer success: fraction of adversarial examples the target
// network misclassifies. With target == source this equals the plain success
// rate on the same set.
inline double transfer_eval(const std::vector<PointCloud>& adversarial,
                            const std::vector<int>& labels, const Classifier& source,
                            const Classifier& target) {
    if (source.num_classes() != target.num_classes())
        throw std::invalid_argument("transfer_eval: class-count mismatch between networks");
    if (adversarial.size() != labels.size())
        throw std::invalid_argument("transfer_eval: misaligned inputs");
    if (adversarial.empty()) return 0.0;
    std::size_t fooled = 0;
    for (std::size_t i = 0; i < adversarial.size(); ++i)
        if (target.predict(adversarial[i]) != labels[i]) ++fooled;
    return static_cast<double>(fooled) / static_cast<double>(adversarial.size());
}

}  // namespace pcadv
