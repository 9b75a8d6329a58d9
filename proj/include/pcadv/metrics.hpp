#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcadv/core.hpp"
#include "pcadv/kdtree.hpp"

namespace pcadv {

enum class DistanceKind { Euclidean, Chamfer, Hausdorff };

inline std::string to_string(DistanceKind kind) {
    switch (kind) {
        case DistanceKind::Euclidean: return "euclidean";
        case DistanceKind::Chamfer: return "chamfer";
        case DistanceKind::Hausdorff: return "hausdorff";
    }
    return "?";
}

inline DistanceKind distance_kind_from_string(const std::string& s) {
    if (s == "euclidean") return DistanceKind::Euclidean;
    if (s == "chamfer") return DistanceKind::Chamfer;
    if (s == "hausdorff") return DistanceKind::Hausdorff;
    throw std::invalid_argument("unknown distance kind: " + s);
}

// exact search switches to a spatial index at this cloud size
inline constexpr std::size_t kBruteForceNnLimit = 256;

// Index of the closest point of `cloud` to `query`; ties by lowest index.
inline int nearest_neighbor_index(const Point3& query, const std::vector<Point3>& cloud) {
    if (cloud.empty())
        throw std::invalid_argument("nearest_neighbor_index: empty cloud");
    if (cloud.size() >= kBruteForceNnLimit) {
        KdTree tree(cloud);
        return tree.nearest(query);
    }
    int best = 0;
    double best_d2 = squared_distance(query, cloud[0]);
    for (std::size_t i = 1; i < cloud.size(); ++i) {
        const double d2 = squared_distance(query, cloud[i]);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(i);
        }
    }
    return best;
}

inline int nearest_neighbor_index(const Point3& query, const PointCloud& cloud) {
    return nearest_neighbor_index(query, cloud.points);
}

// One direction of a cloud-to-cloud distance: per-source nearest neighbors in
// target plus the mean and max statistics both metrics are built from.
struct DirectedNearest {
    std::vector<int> nn;        // nearest target index per source point
    std::vector<double> dist;   // matching distances
    double mean = 0.0;
    double max_value = 0.0;
    int argmax = 0;             // source index attaining the max (lowest wins ties)
};

inline DirectedNearest directed_nearest(const std::vector<Point3>& source,
                                        const std::vector<Point3>& target) {
    if (source.empty() || target.empty())
        throw std::invalid_argument("directed_nearest: empty cloud");
    DirectedNearest out;
    out.nn.resize(source.size());
    out.dist.resize(source.size());
    if (target.size() >= kBruteForceNnLimit) {
        KdTree tree(target);
        for (std::size_t k = 0; k < source.size(); ++k) out.nn[k] = tree.nearest(source[k]);
    } else {
        for (std::size_t k = 0; k < source.size(); ++k) {
            int best = 0;
            double best_d2 = squared_distance(source[k], target[0]);
            for (std::size_t j = 1; j < target.size(); ++j) {
                const double d2 = squared_distance(source[k], target[j]);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = static_cast<int>(j);
                }
            }
            out.nn[k] = best;
        }
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < source.size(); ++k) {
        out.dist[k] = distance(source[k], target[out.nn[k]]);
        sum += out.dist[k];
        if (out.dist[k] > out.max_value) {
            out.max_value = out.dist[k];
            out.argmax = static_cast<int>(k);
        }
    }
    out.mean = sum / static_cast<double>(source.size());
    return out;
}

// Symmetric Chamfer distance: max of the two directed means, unsquared norms.
inline double chamfer(const PointCloud& p, const PointCloud& q) {
    const auto fwd = directed_nearest(p.points, q.points);
    const auto bwd = directed_nearest(q.points, p.points);
    return std::max(fwd.mean, bwd.mean);
}

// Hausdorff distance: max of the two directed maxima.
inline double hausdorff(const PointCloud& p, const PointCloud& q) {
    const auto fwd = directed_nearest(p.points, q.points);
    const auto bwd = directed_nearest(q.points, p.points);
    return std::max(fwd.max_value, bwd.max_value);
}

// (1/N) * sum_i a_i * ||e_i||, valid only with index correspondence.
inline double euclidean_perceptibility(const IndicatorVector& a, const PerturbationSet& e) {
    if (a.size() != e.size())
        throw std::invalid_argument("euclidean_perceptibility: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a.values[i] * e.vectors[i].norm();
    return sum / static_cast<double>(a.size());
}

inline double cloud_distance(const PointCloud& p, const PointCloud& q, DistanceKind kind,
                             const IndicatorVector* a = nullptr,
                             const PerturbationSet* e = nullptr) {
    switch (kind) {
        case DistanceKind::Chamfer: return chamfer(p, q);
        case DistanceKind::Hausdorff: return hausdorff(p, q);
        case DistanceKind::Euclidean:
            if (a == nullptr || e == nullptr)
                throw std::invalid_argument(
                    "cloud_distance: Euclidean needs the indicator and perturbations");
            return euclidean_perceptibility(*a, *e);
    }
    throw std::invalid_argument("cloud_distance: bad kind");
}

// Gradient of D(P, P') with respect to the relaxed indicator and the
// perturbation set. Only entries on the active nearest-neighbor assignments
// (Chamfer) or the single maximizing pair (Hausdorff) are nonzero; a
// zero-distance active pair contributes the zero subgradient.
struct DistanceGradient {
    enum class Branch { ForwardPToPrime, BackwardPrimeToP };

    std::vector<double> d_a;
    std::vector<Vec3> d_e;
    Branch active_branch = Branch::ForwardPToPrime;
};

inline DistanceGradient distance_gradient(const PointCloud& p, const PointCloud& pprime,
                                          const IndicatorVector& a, const PerturbationSet& e,
                                          DistanceKind kind) {
    const std::size_t m = pprime.size();
    if (a.size() != m || e.size() != m)
        throw std::invalid_argument("distance_gradient: length mismatch");
    DistanceGradient grad;
    grad.d_a.assign(m, 0.0);
    grad.d_e.assign(m, Vec3{});

    if (kind == DistanceKind::Euclidean) {
        if (p.size() != m)
            throw std::invalid_argument("distance_gradient: Euclidean needs |P| = |P'|");
        const double n = static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double norm = e.vectors[i].norm();
            grad.d_a[i] = norm / n;
            if (norm > 0.0) grad.d_e[i] = e.vectors[i] * (a.values[i] / (n * norm));
        }
        return grad;
    }

    const auto fwd = directed_nearest(p.points, pprime.points);   // P -> P'
    const auto bwd = directed_nearest(pprime.points, p.points);   // P' -> P

    const double fwd_value = kind == DistanceKind::Chamfer ? fwd.mean : fwd.max_value;
    const double bwd_value = kind == DistanceKind::Chamfer ? bwd.mean : bwd.max_value;
    const bool forward_active = fwd_value >= bwd_value;  // ties take P -> P'
    grad.active_branch = forward_active ? DistanceGradient::Branch::ForwardPToPrime
                                        : DistanceGradient::Branch::BackwardPrimeToP;

    // each active pair (reference point r, adversarial point p'_j) contributes
    // weight * e_j^T u to d_a[j] and weight * a_j u to d_e[j], u = (p'_j - r)/dist
    const auto accumulate = [&](std::size_t j, const Point3& ref, double dist, double weight) {
        if (dist <= 0.0) return;
        const Vec3 u = (pprime.points[j] - ref) / dist;
        grad.d_a[j] += weight * e.vectors[j].dot(u);
        grad.d_e[j] += u * (weight * a.values[j]);
    };

    if (forward_active) {
        if (kind == DistanceKind::Chamfer) {
            const double w = 1.0 / static_cast<double>(p.size());
            for (std::size_t k = 0; k < p.size(); ++k)
                accumulate(static_cast<std::size_t>(fwd.nn[k]), p.points[k], fwd.dist[k], w);
        } else {
            const std::size_t k = static_cast<std::size_t>(fwd.argmax);
            accumulate(static_cast<std::size_t>(fwd.nn[k]), p.points[k], fwd.dist[k], 1.0);
        }
    } else {
        if (kind == DistanceKind::Chamfer) {
            const double w = 1.0 / static_cast<double>(m);
            for (std::size_t j = 0; j < m; ++j)
                accumulate(j, p.points[static_cast<std::size_t>(bwd.nn[j])], bwd.dist[j], w);
        } else {
            const std::size_t j = static_cast<std::size_t>(bwd.argmax);
            accumulate(j, p.points[static_cast<std::size_t>(bwd.nn[j])], bwd.dist[j], 1.0);
        }
    }
    return grad;
}

}  // namespace pcadv
