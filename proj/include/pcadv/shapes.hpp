#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcadv/core.hpp"
#include "pcadv/rng.hpp"
#include "pcadv/train.hpp"

namespace pcadv {

enum class ShapeClass : int {
    Sphere = 0,
    Cube,
    Cylinder,
    Cone,
    Torus,
    Plane,
    Pyramid,
    Helix
};

inline constexpr int kNumShapeClasses = 8;

inline const std::array<std::string, kNumShapeClasses>& shape_class_names() {
    static const std::array<std::string, kNumShapeClasses> names{
        "sphere", "cube", "cylinder", "cone", "torus", "plane", "pyramid", "helix"};
    return names;
}

inline ShapeClass shape_class_from_string(const std::string& s) {
    const auto& names = shape_class_names();
    for (int i = 0; i < kNumShapeClasses; ++i)
        if (names[static_cast<std::size_t>(i)] == s) return static_cast<ShapeClass>(i);
    throw std::invalid_argument("unknown shape class: " + s);
}

struct ShapeSpec {
    ShapeClass shape = ShapeClass::Sphere;
    int n_points = 256;
    double jitter = 0.0;  // Gaussian sigma added before normalization
    std::uint64_t seed = 1;

    void validate() const {
        if (n_points < 8) throw std::invalid_argument("ShapeSpec: n_points >= 8");
        if (jitter < 0.0) throw std::invalid_argument("ShapeSpec: jitter >= 0");
    }
};

namespace detail {

constexpr double kPi = 3.14159265358979323846;

inline Point3 sample_sphere(Rng& rng) {
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

inline Point3 sample_cube(Rng& rng) {
    const std::size_t face = rng.index(6);
    const double u = rng.uniform(-1.0, 1.0);
    const double v = rng.uniform(-1.0, 1.0);
    switch (face) {
        case 0: return {-1.0, u, v};
        case 1: return {1.0, u, v};
        case 2: return {u, -1.0, v};
        case 3: return {u, 1.0, v};
        case 4: return {u, v, -1.0};
        default: return {u, v, 1.0};
    }
}

inline Point3 sample_cylinder(Rng& rng) {
    constexpr double radius = 0.5, half_height = 1.0;
    const double lateral = 2.0 * kPi * radius * 2.0 * half_height;
    const double cap = kPi * radius * radius;
    const double pick = rng.uniform() * (lateral + 2.0 * cap);
    if (pick < lateral) {
        const double theta = rng.uniform(0.0, 2.0 * kPi);
        const double z = rng.uniform(-half_height, half_height);
        return {radius * std::cos(theta), radius * std::sin(theta), z};
    }
    const double z = pick < lateral + cap ? -half_height : half_height;
    const double r = radius * std::sqrt(rng.uniform());
    const double theta = rng.uniform(0.0, 2.0 * kPi);
    return {r * std::cos(theta), r * std::sin(theta), z};
}

inline Point3 sample_cone(Rng& rng) {
    constexpr double radius = 1.0;
    const Point3 apex{0.0, 0.0, 1.0};
    constexpr double base_z = -1.0;
    const double slant = std::sqrt(radius * radius + 4.0);
    const double lateral = kPi * radius * slant;
    const double base = kPi * radius * radius;
    const double pick = rng.uniform() * (lateral + base);
    const double theta = rng.uniform(0.0, 2.0 * kPi);
    if (pick < lateral) {
        // area density grows linearly from the apex
        const double t = std::sqrt(rng.uniform());
        const Point3 rim{radius * std::cos(theta), radius * std::sin(theta), base_z};
        return apex + (rim - apex) * t;
    }
    const double r = radius * std::sqrt(rng.uniform());
    return {r * std::cos(theta), r * std::sin(theta), base_z};
}

inline Point3 sample_torus(Rng& rng) {
    constexpr double major = 1.0, minor = 0.35;
    // tube angle by rejection against the (R + r cos) area factor
    double theta = 0.0;
    for (;;) {
        theta = rng.uniform(0.0, 2.0 * kPi);
        if (rng.uniform() * (major + minor) <= major + minor * std::cos(theta)) break;
    }
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double ring = major + minor * std::cos(theta);
    return {ring * std::cos(phi), ring * std::sin(phi), minor * std::sin(theta)};
}

inline Point3 sample_plane(Rng& rng) {
    return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0};
}

inline Point3 sample_triangle(Rng& rng, const Point3& a, const Point3& b, const Point3& c) {
    const double su = std::sqrt(rng.uniform());
    const double v = rng.uniform();
    return a * (1.0 - su) + b * (su * (1.0 - v)) + c * (su * v);
}

inline Point3 sample_pyramid(Rng& rng) {
    const Point3 apex{0.0, 0.0, 1.5};
    const std::array<Point3, 4> base{Point3{-1, -1, 0}, Point3{1, -1, 0}, Point3{1, 1, 0},
                                     Point3{-1, 1, 0}};
    const double side_area = std::sqrt(3.25);  // 0.5 * edge(2) * slant
    const double base_area = 4.0;
    const double pick = rng.uniform() * (4.0 * side_area + base_area);
    if (pick < 4.0 * side_area) {
        const std::size_t f = std::min<std::size_t>(3, static_cast<std::size_t>(pick / side_area));
        return sample_triangle(rng, base[f], base[(f + 1) % 4], apex);
    }
    return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0};
}

inline Point3 sample_helix(Rng& rng) {
    // wire curve, uniform by arc length
    constexpr double turns = 2.5;
    const double t = rng.uniform();
    const double theta = 2.0 * kPi * turns * t;
    return {std::cos(theta), std::sin(theta), -1.0 + 2.0 * t};
}

}  // namespace detail

// N surface points sampled uniformly by area (arc length for the helix),
// jittered, then normalized into the unit cube. Deterministic given the seed.
inline PointCloud gen_shape(const ShapeSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(spec.n_points));
    for (int i = 0; i < spec.n_points; ++i) {
        Point3 p;
        switch (spec.shape) {
            case ShapeClass::Sphere: p = detail::sample_sphere(rng); break;
            case ShapeClass::Cube: p = detail::sample_cube(rng); break;
            case ShapeClass::Cylinder: p = detail::sample_cylinder(rng); break;
            case ShapeClass::Cone: p = detail::sample_cone(rng); break;
            case ShapeClass::Torus: p = detail::sample_torus(rng); break;
            case ShapeClass::Plane: p = detail::sample_plane(rng); break;
            case ShapeClass::Pyramid: p = detail::sample_pyramid(rng); break;
            case ShapeClass::Helix: p = detail::sample_helix(rng); break;
            default: throw std::invalid_argument("gen_shape: unknown shape class");
        }
        cloud.points.push_back(p);
    }
    if (spec.jitter > 0.0) {
        for (auto& p : cloud.points) {
            p.x += rng.normal(0.0, spec.jitter);
            p.y += rng.normal(0.0, spec.jitter);
            p.z += rng.normal(0.0, spec.jitter);
        }
    }
    cloud = normalize_unit_cube(cloud);
    cloud.label = static_cast<int>(spec.shape);
    cloud.id = shape_class_names()[static_cast<std::size_t>(spec.shape)];
    return cloud;
}

// Balanced dataset over the first `classes` shape classes with a
// deterministic 80/20 split. A different seed reshuffles membership but
// never the split sizes.
inline Dataset gen_dataset(int classes, int per_class, const ShapeSpec& defaults,
                           std::uint64_t seed) {
    if (classes < 2 || classes > kNumShapeClasses)
        throw std::invalid_argument("gen_dataset: classes in [2, 8]");
    if (per_class < 2) throw std::invalid_argument("gen_dataset: per_class >= 2");
    Dataset ds;
    ds.num_classes = classes;
    const int test_count = per_class / 5;
    for (int c = 0; c < classes; ++c) {
        std::vector<PointCloud> clouds;
        clouds.reserve(static_cast<std::size_t>(per_class));
        for (int k = 0; k < per_class; ++k) {
            ShapeSpec spec = defaults;
            spec.shape = static_cast<ShapeClass>(c);
            spec.seed = derive_seed(seed, static_cast<std::uint64_t>(c) * 1000003u +
                                              static_cast<std::uint64_t>(k));
            PointCloud cloud = gen_shape(spec);
            char tag[32];
            std::snprintf(tag, sizeof(tag), "_%04d", k);
            cloud.id += tag;
            clouds.push_back(std::move(cloud));
        }
        std::vector<std::size_t> order(clouds.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(derive_seed(seed, 500000u + static_cast<std::uint64_t>(c)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.index(i)]);
        for (std::size_t i = 0; i < order.size(); ++i) {
            auto& dest = i < static_cast<std::size_t>(test_count) ? ds.test : ds.train;
            dest.push_back(std::move(clouds[order[i]]));
        }
    }
    return ds;
}

}  // namespace pcadv
