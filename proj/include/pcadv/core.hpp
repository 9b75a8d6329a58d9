#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcadv {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x; y += o.y; z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        x -= o.x; y -= o.y; z -= o.z;
        return *this;
    }
    Vec3 operator-() const { return {-x, -y, -z}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double squaredNorm() const { return dot(*this); }
    double norm() const { return std::sqrt(squaredNorm()); }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

using Point3 = Vec3;

inline double distance(const Point3& a, const Point3& b) { return (a - b).norm(); }
inline double squared_distance(const Point3& a, const Point3& b) {
    return (a - b).squaredNorm();
}

// Ordered set of 3D points. Order is meaningful: manipulation indicators and
// perturbations pair with points by index, and addition mode appends
// intentional duplicates, so there is no deduplication.
struct PointCloud {
    std::vector<Point3> points;
    std::optional<int> label;
    std::string id;
    // set by the normalizers when the input had zero extent
    bool degenerate = false;

    PointCloud() = default;
    explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    const Point3& operator[](std::size_t i) const { return points[i]; }
    Point3& operator[](std::size_t i) { return points[i]; }
};

// Relaxed point-selection indicator. Values live in [0,1]; frozen entries are
// never updated by the attack optimizer.
struct IndicatorVector {
    std::vector<double> values;
    std::vector<std::uint8_t> frozen;

    IndicatorVector() = default;
    explicit IndicatorVector(std::size_t n, double value = 0.0)
        : values(n, value), frozen(n, 0) {}

    std::size_t size() const { return values.size(); }
};

// One displacement vector per point, in unit-cube units.
struct PerturbationSet {
    std::vector<Vec3> vectors;

    PerturbationSet() = default;
    explicit PerturbationSet(std::size_t n) : vectors(n) {}

    std::size_t size() const { return vectors.size(); }
};

// Uniform rescale into [0,1]^3: translate the min corner to the origin and
// divide every axis by the largest extent, preserving shape ratios. A cloud
// with zero extent on all axes collapses to the origin and is flagged
// degenerate. Exactly idempotent: a second pass sees extent 1.0 and min 0.
inline PointCloud normalize_unit_cube(const PointCloud& cloud) {
    if (cloud.empty()) throw std::invalid_argument("normalize_unit_cube: empty cloud");
    Point3 lo = cloud.points.front();
    Point3 hi = cloud.points.front();
    for (const auto& p : cloud.points) {
        lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
    }
    const double extent =
        std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
    PointCloud out = cloud;
    if (extent <= 0.0) {
        for (auto& p : out.points) p = Point3{0.0, 0.0, 0.0};
        out.degenerate = true;
        return out;
    }
    for (auto& p : out.points) {
        p = Point3{(p.x - lo.x) / extent, (p.y - lo.y) / extent, (p.z - lo.z) / extent};
    }
    return out;
}

// Centroid to the cube center, furthest-point radius rescaled to 0.5, so the
// result lies in [0,1]^3 with the centroid at (0.5,0.5,0.5). Used for clouds
// with background, where bounding-box normalization is dominated by clutter.
inline PointCloud normalize_mean_furthest(const PointCloud& cloud) {
    if (cloud.empty())
        throw std::invalid_argument("normalize_mean_furthest: empty cloud");
    Vec3 centroid{0, 0, 0};
    for (const auto& p : cloud.points) centroid += p;
    centroid = centroid / static_cast<double>(cloud.size());
    double radius = 0.0;
    for (const auto& p : cloud.points) radius = std::max(radius, (p - centroid).norm());
    PointCloud out = cloud;
    const Vec3 center{0.5, 0.5, 0.5};
    if (radius <= 0.0) {
        for (auto& p : out.points) p = center;
        out.degenerate = true;
        return out;
    }
    const double scale = 0.5 / radius;
    for (auto& p : out.points) {
        Vec3 q = (p - centroid) * scale + center;
        p = Point3{std::clamp(q.x, 0.0, 1.0), std::clamp(q.y, 0.0, 1.0),
                   std::clamp(q.z, 0.0, 1.0)};
    }
    return out;
}

// p'_i = p_i + a_i * e_i. Accepts relaxed (non-binary) indicators: the
// optimizer evaluates the adversarial cloud with a-hat during iterations.
inline PointCloud apply_manipulation(const PointCloud& cloud, const IndicatorVector& a,
                                     const PerturbationSet& e) {
    if (a.size() != cloud.size() || e.size() != cloud.size())
        throw std::invalid_argument(
            "apply_manipulation: indicator/perturbation length mismatch");
    PointCloud out = cloud;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.points[i] += e.vectors[i] * a.values[i];
    return out;
}

}  // namespace pcadv
