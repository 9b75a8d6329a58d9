#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcadv/core.hpp"
#include "pcadv/rng.hpp"
#include "pcadv/train.hpp"

namespace pcadv {

// Text format, one "x y z" triple per line, 17 significant digits so a
// round trip reproduces coordinates exactly.
inline void save_xyz(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_xyz: cannot write " + path);
    char line[128];
    for (const auto& p : cloud.points) {
        std::snprintf(line, sizeof(line), "%.17g %.17g %.17g\n", p.x, p.y, p.z);
        out << line;
    }
}

inline PointCloud load_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_xyz: cannot read " + path);
    PointCloud cloud;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        Point3 p;
        std::string extra;
        if (!(ss >> p.x >> p.y >> p.z) || (ss >> extra))
            throw std::runtime_error("load_xyz: " + path + ": parse error at line " +
                                     std::to_string(line_no));
        cloud.points.push_back(p);
    }
    if (cloud.empty()) throw std::runtime_error("load_xyz: " + path + ": no points (N >= 1)");
    return cloud;
}

namespace detail {

inline std::string next_meaningful_line(std::istream& in, int& line_no,
                                        const std::string& path) {
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') continue;
        return line;
    }
    throw std::runtime_error("load_off: " + path + ": unexpected end of file");
}

}  // namespace detail

// Reads an OFF triangle mesh and samples n_points uniformly by triangle area
// (non-triangular faces are fan-triangulated), then normalizes into the unit
// cube. This is the entry point for full-scale mesh datasets.
inline PointCloud load_off(const std::string& path, int n_points, std::uint64_t seed) {
    if (n_points < 1) throw std::invalid_argument("load_off: n_points >= 1");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_off: cannot read " + path);
    int line_no = 0;
    std::string header = detail::next_meaningful_line(in, line_no, path);
    std::istringstream hs(header);
    std::string magic;
    hs >> magic;
    if (magic != "OFF")
        throw std::runtime_error("load_off: " + path + ": header is not OFF");
    long nv = -1, nf = -1, ne = -1;
    if (!(hs >> nv >> nf >> ne)) {
        std::istringstream cs(detail::next_meaningful_line(in, line_no, path));
        if (!(cs >> nv >> nf >> ne))
            throw std::runtime_error("load_off: " + path + ": bad count line");
    }
    if (nv < 3 || nf < 1)
        throw std::runtime_error("load_off: " + path + ": not enough vertices or faces");

    std::vector<Point3> vertices;
    vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        std::istringstream vs(detail::next_meaningful_line(in, line_no, path));
        Point3 p;
        if (!(vs >> p.x >> p.y >> p.z))
            throw std::runtime_error("load_off: " + path + ": bad vertex at line " +
                                     std::to_string(line_no));
        vertices.push_back(p);
    }

    struct Triangle {
        Point3 a, b, c;
        double area;
    };
    std::vector<Triangle> triangles;
    std::vector<double> cumulative;
    double total_area = 0.0;
    for (long f = 0; f < nf; ++f) {
        std::istringstream fs(detail::next_meaningful_line(in, line_no, path));
        long k = 0;
        if (!(fs >> k) || k < 3)
            throw std::runtime_error("load_off: " + path + ": bad face at line " +
                                     std::to_string(line_no));
        std::vector<long> idx(static_cast<std::size_t>(k));
        for (long j = 0; j < k; ++j) {
            if (!(fs >> idx[static_cast<std::size_t>(j)]) ||
                idx[static_cast<std::size_t>(j)] < 0 ||
                idx[static_cast<std::size_t>(j)] >= nv)
                throw std::runtime_error("load_off: " + path + ": bad face index at line " +
                                         std::to_string(line_no));
        }
        for (long j = 1; j + 1 < k; ++j) {
            Triangle t;
            t.a = vertices[static_cast<std::size_t>(idx[0])];
            t.b = vertices[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
            t.c = vertices[static_cast<std::size_t>(idx[static_cast<std::size_t>(j + 1)])];
            const Vec3 u = t.b - t.a, v = t.c - t.a;
            const Vec3 cross{u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z,
                             u.x * v.y - u.y * v.x};
            t.area = 0.5 * cross.norm();
            total_area += t.area;
            triangles.push_back(t);
            cumulative.push_back(total_area);
        }
    }
    if (!(total_area > 0.0))
        throw std::invalid_argument("load_off: " + path + ": zero-area mesh");

    Rng rng(seed);
    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double pick = rng.uniform() * total_area;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
        const std::size_t t = it == cumulative.end() ? cumulative.size() - 1
                                                     : static_cast<std::size_t>(
                                                           it - cumulative.begin());
        const double su = std::sqrt(rng.uniform());
        const double v = rng.uniform();
        const Triangle& tri = triangles[t];
        cloud.points.push_back(tri.a * (1.0 - su) + tri.b * (su * (1.0 - v)) +
                               tri.c * (su * v));
    }
    return normalize_unit_cube(cloud);
}

// On-disk dataset layout: one .xyz file per cloud plus a manifest listing
// file, label, and split membership.
inline void save_dataset(const Dataset& ds, const std::string& dir,
                         const std::vector<std::string>& class_names, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "clouds");
    nlohmann::json manifest;
    manifest["format"] = "pcadv-dataset";
    manifest["version"] = 1;
    manifest["num_classes"] = ds.num_classes;
    manifest["class_names"] = class_names;
    manifest["seed"] = seed;
    nlohmann::json samples = nlohmann::json::array();
    const auto dump_split = [&](const std::vector<PointCloud>& clouds,
                                const std::string& split) {
        for (const auto& cloud : clouds) {
            const std::string rel = "clouds/" + cloud.id + ".xyz";
            save_xyz(cloud, (fs::path(dir) / rel).string());
            samples.push_back(nlohmann::json{{"file", rel},
                                             {"id", cloud.id},
                                             {"label", cloud.label.value()},
                                             {"split", split}});
        }
    };
    dump_split(ds.train, "train");
    dump_split(ds.test, "test");
    manifest["samples"] = std::move(samples);
    std::ofstream out((fs::path(dir) / "manifest.json").string());
    if (!out) throw std::runtime_error("save_dataset: cannot write manifest in " + dir);
    out << manifest.dump(2) << '\n';
}

inline Dataset load_dataset(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("load_dataset: cannot read " + manifest_path);
    nlohmann::json manifest;
    in >> manifest;
    if (manifest.value("format", "") != "pcadv-dataset")
        throw std::runtime_error("load_dataset: not a dataset manifest");
    Dataset ds;
    ds.num_classes = manifest.at("num_classes").get<int>();
    const fs::path base = fs::path(manifest_path).parent_path();
    for (const auto& sample : manifest.at("samples")) {
        PointCloud cloud = load_xyz((base / sample.at("file").get<std::string>()).string());
        cloud.label = sample.at("label").get<int>();
        cloud.id = sample.at("id").get<std::string>();
        const std::string split = sample.at("split").get<std::string>();
        (split == "test" ? ds.test : ds.train).push_back(std::move(cloud));
    }
    return ds;
}

}  // namespace pcadv
