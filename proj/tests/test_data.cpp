#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pcadv/io.hpp"
#include "pcadv/shapes.hpp"

#include <filesystem>
#include <fstream>

using namespace pcadv;
namespace fs = std::filesystem;

TEST_CASE("sphere samples sit on the unit sphere before normalization") {
    Rng rng(500);
    for (int i = 0; i < 200; ++i) {
        const Point3 p = detail::sample_sphere(rng);
        CHECK(std::fabs(p.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("gen_shape is deterministic and respects invariants") {
    ShapeSpec spec;
    spec.shape = ShapeClass::Torus;
    spec.n_points = 64;
    spec.jitter = 0.01;
    spec.seed = 12;
    const PointCloud a = gen_shape(spec);
    const PointCloud b = gen_shape(spec);
    REQUIRE(a.size() == 64);
    CHECK(*a.label == static_cast<int>(ShapeClass::Torus));
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.points[i] == b.points[i]);
    for (const auto& p : a.points) {
        CHECK(p.x >= 0.0);
        CHECK(p.x <= 1.0);
        CHECK(p.y >= 0.0);
        CHECK(p.y <= 1.0);
        CHECK(p.z >= 0.0);
        CHECK(p.z <= 1.0);
    }
    spec.n_points = 4;
    CHECK_THROWS_AS(gen_shape(spec), std::invalid_argument);
}

TEST_CASE("cube sampling is uniform per face") {
    Rng rng(501);
    std::array<int, 6> counts{};
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const Point3 p = detail::sample_cube(rng);
        if (p.x == -1.0) ++counts[0];
        else if (p.x == 1.0) ++counts[1];
        else if (p.y == -1.0) ++counts[2];
        else if (p.y == 1.0) ++counts[3];
        else if (p.z == -1.0) ++counts[4];
        else ++counts[5];
    }
    for (int f = 0; f < 6; ++f)
        CHECK(std::fabs(counts[static_cast<std::size_t>(f)] - n / 6.0) < 0.05 * n / 6.0);
}

TEST_CASE("gen_dataset splits deterministically") {
    ShapeSpec defaults;
    defaults.n_points = 16;
    const Dataset ds = gen_dataset(8, 20, defaults, 7);
    CHECK(ds.train.size() == 8 * 16);
    CHECK(ds.test.size() == 8 * 4);
    CHECK(ds.num_classes == 8);

    SECTION("splits are disjoint by id") {
        std::set<std::string> train_ids;
        for (const auto& c : ds.train) train_ids.insert(c.id);
        CHECK(train_ids.size() == ds.train.size());
        for (const auto& c : ds.test) CHECK(train_ids.count(c.id) == 0);
    }
    SECTION("classes are balanced") {
        std::array<int, 8> counts{};
        for (const auto& c : ds.train) ++counts[static_cast<std::size_t>(*c.label)];
        for (int k : counts) CHECK(k == 16);
    }
    SECTION("another seed changes membership, not sizes") {
        const Dataset other = gen_dataset(8, 20, defaults, 8);
        CHECK(other.train.size() == ds.train.size());
        CHECK(other.test.size() == ds.test.size());
        std::set<std::string> a, b;
        for (const auto& c : ds.test) a.insert(c.id);
        for (const auto& c : other.test) b.insert(c.id);
        CHECK(a != b);
    }
}

TEST_CASE("xyz round trip preserves coordinates") {
    Rng rng(502);
    const PointCloud cloud = oracles::random_cloud(rng, 50);
    const fs::path path = fs::temp_directory_path() / "pcadv_test_cloud.xyz";
    save_xyz(cloud, path.string());
    const PointCloud back = load_xyz(path.string());
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        CHECK((back.points[i] - cloud.points[i]).norm() < 1e-9);
    fs::remove(path);
}

TEST_CASE("xyz parse errors carry the line number") {
    const fs::path path = fs::temp_directory_path() / "pcadv_test_bad.xyz";
    {
        std::ofstream out(path);
        out << "0 0 0\n0.5 a 1\n";
    }
    CHECK_THROWS_WITH(load_xyz(path.string()), Catch::Matchers::ContainsSubstring("line 2"));
    {
        std::ofstream out(path);
        out << "";
    }
    CHECK_THROWS_WITH(load_xyz(path.string()), Catch::Matchers::ContainsSubstring("no points"));
    fs::remove(path);
}

TEST_CASE("off loading samples triangles by area") {
    const fs::path path = fs::temp_directory_path() / "pcadv_test_square.off";
    {
        std::ofstream out(path);
        out << "OFF\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n";
    }
    const PointCloud cloud = load_off(path.string(), 10000, 3);
    REQUIRE(cloud.size() == 10000);
    // the two triangles split the square along the main diagonal; after
    // normalization the square is [0,1]^2 at z = 0
    int lower = 0;
    for (const auto& p : cloud.points)
        if (p.y <= p.x) ++lower;
    CHECK(std::fabs(lower - 5000.0) < 0.05 * 5000.0);
    fs::remove(path);
}

TEST_CASE("off loader rejects malformed inputs and fan-triangulates quads") {
    const fs::path bad = fs::temp_directory_path() / "pcadv_test_bad.off";
    {
        std::ofstream out(bad);
        out << "PLY\n4 1 0\n";
    }
    CHECK_THROWS_WITH(load_off(bad.string(), 10, 1),
                      Catch::Matchers::ContainsSubstring("header"));
    {
        std::ofstream out(bad);
        out << "OFF\n3 1 0\n0 0 0\n0 0 0\n0 0 0\n3 0 1 2\n";
    }
    CHECK_THROWS_WITH(load_off(bad.string(), 10, 1),
                      Catch::Matchers::ContainsSubstring("zero-area"));
    {
        std::ofstream out(bad);
        out << "OFF\n# comment\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
    }
    const PointCloud quad = load_off(bad.string(), 64, 1);
    CHECK(quad.size() == 64);
    fs::remove(bad);
}

TEST_CASE("dataset saves and reloads through the manifest") {
    ShapeSpec defaults;
    defaults.n_points = 12;
    const Dataset ds = gen_dataset(2, 5, defaults, 77);
    const fs::path dir = fs::temp_directory_path() / "pcadv_test_ds";
    fs::remove_all(dir);
    std::vector<std::string> names{"sphere", "cube"};
    save_dataset(ds, dir.string(), names, 77);
    const Dataset back = load_dataset((dir / "manifest.json").string());
    REQUIRE(back.train.size() == ds.train.size());
    REQUIRE(back.test.size() == ds.test.size());
    CHECK(back.num_classes == 2);
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
        CHECK(back.train[i].id == ds.train[i].id);
        CHECK(*back.train[i].label == *ds.train[i].label);
        for (std::size_t k = 0; k < ds.train[i].size(); ++k)
            CHECK((back.train[i].points[k] - ds.train[i].points[k]).norm() < 1e-9);
    }
    fs::remove_all(dir);
}
