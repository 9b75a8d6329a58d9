#include <catch2/catch_amalgamated.hpp>

#include "pcadv/report.hpp"

#include <filesystem>

using namespace pcadv;
namespace fs = std::filesystem;

namespace {

std::vector<SampleRecord> synthetic_records() {
    std::vector<SampleRecord> records;
    SampleRecord skipped;
    skipped.id = "s0";
    skipped.skipped = true;
    records.push_back(skipped);

    SampleRecord win;
    win.id = "s1";
    win.success = true;
    win.num_manipulated = 10;
    win.chamfer_distance = 0.002;
    win.hausdorff_distance = 0.02;
    records.push_back(win);

    SampleRecord win2 = win;
    win2.id = "s2";
    win2.num_manipulated = 20;
    win2.chamfer_distance = 0.004;
    win2.hausdorff_distance = 0.04;
    records.push_back(win2);

    SampleRecord loss;
    loss.id = "s3";
    loss.success = false;
    loss.num_manipulated = 99;
    records.push_back(loss);
    return records;
}

}  // namespace

TEST_CASE("aggregation excludes skipped samples and averages over successes") {
    const auto records = synthetic_records();
    const AggregateRow row = aggregate_records(records, "ours", "perturb", "hausdorff");
    CHECK(row.n_samples == 3);  // one skipped
    CHECK(row.success_rate == Catch::Approx(2.0 / 3.0));
    CHECK(row.points_mean == Catch::Approx(15.0));
    CHECK(row.chamfer_mean == Catch::Approx(0.003));
    CHECK(row.hausdorff_mean == Catch::Approx(0.03));
}

TEST_CASE("aggregate CSV is stable and recomputable") {
    const auto records = synthetic_records();
    const AggregateRow row = aggregate_records(records, "ours", "perturb", "hausdorff");
    const std::string csv1 = aggregate_csv({row});
    const std::string csv2 = aggregate_csv({aggregate_records(records, "ours", "perturb",
                                                              "hausdorff")});
    CHECK(csv1 == csv2);
    CHECK(csv1.rfind("method,mode,metric,success_rate,chamfer_mean,hausdorff_mean,"
                     "points_mean,n_samples\n",
                     0) == 0);
}

TEST_CASE("records round-trip through JSON lines") {
    const auto records = synthetic_records();
    const fs::path path = fs::temp_directory_path() / "pcadv_test_records.jsonl";
    write_records_jsonl(records, path.string());
    const auto back = read_records_jsonl(path.string());
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].id == records[i].id);
        CHECK(back[i].skipped == records[i].skipped);
        CHECK(back[i].success == records[i].success);
        CHECK(back[i].num_manipulated == records[i].num_manipulated);
        CHECK(back[i].chamfer_distance == records[i].chamfer_distance);
    }
    fs::remove(path);
}

TEST_CASE("empty record set aggregates to zeros") {
    const AggregateRow row = aggregate_records({}, "ours", "add", "chamfer");
    CHECK(row.n_samples == 0);
    CHECK(row.success_rate == 0.0);
    CHECK(row.points_mean == 0.0);
}
