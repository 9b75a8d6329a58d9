// Acceptance suite: one pass/fail line per criterion (A1-A9).
// Builds the desk-scale dataset, trains the toy classifier once, then drives
// every criterion at its stated tolerance. Exit code 0 iff all pass.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pcadv/pcadv.hpp"

using namespace pcadv;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kDataSeed = 42;
constexpr std::uint64_t kTrainSeed = 7;
constexpr std::uint64_t kAttackSeed = 2024;
constexpr int kPointsPerCloud = 256;

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s %s - %s\n", name.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

bool clouds_bit_identical(const PointCloud& a, const PointCloud& b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!(a.points[i] == b.points[i])) return false;
    return true;
}

// ---------- A1: gradient fidelity ----------
void run_a1(const Classifier& net) {
    const auto t0 = Clock::now();
    Rng rng(kAttackSeed + 1);
    double max_rel = 0.0;
    long checked = 0, excluded = 0;
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t n = 8 + rng.index(9);
        PointCloud cloud = oracles::random_cloud(rng, n);
        AttackState state;
        state.working = cloud;
        state.original_size = n;
        state.a_hat = IndicatorVector(n);
        state.perturb = PerturbationSet(n);
        for (std::size_t i = 0; i < n; ++i) {
            state.a_hat.values[i] = 0.001 + 0.998 * rng.uniform();
            Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
            const double len = dir.norm();
            if (len > 0.0) dir = dir / len;
            state.perturb.vectors[i] = dir * (0.05 * rng.uniform());
        }
        cloud.label =
            net.predict(apply_manipulation(cloud, state.a_hat, state.perturb));
        for (DistanceKind metric : {DistanceKind::Chamfer, DistanceKind::Hausdorff}) {
            AttackConfig cfg;
            cfg.metric = metric;
            const oracles::FdCheck res = oracles::fd_objective_check(cloud, state, net, cfg);
            max_rel = std::max(max_rel, res.max_rel_error);
            checked += res.checked;
            excluded += res.excluded;
        }
    }
    const double elapsed = seconds_since(t0);
    const double coverage =
        static_cast<double>(checked) / static_cast<double>(checked + excluded);
    const bool pass = max_rel < 1e-4 && coverage > 0.5 && elapsed < 60.0;
    report("A1", pass,
           fmt("max_rel_err=%.3g checked=%ld excluded=%ld coverage=%.2f runtime=%.1fs",
               max_rel, checked, excluded, coverage, elapsed));
}

// ---------- A2: distance oracle equivalence ----------
void run_a2() {
    const auto t0 = Clock::now();
    Rng rng(kAttackSeed + 2);
    double worst = 0.0;
    bool exact_ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const PointCloud p = oracles::random_cloud(rng, 1 + rng.index(12));
        const PointCloud q = oracles::random_cloud(rng, 1 + rng.index(12));
        worst = std::max(worst, std::fabs(chamfer(p, q) - oracles::brute_chamfer(p, q)));
        worst = std::max(worst, std::fabs(hausdorff(p, q) - oracles::brute_hausdorff(p, q)));
        exact_ok = exact_ok && chamfer(p, q) == chamfer(q, p);
        exact_ok = exact_ok && hausdorff(p, q) == hausdorff(q, p);
        exact_ok = exact_ok && chamfer(p, p) == 0.0 && hausdorff(q, q) == 0.0;
    }
    const double elapsed = seconds_since(t0);
    const bool pass = worst < 1e-12 && exact_ok && elapsed < 10.0;
    report("A2", pass,
           fmt("max_abs_diff=%.3g symmetry/self-zero=%s runtime=%.1fs", worst,
               exact_ok ? "exact" : "VIOLATED", elapsed));
}

}  // namespace

int main() {
    const auto t_total = Clock::now();

    // shared fixtures: dataset and toy classifier
    std::printf("building dataset (8 classes x 200, N=%d)...\n", kPointsPerCloud);
    ShapeSpec defaults;
    defaults.n_points = kPointsPerCloud;
    defaults.jitter = 0.01;
    const Dataset ds = gen_dataset(8, 200, defaults, kDataSeed);

    std::printf("training toy classifier...\n");
    TrainConfig tcfg;
    tcfg.epochs = 15;
    tcfg.batch_size = 16;
    tcfg.learning_rate = 0.01;
    tcfg.seed = kTrainSeed;
    tcfg.jitter_sigma = 0.01;
    TrainReport treport;
    const Classifier net = train_classifier(ds, tcfg, ClassifierSpec{}, &treport);
    std::printf("train_acc=%.4f test_acc=%.4f (%.1fs elapsed)\n", treport.train_accuracy,
                treport.test_accuracy, seconds_since(t_total));

    run_a1(net);
    run_a2();

    // ---------- A3: desk-scale attack efficacy ----------
    std::vector<SampleRecord> a3_records;
    std::vector<AttackResult> a3_results;
    std::vector<PointCloud> a3_samples(ds.test.begin(), ds.test.begin() + 100);
    {
        const auto t0 = Clock::now();
        AttackConfig cfg;
        cfg.seed = kAttackSeed;
        std::vector<double> wall;
        a3_results = run_attack_batch(a3_samples, net, cfg, /*threads=*/1, &wall);
        a3_records = records_from_results(a3_samples, a3_results, wall);
        const AggregateRow row = aggregate_records(a3_records, "ours", "perturb", "hausdorff");
        const double elapsed = seconds_since(t0);
        const bool pass = treport.test_accuracy >= 0.90 && row.success_rate >= 0.80 &&
                          row.points_mean <= 0.10 * kPointsPerCloud && elapsed < 900.0;
        report("A3", pass,
               fmt("test_acc=%.3f success=%.3f mean_points=%.1f (<=%.1f) attacked=%d "
                   "runtime=%.0fs",
                   treport.test_accuracy, row.success_rate, row.points_mean,
                   0.10 * kPointsPerCloud, row.n_samples, elapsed));
    }

    // ---------- A4: ablation trends ----------
    {
        std::vector<PointCloud> subset(ds.test.begin(), ds.test.begin() + 50);
        const std::vector<SampleRecord> defaults_records(a3_records.begin(),
                                                         a3_records.begin() + 50);
        const AggregateRow base =
            aggregate_records(defaults_records, "defaults", "perturb", "hausdorff");

        AttackConfig l1zero;
        l1zero.lambda1 = 0.0;
        l1zero.seed = kAttackSeed;
        const auto r_l1 = run_attack_batch(subset, net, l1zero, 2);
        const AggregateRow row_l1 = aggregate_records(
            records_from_results(subset, r_l1, {}), "lambda1_zero", "perturb", "hausdorff");

        AttackConfig l2zero;
        l2zero.lambda2 = 0.0;
        l2zero.seed = kAttackSeed;
        const auto r_l2 = run_attack_batch(subset, net, l2zero, 2);
        const AggregateRow row_l2 = aggregate_records(
            records_from_results(subset, r_l2, {}), "lambda2_zero", "perturb", "hausdorff");

        const bool points_trend = row_l1.points_mean >= 5.0 * base.points_mean;
        const bool hausdorff_trend = row_l2.hausdorff_mean >= 5.0 * base.hausdorff_mean;
        report("A4", points_trend && hausdorff_trend,
               fmt("points: l1=0 %.1f vs default %.1f (need >=5x) | hausdorff: l2=0 %.4f vs "
                   "default %.4f (need >=5x)",
                   row_l1.points_mean, base.points_mean, row_l2.hausdorff_mean,
                   base.hausdorff_mean));
    }

    // ---------- A5: metric-choice trend ----------
    {
        AttackConfig chamfer_cfg;
        chamfer_cfg.metric = DistanceKind::Chamfer;
        chamfer_cfg.seed = kAttackSeed;
        const auto r_ch = run_attack_batch(a3_samples, net, chamfer_cfg, 2);
        const AggregateRow row_ch = aggregate_records(
            records_from_results(a3_samples, r_ch, {}), "ours", "perturb", "chamfer");
        const AggregateRow row_h =
            aggregate_records(a3_records, "ours", "perturb", "hausdorff");
        const bool pass = row_h.hausdorff_mean < row_ch.hausdorff_mean &&
                          row_ch.success_rate >= row_h.success_rate;
        report("A5", pass,
               fmt("output hausdorff: H-metric %.4f < C-metric %.4f | success: C %.3f >= H "
                   "%.3f",
                   row_h.hausdorff_mean, row_ch.hausdorff_mean, row_ch.success_rate,
                   row_h.success_rate));
    }

    // ---------- A6: addition-mode freeze ----------
    std::vector<AttackResult> a6_results;
    std::vector<PointCloud> a6_samples(ds.test.begin(), ds.test.begin() + 50);
    {
        AttackConfig cfg;
        cfg.mode = AttackMode::Add;
        cfg.seed = kAttackSeed;
        a6_results = run_attack_batch(a6_samples, net, cfg, 2);
        bool frozen_ok = true, init_ok = true;
        int attacked = 0;
        for (std::size_t i = 0; i < a6_results.size(); ++i) {
            const AttackResult& r = a6_results[i];
            if (r.skipped) continue;
            ++attacked;
            frozen_ok = frozen_ok && r.adversarial.size() >= a6_samples[i].size() &&
                        clouds_bit_identical(r.adversarial, a6_samples[i],
                                             a6_samples[i].size());
            AttackConfig per = cfg;
            per.seed = derive_seed(cfg.seed, i);
            const auto state = init_addition(a6_samples[i], net, per);
            init_ok = init_ok && state.has_value() &&
                      chamfer(a6_samples[i], state->working) == 0.0 &&
                      hausdorff(a6_samples[i], state->working) == 0.0;
        }
        report("A6", frozen_ok && init_ok && attacked > 0,
               fmt("attacked=%d originals_bit_identical=%s init_distance_zero=%s", attacked,
                   frozen_ok ? "yes" : "NO", init_ok ? "yes" : "NO"));
    }

    // ---------- A7: invariant suite ----------
    {
        bool projection_ok = true, frozen_ok = true, binary_success_ok = true,
             permutation_ok = true, subset_ok = true;
        // instrumented optimizer runs, both modes
        for (int pick = 0; pick < 3; ++pick) {
            PointCloud cloud = ds.test[static_cast<std::size_t>(pick)];
            for (AttackMode mode : {AttackMode::Perturb, AttackMode::Add}) {
                AttackConfig cfg;
                cfg.mode = mode;
                cfg.seed = kAttackSeed + static_cast<std::uint64_t>(pick);
                auto state = init_attack(cloud, net, cfg);
                if (!state) continue;
                const auto frozen_values = state->a_hat.values;
                for (int n = 0; n < cfg.iterations && !state->numerical_failure; ++n) {
                    attack_step(cloud, *state, net, cfg);
                    for (std::size_t i = 0; i < state->size(); ++i) {
                        projection_ok = projection_ok && state->a_hat.values[i] >= 0.0 &&
                                        state->a_hat.values[i] <= 1.0;
                        if (state->a_hat.frozen[i])
                            frozen_ok =
                                frozen_ok && state->a_hat.values[i] == frozen_values[i];
                    }
                }
            }
        }
        // success must be judged on the binarized cloud
        for (const auto& r : a3_results) {
            if (r.skipped) continue;
            const int pred = net.predict(r.adversarial);
            binary_success_ok = binary_success_ok && pred == r.predicted_class &&
                                r.success == (pred != r.true_class);
        }
        // exact permutation invariance of forward
        Rng rng(kAttackSeed + 7);
        for (int pick = 0; pick < 5; ++pick) {
            const PointCloud& cloud = ds.test[static_cast<std::size_t>(10 + pick)];
            const Eigen::VectorXd base = net.forward(cloud);
            PointCloud shuffled = cloud;
            for (std::size_t i = shuffled.size(); i > 1; --i)
                std::swap(shuffled.points[i - 1], shuffled.points[rng.index(i)]);
            const Eigen::VectorXd out = net.forward(shuffled);
            for (Eigen::Index c = 0; c < out.size(); ++c)
                permutation_ok = permutation_ok && out(c) == base(c);
        }
        // defenses only delete points
        for (int pick = 0; pick < 5; ++pick) {
            const PointCloud& cloud = ds.test[static_cast<std::size_t>(20 + pick)];
            DefenseConfig outlier;
            DefenseConfig salient;
            salient.kind = DefenseKind::Salient;
            salient.remove_count = 20;
            const PointCloud d1 = outlier_removal(cloud, outlier);
            const PointCloud d2 = salient_removal(cloud, net, *cloud.label, salient);
            const auto check_subset = [&](const PointCloud& sub) {
                std::size_t j = 0;
                for (const auto& p : sub.points) {
                    while (j < cloud.size() && !(cloud.points[j] == p)) ++j;
                    if (j == cloud.size()) return false;
                    ++j;
                }
                return true;
            };
            subset_ok = subset_ok && check_subset(d1) && check_subset(d2) &&
                        d2.size() == cloud.size() - 20;
        }
        const bool pass =
            projection_ok && frozen_ok && binary_success_ok && permutation_ok && subset_ok;
        report("A7", pass,
               fmt("projection=%s frozen=%s binarized_success=%s permutation=%s "
                   "defense_subset=%s",
                   projection_ok ? "ok" : "NO", frozen_ok ? "ok" : "NO",
                   binary_success_ok ? "ok" : "NO", permutation_ok ? "ok" : "NO",
                   subset_ok ? "ok" : "NO"));
    }

    // ---------- A8: determinism across runs and thread counts ----------
    {
        std::vector<PointCloud> subset(ds.test.begin(), ds.test.begin() + 20);
        AttackConfig cfg;
        cfg.seed = kAttackSeed;
        const auto csv_for = [&](int threads) {
            const auto results = run_attack_batch(subset, net, cfg, threads);
            const auto records = records_from_results(subset, results, {});
            return aggregate_csv(
                {aggregate_records(records, "ours", "perturb", "hausdorff")});
        };
        const std::string t1 = csv_for(1);
        const std::string t1_again = csv_for(1);
        const std::string t2 = csv_for(2);
        const std::string t4 = csv_for(4);
        const bool pass = t1 == t1_again && t1 == t2 && t1 == t4;
        report("A8", pass, pass ? "aggregate CSV byte-identical across reruns and threads 1/2/4"
                                : "CSV MISMATCH across runs or thread counts");
    }

    // ---------- A9: analysis sanity ----------
    {
        bool chain_ok = true;
        int considered = 0;
        for (std::size_t i = 0; i < a3_results.size(); ++i) {
            const AttackResult& r = a3_results[i];
            if (r.skipped) continue;
            const OverlapReport rep = critical_overlap(a3_samples[i], r, net);
            chain_ok = chain_ok && rep.num_identical <= rep.num_near &&
                       rep.num_near <= rep.num_selected && rep.frac_identical >= 0.0 &&
                       rep.frac_identical <= 1.0 && rep.frac_near <= 1.0;
            ++considered;
        }
        // identity transfer must equal the source success rate exactly
        std::vector<PointCloud> advs;
        std::vector<int> labels;
        int successes = 0, attacked = 0;
        for (const auto& r : a3_results) {
            if (r.skipped) continue;
            advs.push_back(r.adversarial);
            labels.push_back(r.true_class);
            ++attacked;
            if (r.success) ++successes;
        }
        const double identity = transfer_eval(advs, labels, net, net);
        const double source_rate = static_cast<double>(successes) / attacked;
        const bool identity_ok = identity == source_rate;
        report("A9", chain_ok && identity_ok && considered > 0,
               fmt("overlap chain ok on %d samples; identity transfer %.6f == source %.6f: %s",
                   considered, identity, source_rate, identity_ok ? "yes" : "NO"));
    }

    std::printf("acceptance total runtime: %.0fs, failures: %d\n", seconds_since(t_total),
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
