#pragma once

#include <atomic>
#include <chrono>
#include <thread>
#include <vector>

#include "pcadv/attack.hpp"
#include "pcadv/report.hpp"
#include "pcadv/rng.hpp"

namespace pcadv {

// Runs one attack per sample against a shared immutable classifier. Each
// sample gets its own RNG stream derived from (master seed, sample index),
// and results land in sample order, so the outcome is independent of the
// thread count and of scheduling.
inline std::vector<AttackResult> run_attack_batch(const std::vector<PointCloud>& samples,
                                                  const Classifier& net,
                                                  const AttackConfig& base_cfg, int threads,
                                                  std::vector<double>* wall_times = nullptr) {
    base_cfg.validate();
    std::vector<AttackResult> results(samples.size());
    std::vector<double> times(samples.size(), 0.0);

    const auto work_one = [&](std::size_t i) {
        AttackConfig cfg = base_cfg;
        cfg.seed = derive_seed(base_cfg.seed, i);
        const auto t0 = std::chrono::steady_clock::now();
        results[i] = run_attack(samples[i], net, cfg);
        times[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (threads <= 1 || samples.size() <= 1) {
        for (std::size_t i = 0; i < samples.size(); ++i) work_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int nthreads = std::min<int>(threads, static_cast<int>(samples.size()));
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= results.size()) return;
                    work_one(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    if (wall_times) *wall_times = std::move(times);
    return results;
}

inline std::vector<SampleRecord> records_from_results(
    const std::vector<PointCloud>& samples, const std::vector<AttackResult>& results,
    const std::vector<double>& wall_times) {
    std::vector<SampleRecord> records;
    records.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        const std::string id =
            samples[i].id.empty() ? "sample_" + std::to_string(i) : samples[i].id;
        records.push_back(
            make_record(results[i], id, wall_times.empty() ? 0.0 : wall_times[i]));
    }
    return records;
}

}  // namespace pcadv
