// Command-line harness: dataset generation, training, attacks, defenses,
// transfer, ablations, analysis, and report emission.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "pcadv/pcadv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    json j;
    in >> j;
    return j;
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::map<std::string, const pcadv::PointCloud*> index_by_id(
    const std::vector<pcadv::PointCloud>& clouds) {
    std::map<std::string, const pcadv::PointCloud*> m;
    for (const auto& c : clouds) m[c.id] = &c;
    return m;
}

struct AdvSet {
    std::vector<pcadv::PointCloud> clouds;  // all attacked (non-skipped) samples
    std::vector<int> labels;
    std::vector<std::string> ids;
    std::string mode;
    std::string metric;
};

AdvSet load_adv_set(const std::string& dir) {
    const json manifest = load_json_file((fs::path(dir) / "adv_manifest.json").string());
    if (manifest.value("format", "") != "pcadv-advset")
        throw std::runtime_error(dir + ": not an adversarial-set directory");
    AdvSet set;
    set.mode = manifest.at("mode").get<std::string>();
    set.metric = manifest.at("metric").get<std::string>();
    for (const auto& s : manifest.at("samples")) {
        pcadv::PointCloud cloud =
            pcadv::load_xyz((fs::path(dir) / s.at("file").get<std::string>()).string());
        cloud.label = s.at("label").get<int>();
        cloud.id = s.at("id").get<std::string>();
        set.labels.push_back(*cloud.label);
        set.ids.push_back(cloud.id);
        set.clouds.push_back(std::move(cloud));
    }
    return set;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pcadv: minimal adversarial point-cloud toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    std::string config_path;
    std::string out_dir = "out";
    int threads = 1;
    app.add_option("--seed", seed, "master RNG seed")->capture_default_str();
    app.add_option("--config", config_path, "JSON config file (attack or defense)");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--threads", threads, "worker threads for batch attacks")
        ->capture_default_str();

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "generate the procedural shape dataset");
    gen->fallthrough();
    int gen_classes = 8, gen_per_class = 200, gen_points = 256;
    double gen_jitter = 0.0;
    gen->add_option("--classes", gen_classes, "number of shape classes")
        ->capture_default_str();
    gen->add_option("--per-class", gen_per_class, "samples per class")->capture_default_str();
    gen->add_option("--points", gen_points, "points per cloud")->capture_default_str();
    gen->add_option("--jitter", gen_jitter, "surface jitter sigma")->capture_default_str();
    gen->callback([&]() {
        pcadv::ShapeSpec defaults;
        defaults.n_points = gen_points;
        defaults.jitter = gen_jitter;
        const pcadv::Dataset ds =
            pcadv::gen_dataset(gen_classes, gen_per_class, defaults, seed);
        std::vector<std::string> names(pcadv::shape_class_names().begin(),
                                       pcadv::shape_class_names().begin() + gen_classes);
        pcadv::save_dataset(ds, out_dir, names, seed);
        std::printf("dataset: %zu train / %zu test, %d classes -> %s\n", ds.train.size(),
                    ds.test.size(), ds.num_classes, out_dir.c_str());
    });

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a classifier checkpoint");
    train->fallthrough();
    std::string train_data, train_arch = "maxpool", train_model_out, train_optimizer = "adam";
    int train_epochs = 30, train_batch = 16;
    double train_lr = 0.01, train_jitter = 0.0;
    bool train_rotate = false;
    train->add_option("--data", train_data, "dataset manifest.json")->required();
    train->add_option("--arch", train_arch, "maxpool | avgpool | maxpool_slim")
        ->capture_default_str();
    train->add_option("--model-out", train_model_out, "checkpoint path");
    train->add_option("--epochs", train_epochs)->capture_default_str();
    train->add_option("--batch", train_batch)->capture_default_str();
    train->add_option("--lr", train_lr)->capture_default_str();
    train->add_option("--optimizer", train_optimizer, "adam | sgd")->capture_default_str();
    train->add_option("--jitter", train_jitter, "augmentation jitter sigma")
        ->capture_default_str();
    train->add_flag("--rotate", train_rotate, "random z-rotation augmentation");
    train->callback([&]() {
        const pcadv::Dataset ds = pcadv::load_dataset(train_data);
        pcadv::TrainConfig cfg;
        cfg.epochs = train_epochs;
        cfg.batch_size = train_batch;
        cfg.learning_rate = train_lr;
        cfg.seed = seed;
        cfg.optimizer = train_optimizer == "sgd" ? pcadv::TrainConfig::Optimizer::Sgd
                                                 : pcadv::TrainConfig::Optimizer::Adam;
        cfg.jitter_sigma = train_jitter;
        cfg.rotate_z = train_rotate;
        const pcadv::ClassifierSpec spec =
            pcadv::ClassifierSpec::for_tag(train_arch, ds.num_classes);
        pcadv::TrainReport report;
        const pcadv::Classifier net = pcadv::train_classifier(ds, cfg, spec, &report);
        fs::create_directories(out_dir);
        const std::string model_path = train_model_out.empty()
                                           ? (fs::path(out_dir) / "model.json").string()
                                           : train_model_out;
        net.save(model_path);
        std::printf("arch=%s train_acc=%.4f test_acc=%.4f -> %s\n", train_arch.c_str(),
                    report.train_accuracy, report.test_accuracy, model_path.c_str());
    });

    // ---- attack ----
    auto* attack = app.add_subcommand("attack", "run the sparse attack over the test split");
    attack->fallthrough();
    std::string atk_model, atk_data, atk_mode = "perturb", atk_metric = "hausdorff",
                atk_init = "random";
    int atk_limit = 0, atk_iterations = 250, atk_budget = 128;
    double atk_lambda1 = 0.15, atk_lambda2 = 50.0, atk_gamma = 0.01, atk_tau = 0.5;
    bool atk_early = false;
    attack->add_option("--model", atk_model, "classifier checkpoint")->required();
    attack->add_option("--data", atk_data, "dataset manifest.json")->required();
    attack->add_option("--mode", atk_mode, "perturb | add")->capture_default_str();
    attack->add_option("--metric", atk_metric, "hausdorff | chamfer | euclidean")
        ->capture_default_str();
    attack->add_option("--limit", atk_limit, "attack only the first N test samples (0 = all)")
        ->capture_default_str();
    attack->add_option("--lambda1", atk_lambda1)->capture_default_str();
    attack->add_option("--lambda2", atk_lambda2)->capture_default_str();
    attack->add_option("--gamma", atk_gamma)->capture_default_str();
    attack->add_option("--iterations", atk_iterations)->capture_default_str();
    attack->add_option("--k-add", atk_budget, "addition budget K")->capture_default_str();
    attack->add_option("--init", atk_init, "random | critical | all")->capture_default_str();
    attack->add_option("--tau", atk_tau, "binarization threshold")->capture_default_str();
    attack->add_flag("--early-exit", atk_early, "stop once the binarized attack succeeds");
    std::string atk_step_rule = "sign";
    attack->add_option("--step-rule", atk_step_rule, "sign | plain")->capture_default_str();
    attack->callback([&]() {
        pcadv::AttackConfig cfg;
        if (!config_path.empty()) cfg = pcadv::AttackConfig::from_json(load_json_file(config_path));
        if (attack->count("--mode")) cfg.mode = pcadv::attack_mode_from_string(atk_mode);
        if (attack->count("--metric"))
            cfg.metric = pcadv::distance_kind_from_string(atk_metric);
        if (attack->count("--lambda1")) cfg.lambda1 = atk_lambda1;
        if (attack->count("--lambda2")) cfg.lambda2 = atk_lambda2;
        if (attack->count("--gamma")) cfg.gamma = atk_gamma;
        if (attack->count("--iterations")) cfg.iterations = atk_iterations;
        if (attack->count("--k-add")) cfg.addition_budget = atk_budget;
        if (attack->count("--init")) cfg.init = pcadv::init_scheme_from_string(atk_init);
        if (attack->count("--tau")) cfg.binarize_threshold = atk_tau;
        if (attack->count("--early-exit")) cfg.early_exit = atk_early;
        if (attack->count("--step-rule"))
            cfg.step_rule = pcadv::step_rule_from_string(atk_step_rule);
        if (config_path.empty() || app.count("--seed")) cfg.seed = seed;
        cfg.validate();

        const pcadv::Classifier net = pcadv::Classifier::load(atk_model);
        const pcadv::Dataset ds = pcadv::load_dataset(atk_data);
        std::vector<pcadv::PointCloud> samples = ds.test;
        if (atk_limit > 0 && static_cast<std::size_t>(atk_limit) < samples.size())
            samples.resize(static_cast<std::size_t>(atk_limit));

        std::vector<double> wall;
        const std::vector<pcadv::AttackResult> results =
            pcadv::run_attack_batch(samples, net, cfg, threads, &wall);
        const std::vector<pcadv::SampleRecord> records =
            pcadv::records_from_results(samples, results, wall);
        const pcadv::AggregateRow row = pcadv::aggregate_records(
            records, "ours", pcadv::to_string(cfg.mode), pcadv::to_string(cfg.metric));

        fs::create_directories(fs::path(out_dir) / "adv");
        pcadv::write_records_jsonl(records, (fs::path(out_dir) / "records.jsonl").string());
        pcadv::write_aggregate_csv({row}, (fs::path(out_dir) / "aggregate.csv").string());

        json adv_samples = json::array();
        int n_skipped = 0;
        for (std::size_t i = 0; i < results.size(); ++i) {
            if (results[i].skipped) {
                ++n_skipped;
                continue;
            }
            const std::string rel = "adv/" + records[i].id + ".xyz";
            pcadv::save_xyz(results[i].adversarial, (fs::path(out_dir) / rel).string());
            adv_samples.push_back(json{{"id", records[i].id},
                                       {"file", rel},
                                       {"label", results[i].true_class},
                                       {"success", results[i].success}});
        }
        json adv_manifest{{"format", "pcadv-advset"},
                          {"mode", pcadv::to_string(cfg.mode)},
                          {"metric", pcadv::to_string(cfg.metric)},
                          {"samples", std::move(adv_samples)}};
        write_json_file(adv_manifest, (fs::path(out_dir) / "adv_manifest.json").string());

        json meta{{"command", "attack"},
                  {"config", cfg.to_json()},
                  {"model", atk_model},
                  {"model_tag", net.architecture_tag()},
                  {"data", atk_data},
                  {"method", "ours"},
                  {"n_samples", samples.size()},
                  {"n_attacked", row.n_samples},
                  {"n_skipped", n_skipped},
                  {"threads", threads}};
        write_json_file(meta, (fs::path(out_dir) / "meta.json").string());

        std::printf("%s\n%s\n", pcadv::AggregateRow::csv_header().c_str(),
                    row.csv_row().c_str());
        std::printf("attacked=%d skipped=%d -> %s\n", row.n_samples, n_skipped,
                    out_dir.c_str());
    });

    // ---- defend ----
    auto* defend = app.add_subcommand("defend", "evaluate a defense against an attack run");
    defend->fallthrough();
    std::string def_model, def_data, def_adv, def_kind = "outlier";
    int def_k = 10, def_remove = 100;
    double def_alpha = 1.0;
    defend->add_option("--model", def_model, "classifier checkpoint")->required();
    defend->add_option("--data", def_data, "dataset manifest.json (originals)")->required();
    defend->add_option("--adv", def_adv, "attack output directory")->required();
    defend->add_option("--defense", def_kind, "outlier | salient")->capture_default_str();
    defend->add_option("--k", def_k, "k nearest neighbors")->capture_default_str();
    defend->add_option("--alpha", def_alpha, "std-dev multiplier")->capture_default_str();
    defend->add_option("--remove-count", def_remove, "salient points removed")
        ->capture_default_str();
    defend->callback([&]() {
        pcadv::DefenseConfig cfg;
        if (!config_path.empty())
            cfg = pcadv::DefenseConfig::from_json(load_json_file(config_path));
        if (defend->count("--defense")) cfg.kind = pcadv::defense_kind_from_string(def_kind);
        if (defend->count("--k")) cfg.k_neighbors = def_k;
        if (defend->count("--alpha")) cfg.alpha = def_alpha;
        if (defend->count("--remove-count")) cfg.remove_count = def_remove;
        cfg.validate();

        const pcadv::Classifier net = pcadv::Classifier::load(def_model);
        const pcadv::Dataset ds = pcadv::load_dataset(def_data);
        const auto originals_by_id = index_by_id(ds.test);
        const AdvSet adv = load_adv_set(def_adv);
        const std::vector<pcadv::SampleRecord> records =
            pcadv::read_records_jsonl((fs::path(def_adv) / "records.jsonl").string());
        std::map<std::string, bool> success_by_id;
        for (const auto& r : records) success_by_id[r.id] = r.success;

        // defense is evaluated on the adversarial examples that fooled the net
        std::vector<pcadv::PointCloud> advs, originals;
        std::vector<int> labels;
        for (std::size_t i = 0; i < adv.clouds.size(); ++i) {
            if (!success_by_id[adv.ids[i]]) continue;
            const auto it = originals_by_id.find(adv.ids[i]);
            if (it == originals_by_id.end())
                throw std::runtime_error("defend: no original for id " + adv.ids[i]);
            advs.push_back(adv.clouds[i]);
            originals.push_back(*it->second);
            labels.push_back(adv.labels[i]);
        }
        const double rate = pcadv::defense_success_rate(advs, originals, labels, net, cfg);
        fs::create_directories(out_dir);
        json out{{"command", "defend"},
                 {"config", cfg.to_json()},
                 {"adv", def_adv},
                 {"mode", adv.mode},
                 {"n_adversarial", advs.size()},
                 {"defense_success_rate", rate}};
        write_json_file(out, (fs::path(out_dir) / "defend.json").string());
        std::printf("defense=%s n=%zu defense_success_rate=%.4f\n",
                    pcadv::to_string(cfg.kind).c_str(), advs.size(), rate);
    });

    // ---- transfer ----
    auto* transfer = app.add_subcommand("transfer", "cross-network transfer rates");
    transfer->fallthrough();
    std::string tr_source, tr_target, tr_adv, tr_adv_target;
    transfer->add_option("--source", tr_source, "source checkpoint")->required();
    transfer->add_option("--target", tr_target, "target checkpoint")->required();
    transfer->add_option("--adv", tr_adv, "attack output directory (source)")->required();
    transfer->add_option("--adv-target", tr_adv_target,
                         "attack output directory generated against the target");
    transfer->callback([&]() {
        const pcadv::Classifier source = pcadv::Classifier::load(tr_source);
        const pcadv::Classifier target = pcadv::Classifier::load(tr_target);
        const AdvSet adv = load_adv_set(tr_adv);
        const double to_target =
            pcadv::transfer_eval(adv.clouds, adv.labels, source, target);
        const double identity = pcadv::transfer_eval(adv.clouds, adv.labels, source, source);
        json out{{"command", "transfer"},
                 {"source", tr_source},
                 {"target", tr_target},
                 {"mode", adv.mode},
                 {"n_adversarial", adv.clouds.size()},
                 {"source_to_target", to_target},
                 {"source_identity", identity}};
        std::printf("%s -> %s : %.4f (identity %.4f, n=%zu)\n",
                    source.architecture_tag().c_str(), target.architecture_tag().c_str(),
                    to_target, identity, adv.clouds.size());
        if (!tr_adv_target.empty()) {
            const AdvSet advt = load_adv_set(tr_adv_target);
            const double to_source =
                pcadv::transfer_eval(advt.clouds, advt.labels, target, source);
            out["target_to_source"] = to_source;
            std::printf("%s -> %s : %.4f (n=%zu)\n", target.architecture_tag().c_str(),
                        source.architecture_tag().c_str(), to_source, advt.clouds.size());
        }
        fs::create_directories(out_dir);
        write_json_file(out, (fs::path(out_dir) / "transfer.json").string());
    });

    // ---- ablate ----
    auto* ablate = app.add_subcommand(
        "ablate", "sparsity/perceptibility ablations and the metric swap");
    ablate->fallthrough();
    std::string ab_model, ab_data;
    int ab_samples = 50;
    ablate->add_option("--model", ab_model, "classifier checkpoint")->required();
    ablate->add_option("--data", ab_data, "dataset manifest.json")->required();
    ablate->add_option("--samples", ab_samples, "test samples per configuration")
        ->capture_default_str();
    ablate->callback([&]() {
        const pcadv::Classifier net = pcadv::Classifier::load(ab_model);
        const pcadv::Dataset ds = pcadv::load_dataset(ab_data);
        std::vector<pcadv::PointCloud> samples = ds.test;
        if (static_cast<std::size_t>(ab_samples) < samples.size())
            samples.resize(static_cast<std::size_t>(ab_samples));

        struct Variant {
            std::string method;
            pcadv::AttackMode mode;
            void (*tweak)(pcadv::AttackConfig&);
        };
        const std::vector<Variant> variants{
            {"defaults", pcadv::AttackMode::Perturb, [](pcadv::AttackConfig&) {}},
            {"defaults", pcadv::AttackMode::Add, [](pcadv::AttackConfig&) {}},
            {"lambda1_zero", pcadv::AttackMode::Perturb,
             [](pcadv::AttackConfig& c) { c.lambda1 = 0.0; }},
            {"lambda1_zero", pcadv::AttackMode::Add,
             [](pcadv::AttackConfig& c) { c.lambda1 = 0.0; }},
            {"lambda2_zero", pcadv::AttackMode::Perturb,
             [](pcadv::AttackConfig& c) { c.lambda2 = 0.0; }},
            {"lambda2_zero", pcadv::AttackMode::Add,
             [](pcadv::AttackConfig& c) { c.lambda2 = 0.0; }},
            {"metric_chamfer", pcadv::AttackMode::Perturb,
             [](pcadv::AttackConfig& c) { c.metric = pcadv::DistanceKind::Chamfer; }},
        };
        std::vector<pcadv::AggregateRow> rows;
        for (const auto& v : variants) {
            pcadv::AttackConfig cfg;
            cfg.mode = v.mode;
            cfg.seed = seed;
            v.tweak(cfg);
            const auto results = pcadv::run_attack_batch(samples, net, cfg, threads);
            const auto records =
                pcadv::records_from_results(samples, results, std::vector<double>{});
            rows.push_back(pcadv::aggregate_records(records, v.method,
                                                    pcadv::to_string(cfg.mode),
                                                    pcadv::to_string(cfg.metric)));
            std::printf("%s\n", rows.back().csv_row().c_str());
        }
        fs::create_directories(out_dir);
        pcadv::write_aggregate_csv(rows, (fs::path(out_dir) / "ablate.csv").string());
    });

    // ---- analyze ----
    auto* analyze =
        app.add_subcommand("analyze", "overlap of attacked points with critical points");
    analyze->fallthrough();
    std::string an_model, an_data, an_adv;
    analyze->add_option("--model", an_model, "classifier checkpoint")->required();
    analyze->add_option("--data", an_data, "dataset manifest.json")->required();
    analyze->add_option("--adv", an_adv, "attack output directory (perturbation mode)")
        ->required();
    analyze->callback([&]() {
        const pcadv::Classifier net = pcadv::Classifier::load(an_model);
        const pcadv::Dataset ds = pcadv::load_dataset(an_data);
        const auto originals_by_id = index_by_id(ds.test);
        const json meta = load_json_file((fs::path(an_adv) / "meta.json").string());
        if (meta.at("config").at("mode").get<std::string>() != "perturb")
            throw std::runtime_error(
                "analyze: needs a perturbation-mode report (added points have no "
                "counterpart index)");
        const std::vector<pcadv::SampleRecord> records =
            pcadv::read_records_jsonl((fs::path(an_adv) / "records.jsonl").string());

        json per_sample = json::array();
        double frac_identical_sum = 0.0, frac_near_sum = 0.0;
        long identical_total = 0, near_total = 0, selected_total = 0;
        int n = 0;
        for (const auto& r : records) {
            if (r.skipped) continue;
            const auto it = originals_by_id.find(r.id);
            if (it == originals_by_id.end())
                throw std::runtime_error("analyze: no original for id " + r.id);
            pcadv::AttackResult shim;
            shim.binary_a.assign(it->second->size(), 0);
            for (int s : r.selected) shim.binary_a[static_cast<std::size_t>(s)] = 1;
            const pcadv::OverlapReport rep = pcadv::critical_overlap(*it->second, shim, net);
            frac_identical_sum += rep.frac_identical;
            frac_near_sum += rep.frac_near;
            identical_total += rep.num_identical;
            near_total += rep.num_near;
            selected_total += rep.num_selected;
            ++n;
            json pj = rep.to_json();
            pj["id"] = r.id;
            per_sample.push_back(std::move(pj));
        }
        if (n == 0) throw std::runtime_error("analyze: no attacked samples in report");
        json out{{"command", "analyze"},
                 {"n_samples", n},
                 {"mean_frac_identical", frac_identical_sum / n},
                 {"mean_frac_near", frac_near_sum / n},
                 {"pooled_frac_identical",
                  selected_total ? static_cast<double>(identical_total) / selected_total : 0.0},
                 {"pooled_frac_near",
                  selected_total ? static_cast<double>(near_total) / selected_total : 0.0},
                 {"per_sample", std::move(per_sample)}};
        fs::create_directories(out_dir);
        write_json_file(out, (fs::path(out_dir) / "analyze.json").string());
        std::printf("n=%d mean identical=%.4f near=%.4f | pooled identical=%.4f near=%.4f\n",
                    n, frac_identical_sum / n, frac_near_sum / n,
                    selected_total ? static_cast<double>(identical_total) / selected_total : 0.0,
                    selected_total ? static_cast<double>(near_total) / selected_total : 0.0);
    });

    // ---- report ----
    auto* report = app.add_subcommand("report", "recompute the aggregate CSV from records");
    report->fallthrough();
    std::string rp_records, rp_meta, rp_csv;
    report->add_option("--records", rp_records, "records.jsonl")->required();
    report->add_option("--meta", rp_meta, "meta.json from the attack run")->required();
    report->add_option("--csv-out", rp_csv, "output CSV path");
    report->callback([&]() {
        const auto records = pcadv::read_records_jsonl(rp_records);
        const json meta = load_json_file(rp_meta);
        const pcadv::AggregateRow row = pcadv::aggregate_records(
            records, meta.value("method", "ours"),
            meta.at("config").at("mode").get<std::string>(),
            meta.at("config").at("metric").get<std::string>());
        fs::create_directories(out_dir);
        const std::string path =
            rp_csv.empty() ? (fs::path(out_dir) / "aggregate.csv").string() : rp_csv;
        pcadv::write_aggregate_csv({row}, path);
        std::printf("%s\n%s\n", pcadv::AggregateRow::csv_header().c_str(),
                    row.csv_row().c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
