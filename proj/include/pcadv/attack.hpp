#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcadv/core.hpp"
#include "pcadv/metrics.hpp"
#include "pcadv/net.hpp"
#include "pcadv/rng.hpp"

namespace pcadv {

enum class AttackMode { Perturb, Add };
enum class InitScheme { Random, Critical, All };
enum class StepRule { Sign, Plain, Hybrid };

inline std::string to_string(AttackMode m) {
    return m == AttackMode::Perturb ? "perturb" : "add";
}
inline std::string to_string(InitScheme s) {
    switch (s) {
        case InitScheme::Random: return "random";
        case InitScheme::Critical: return "critical";
        case InitScheme::All: return "all";
    }
    return "?";
}

inline std::string to_string(StepRule r) {
    switch (r) {
        case StepRule::Sign: return "sign";
        case StepRule::Plain: return "plain";
        case StepRule::Hybrid: return "hybrid";
    }
    return "?";
}

inline AttackMode attack_mode_from_string(const std::string& s) {
    if (s == "perturb") return AttackMode::Perturb;
    if (s == "add") return AttackMode::Add;
    throw std::invalid_argument("unknown attack mode: " + s);
}
inline StepRule step_rule_from_string(const std::string& s) {
    if (s == "sign") return StepRule::Sign;
    if (s == "plain") return StepRule::Plain;
    if (s == "hybrid") return StepRule::Hybrid;
    throw std::invalid_argument("unknown step rule: " + s);
}
inline InitScheme init_scheme_from_string(const std::string& s) {
    if (s == "random") return InitScheme::Random;
    if (s == "critical") return InitScheme::Critical;
    if (s == "all") return InitScheme::All;
    throw std::invalid_argument("unknown init scheme: " + s);
}

struct AttackConfig {
    AttackMode mode = AttackMode::Perturb;
    DistanceKind metric = DistanceKind::Hausdorff;
    double lambda1 = 0.15;
    double lambda2 = 50.0;
    double gamma = 0.01;          // descent step size
    int iterations = 250;
    int addition_budget = 128;    // K
    InitScheme init = InitScheme::Random;
    double binarize_threshold = 0.5;  // tau; 0 recovers the literal a_i != 0 rule
    std::uint64_t seed = 1;
    bool early_exit = false;
    // Signed steps (iterative fast-gradient family) by default: raw-magnitude
    // steps stall against saturated softmax margins. "plain" applies the
    // update formula with the unmodified gradient.
    StepRule step_rule = StepRule::Sign;

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0)
            throw std::invalid_argument("AttackConfig: lambda1, lambda2 >= 0");
        if (!(gamma > 0.0)) throw std::invalid_argument("AttackConfig: gamma > 0");
        if (iterations < 1) throw std::invalid_argument("AttackConfig: iterations >= 1");
        if (binarize_threshold < 0.0 || binarize_threshold >= 1.0)
            throw std::invalid_argument("AttackConfig: 0 <= binarize_threshold < 1");
        if (mode == AttackMode::Add && addition_budget < 1)
            throw std::invalid_argument("AttackConfig: K >= 1 in addition mode");
        if (mode == AttackMode::Add && metric == DistanceKind::Euclidean)
            throw std::invalid_argument(
                "AttackConfig: Euclidean metric needs index correspondence; "
                "not available in addition mode");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"mode", to_string(mode)},
                              {"metric", pcadv::to_string(metric)},
                              {"lambda1", lambda1},
                              {"lambda2", lambda2},
                              {"gamma", gamma},
                              {"iterations", iterations},
                              {"K", addition_budget},
                              {"init", to_string(init)},
                              {"binarize_threshold", binarize_threshold},
                              {"seed", seed},
                              {"early_exit", early_exit},
                              {"step_rule", to_string(step_rule)}};
    }

    // strict parser: unknown fields rejected, known fields optional
    static AttackConfig from_json(const nlohmann::json& j) {
        static const std::vector<std::string> known{
            "mode", "metric", "lambda1", "lambda2", "gamma", "iterations",
            "K", "init", "binarize_threshold", "seed", "early_exit", "step_rule"};
        for (const auto& item : j.items()) {
            if (std::find(known.begin(), known.end(), item.key()) == known.end())
                throw std::invalid_argument("AttackConfig: unknown field '" + item.key() + "'");
        }
        AttackConfig cfg;
        if (j.contains("mode")) cfg.mode = attack_mode_from_string(j.at("mode"));
        if (j.contains("metric")) cfg.metric = distance_kind_from_string(j.at("metric"));
        if (j.contains("lambda1")) cfg.lambda1 = j.at("lambda1").get<double>();
        if (j.contains("lambda2")) cfg.lambda2 = j.at("lambda2").get<double>();
        if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
        if (j.contains("iterations")) cfg.iterations = j.at("iterations").get<int>();
        if (j.contains("K")) cfg.addition_budget = j.at("K").get<int>();
        if (j.contains("init")) cfg.init = init_scheme_from_string(j.at("init"));
        if (j.contains("binarize_threshold"))
            cfg.binarize_threshold = j.at("binarize_threshold").get<double>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("early_exit")) cfg.early_exit = j.at("early_exit").get<bool>();
        if (j.contains("step_rule")) cfg.step_rule = step_rule_from_string(j.at("step_rule"));
        cfg.validate();
        return cfg;
    }
};

// Optimizer state. In addition mode `working` is the original cloud followed
// by K duplicated points; the first original_size entries are frozen at zero.
struct AttackState {
    PointCloud working;
    IndicatorVector a_hat;
    PerturbationSet perturb;
    std::size_t original_size = 0;
    int iteration = 0;
    bool numerical_failure = false;

    std::size_t size() const { return a_hat.size(); }
};

struct AttackResult {
    PointCloud adversarial;
    std::vector<int> binary_a;
    bool skipped = false;             // input was already misclassified
    bool success = false;
    bool numerical_failure = false;
    int num_manipulated = 0;          // count of 1s among non-frozen entries
    int num_displaced = 0;            // selected entries moved by more than 1e-6
    double chamfer_distance = 0.0;    // binarized result vs the original cloud
    double hausdorff_distance = 0.0;
    int predicted_class = -1;
    int true_class = -1;
    int iterations_used = 0;
};

namespace detail {

inline int require_label(const PointCloud& cloud) {
    if (!cloud.label)
        throw std::invalid_argument("attack: point cloud carries no class label");
    return *cloud.label;
}

inline double near_binary_draw(Rng& rng) { return rng.coin() ? 0.9999 : 0.0001; }

inline void fill_perturbation(Rng& rng, std::size_t first, PerturbationSet& e) {
    for (std::size_t i = first; i < e.size(); ++i) {
        e.vectors[i] = Vec3{rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3),
                            rng.uniform(-1e-3, 1e-3)};
    }
}

}  // namespace detail

// Near-binary indicator start plus a tiny random perturbation set; at E = 0
// every distance gradient in a-hat vanishes, so symmetry must be broken.
// Returns nullopt when the classifier already misclassifies the input.
inline std::optional<AttackState> init_perturbation(const PointCloud& cloud,
                                                    const Classifier& net,
                                                    const AttackConfig& cfg) {
    const int label = detail::require_label(cloud);
    if (net.predict(cloud) != label) return std::nullopt;
    Rng rng(cfg.seed);
    AttackState state;
    state.working = cloud;
    state.original_size = cloud.size();
    state.a_hat = IndicatorVector(cloud.size());
    switch (cfg.init) {
        case InitScheme::Random:
            for (auto& v : state.a_hat.values) v = detail::near_binary_draw(rng);
            break;
        case InitScheme::Critical: {
            for (auto& v : state.a_hat.values) v = 0.0001;
            for (int i : net.critical_points(cloud))
                state.a_hat.values[static_cast<std::size_t>(i)] = 0.9999;
            break;
        }
        case InitScheme::All:
            for (auto& v : state.a_hat.values) v = 0.9999;
            break;
    }
    state.perturb = PerturbationSet(cloud.size());
    detail::fill_perturbation(rng, 0, state.perturb);
    return state;
}

// Appends K duplicates of existing points as the only manipulable entries;
// the N original entries are frozen at zero so the originals never move, and
// D(P, P~) = 0 at initialization under Chamfer and Hausdorff.
inline std::optional<AttackState> init_addition(const PointCloud& cloud, const Classifier& net,
                                                const AttackConfig& cfg) {
    const int label = detail::require_label(cloud);
    if (cfg.addition_budget < 1)
        throw std::invalid_argument("init_addition: K >= 1 required");
    if (net.predict(cloud) != label) return std::nullopt;
    Rng rng(cfg.seed);
    const std::size_t n = cloud.size();

    std::vector<std::size_t> sources;
    if (cfg.init == InitScheme::All) {
        sources.resize(n);
        for (std::size_t i = 0; i < n; ++i) sources[i] = i;
    } else if (cfg.init == InitScheme::Critical) {
        const std::vector<int> critical = net.critical_points(cloud);
        sources.reserve(static_cast<std::size_t>(cfg.addition_budget));
        for (int k = 0; k < cfg.addition_budget; ++k)
            sources.push_back(static_cast<std::size_t>(critical[rng.index(critical.size())]));
    } else {
        sources.reserve(static_cast<std::size_t>(cfg.addition_budget));
        for (int k = 0; k < cfg.addition_budget; ++k) sources.push_back(rng.index(n));
    }

    AttackState state;
    state.working = cloud;
    state.original_size = n;
    for (std::size_t s : sources) state.working.points.push_back(cloud.points[s]);
    const std::size_t m = state.working.size();

    state.a_hat = IndicatorVector(m);
    for (std::size_t i = 0; i < n; ++i) {
        state.a_hat.values[i] = 0.0;
        state.a_hat.frozen[i] = 1;
    }
    for (std::size_t i = n; i < m; ++i) {
        state.a_hat.values[i] =
            cfg.init == InitScheme::Random ? detail::near_binary_draw(rng) : 0.9999;
    }
    state.perturb = PerturbationSet(m);
    detail::fill_perturbation(rng, n, state.perturb);
    return state;
}

inline std::optional<AttackState> init_attack(const PointCloud& cloud, const Classifier& net,
                                              const AttackConfig& cfg) {
    return cfg.mode == AttackMode::Perturb ? init_perturbation(cloud, net, cfg)
                                           : init_addition(cloud, net, cfg);
}

// f = lambda1 * sum(a-hat) + lambda2 * D + h, with D measured against the
// working cloud (identical coordinates to P; for Chamfer in addition mode the
// duplicated entries reweight the directed mean, Hausdorff is unaffected).
inline double attack_objective(const PointCloud& cloud, const AttackState& state,
                               const Classifier& net, const AttackConfig& cfg) {
    const int label = detail::require_label(cloud);
    const PointCloud pprime = apply_manipulation(state.working, state.a_hat, state.perturb);
    double l1 = 0.0;
    for (double v : state.a_hat.values) l1 += v;
    const double dist = cloud_distance(state.working, pprime, cfg.metric, &state.a_hat,
                                       &state.perturb);
    const double h = net.margin(pprime, label).value;
    return cfg.lambda1 * l1 + cfg.lambda2 * dist + h;
}

struct ObjectiveGradient {
    std::vector<double> d_a;
    std::vector<Vec3> d_e;
};

// df/da_i = lambda1 + lambda2 dD/da_i + e_i . dh/dp'_i
// df/de_i =           lambda2 dD/de_i + a_i * dh/dp'_i
inline ObjectiveGradient objective_gradient(const AttackState& state, const Classifier& net,
                                            const AttackConfig& cfg, int true_class) {
    const PointCloud pprime = apply_manipulation(state.working, state.a_hat, state.perturb);
    const DistanceGradient dist =
        distance_gradient(state.working, pprime, state.a_hat, state.perturb, cfg.metric);
    const std::vector<Vec3> hgrad = net.margin_input_gradient(pprime, true_class);
    const std::size_t m = state.size();
    ObjectiveGradient g;
    g.d_a.resize(m);
    g.d_e.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        g.d_a[i] = cfg.lambda1 + cfg.lambda2 * dist.d_a[i] +
                   state.perturb.vectors[i].dot(hgrad[i]);
        g.d_e[i] = cfg.lambda2 * dist.d_e[i] + hgrad[i] * state.a_hat.values[i];
    }
    return g;
}

// One projected gradient-descent step: frozen entries untouched, a-hat
// clamped back into [0,1]. A non-finite gradient aborts the attack for this
// sample via the numerical-failure flag.
inline void attack_step(const PointCloud& cloud, AttackState& state, const Classifier& net,
                        const AttackConfig& cfg) {
    if (state.iteration >= cfg.iterations)
        throw std::invalid_argument("attack_step: iteration budget exhausted");
    const int label = detail::require_label(cloud);
    const ObjectiveGradient g = objective_gradient(state, net, cfg, label);
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (!std::isfinite(g.d_a[i]) || !g.d_e[i].finite()) {
            state.numerical_failure = true;
            return;
        }
    }
    const auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state.a_hat.frozen[i]) continue;
        double da = g.d_a[i];
        Vec3 de = g.d_e[i];
        if (cfg.step_rule != StepRule::Plain) da = sgn(da);
        if (cfg.step_rule == StepRule::Sign)
            de = Vec3{sgn(de.x), sgn(de.y), sgn(de.z)};
        state.a_hat.values[i] =
            std::clamp(state.a_hat.values[i] - cfg.gamma * da, 0.0, 1.0);
        state.perturb.vectors[i] -= de * cfg.gamma;
    }
    ++state.iteration;
}

inline std::vector<int> binarize(const AttackState& state, const AttackConfig& cfg) {
    std::vector<int> out(state.size(), 0);
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state.a_hat.frozen[i]) continue;
        out[i] = state.a_hat.values[i] <= cfg.binarize_threshold ? 0 : 1;
    }
    return out;
}

// Rebuilds the adversarial cloud from the binary indicator. Perturbation mode
// shifts selected points; addition mode keeps the originals verbatim and
// appends the selected added points.
inline PointCloud binarized_cloud(const PointCloud& cloud, const AttackState& state,
                                  const std::vector<int>& binary, AttackMode mode) {
    if (mode == AttackMode::Perturb) {
        PointCloud out = cloud;
        for (std::size_t i = 0; i < out.size(); ++i)
            if (binary[i]) out.points[i] += state.perturb.vectors[i];
        return out;
    }
    PointCloud out = cloud;
    for (std::size_t i = state.original_size; i < state.size(); ++i)
        if (binary[i]) out.points.push_back(state.working.points[i] + state.perturb.vectors[i]);
    return out;
}

// Full attack: fixed iteration budget, binarization, success judged only on
// the binarized example. Deterministic given cfg.seed.
inline AttackResult run_attack(const PointCloud& cloud, const Classifier& net,
                               const AttackConfig& cfg) {
    cfg.validate();
    const int label = detail::require_label(cloud);
    AttackResult result;
    result.true_class = label;

    std::optional<AttackState> state = init_attack(cloud, net, cfg);
    if (!state) {
        result.skipped = true;
        result.adversarial = cloud;
        result.predicted_class = net.predict(cloud);
        return result;
    }

    double prev_f = std::numeric_limits<double>::infinity();
    for (int n = 0; n < cfg.iterations; ++n) {
        attack_step(cloud, *state, net, cfg);
        if (state->numerical_failure) break;
        if (cfg.early_exit && (n + 1) % 10 == 0) {
            const double f = attack_objective(cloud, *state, net, cfg);
            const std::vector<int> bin = binarize(*state, cfg);
            const PointCloud candidate = binarized_cloud(cloud, *state, bin, cfg.mode);
            const bool fooled = net.predict(candidate) != label;
            if (fooled && f >= prev_f - 1e-12) break;
            prev_f = f;
        }
    }

    const std::vector<int> binary = binarize(*state, cfg);
    result.binary_a = binary;
    result.numerical_failure = state->numerical_failure;
    result.adversarial = binarized_cloud(cloud, *state, binary, cfg.mode);
    result.predicted_class = net.predict(result.adversarial);
    result.success = result.predicted_class != label;
    result.iterations_used = state->iteration;
    for (std::size_t i = 0; i < binary.size(); ++i) {
        if (state->a_hat.frozen[i] || !binary[i]) continue;
        ++result.num_manipulated;
        if (state->perturb.vectors[i].norm() > 1e-6) ++result.num_displaced;
    }
    result.chamfer_distance = chamfer(cloud, result.adversarial);
    result.hausdorff_distance = hausdorff(cloud, result.adversarial);
    return result;
}

}  // namespace pcadv
