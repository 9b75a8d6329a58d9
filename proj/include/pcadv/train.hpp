#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pcadv/core.hpp"
#include "pcadv/net.hpp"
#include "pcadv/rng.hpp"

namespace pcadv {

struct Dataset {
    std::vector<PointCloud> train;
    std::vector<PointCloud> test;
    int num_classes = 0;
};

struct TrainConfig {
    enum class Optimizer { Sgd, Adam };

    int epochs = 30;
    int batch_size = 16;
    double learning_rate = 0.01;
    std::uint64_t seed = 1;
    Optimizer optimizer = Optimizer::Adam;
    double jitter_sigma = 0.0;   // augmentation: Gaussian jitter per coordinate
    bool rotate_z = false;       // augmentation: random rotation about z

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size >= 1");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("TrainConfig: learning_rate > 0");
        if (jitter_sigma < 0.0)
            throw std::invalid_argument("TrainConfig: jitter_sigma >= 0");
    }
};

struct TrainReport {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::vector<double> epoch_loss;
};

namespace detail {

struct AdamState {
    Eigen::MatrixXd mw, vw;
    Eigen::RowVectorXd mb, vb;
};

// One stacked batch of clouds: rows of all points plus segment offsets.
struct Batch {
    Eigen::MatrixXd x;              // T x 3
    std::vector<Eigen::Index> offset;  // size B+1
    std::vector<int> labels;
};

inline Batch stack_clouds(const std::vector<const PointCloud*>& clouds) {
    Batch b;
    b.offset.push_back(0);
    Eigen::Index total = 0;
    for (const auto* c : clouds) {
        total += static_cast<Eigen::Index>(c->size());
        b.offset.push_back(total);
        b.labels.push_back(c->label.value());
    }
    b.x.resize(total, 3);
    Eigen::Index row = 0;
    for (const auto* c : clouds)
        for (const auto& p : c->points) {
            b.x(row, 0) = p.x;
            b.x(row, 1) = p.y;
            b.x(row, 2) = p.z;
            ++row;
        }
    return b;
}

struct BatchTrace {
    std::vector<Eigen::MatrixXd> pre, act;
    Eigen::MatrixXd pooled;                 // B x F
    std::vector<std::vector<Eigen::Index>> winners;  // per cloud, per channel (max)
    std::vector<Eigen::MatrixXd> head_pre, head_act;
    Eigen::MatrixXd probs;                  // B x C
};

inline BatchTrace batch_forward(const Classifier& net, const Batch& batch) {
    BatchTrace t;
    const Eigen::MatrixXd* x = &batch.x;
    for (const auto& layer : net.mlp_layers()) {
        Eigen::MatrixXd pre = (*x) * layer.weight;
        pre.rowwise() += layer.bias;
        t.pre.push_back(pre);
        t.act.push_back(pre.cwiseMax(0.0));
        x = &t.act.back();
    }
    const Eigen::MatrixXd& features = t.act.back();
    const std::size_t nclouds = batch.labels.size();
    const Eigen::Index f = features.cols();
    t.pooled.resize(static_cast<Eigen::Index>(nclouds), f);
    if (net.pooling() == Pooling::Max) {
        t.winners.assign(nclouds, std::vector<Eigen::Index>(static_cast<std::size_t>(f), 0));
        for (std::size_t b = 0; b < nclouds; ++b) {
            const Eigen::Index lo = batch.offset[b], hi = batch.offset[b + 1];
            for (Eigen::Index c = 0; c < f; ++c) {
                Eigen::Index w = lo;
                double best = features(lo, c);
                for (Eigen::Index i = lo + 1; i < hi; ++i)
                    if (features(i, c) > best) {
                        best = features(i, c);
                        w = i;
                    }
                t.pooled(static_cast<Eigen::Index>(b), c) = best;
                t.winners[b][static_cast<std::size_t>(c)] = w;
            }
        }
    } else {
        std::vector<double> buf;
        for (std::size_t b = 0; b < nclouds; ++b) {
            const Eigen::Index lo = batch.offset[b], hi = batch.offset[b + 1];
            buf.resize(static_cast<std::size_t>(hi - lo));
            for (Eigen::Index c = 0; c < f; ++c) {
                for (Eigen::Index i = lo; i < hi; ++i)
                    buf[static_cast<std::size_t>(i - lo)] = features(i, c);
                t.pooled(static_cast<Eigen::Index>(b), c) = sorted_mean(buf);
            }
        }
    }
    const Eigen::MatrixXd* h = &t.pooled;
    const auto& head = net.head_layers();
    for (std::size_t l = 0; l < head.size(); ++l) {
        Eigen::MatrixXd pre = (*h) * head[l].weight;
        pre.rowwise() += head[l].bias;
        t.head_pre.push_back(pre);
        if (l + 1 < head.size()) {
            t.head_act.push_back(pre.cwiseMax(0.0));
            h = &t.head_act.back();
        }
    }
    Eigen::MatrixXd logits = t.head_pre.back();
    t.probs.resize(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        Eigen::RowVectorXd ex = (logits.row(r).array() - m).exp();
        t.probs.row(r) = ex / ex.sum();
    }
    return t;
}

}  // namespace detail

inline double evaluate_accuracy(const Classifier& net, const std::vector<PointCloud>& set) {
    if (set.empty()) return 0.0;
    std::size_t correct = 0;
    std::vector<const PointCloud*> ptrs;
    constexpr std::size_t kEvalBatch = 64;
    for (std::size_t start = 0; start < set.size(); start += kEvalBatch) {
        const std::size_t stop = std::min(set.size(), start + kEvalBatch);
        ptrs.clear();
        for (std::size_t i = start; i < stop; ++i) ptrs.push_back(&set[i]);
        const detail::Batch batch = detail::stack_clouds(ptrs);
        const detail::BatchTrace t = detail::batch_forward(net, batch);
        for (Eigen::Index r = 0; r < t.probs.rows(); ++r) {
            int best = 0;
            for (int c = 1; c < t.probs.cols(); ++c)
                if (t.probs(r, c) > t.probs(r, best)) best = c;
            if (best == batch.labels[static_cast<std::size_t>(r)]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

// Cross-entropy training with Adam or plain SGD, stacked-batch GEMMs, and
// optional jitter / z-rotation augmentation. Bitwise deterministic for a
// given seed.
inline Classifier train_classifier(const Dataset& ds, const TrainConfig& cfg,
                                   const ClassifierSpec& spec_in = {},
                                   TrainReport* report = nullptr) {
    cfg.validate();
    if (ds.num_classes < 2)
        throw std::invalid_argument("train_classifier: need at least 2 classes");
    std::vector<int> counts(static_cast<std::size_t>(ds.num_classes), 0);
    for (const auto& c : ds.train) {
        if (!c.label || *c.label < 0 || *c.label >= ds.num_classes)
            throw std::invalid_argument("train_classifier: sample without valid label");
        ++counts[static_cast<std::size_t>(*c.label)];
    }
    for (int k = 0; k < ds.num_classes; ++k)
        if (counts[static_cast<std::size_t>(k)] == 0)
            throw std::invalid_argument("train_classifier: class " + std::to_string(k) +
                                        " has no training examples");

    ClassifierSpec spec = spec_in;
    spec.head_widths.back() = ds.num_classes;
    Classifier net = Classifier::random_init(spec, derive_seed(cfg.seed, 0));
    Rng rng(derive_seed(cfg.seed, 1));

    auto& mlp = net.mlp_layers();
    auto& head = net.head_layers();
    std::vector<detail::AdamState> adam(mlp.size() + head.size());
    for (std::size_t l = 0; l < adam.size(); ++l) {
        const LinearLayer& layer = l < mlp.size() ? mlp[l] : head[l - mlp.size()];
        adam[l].mw = Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols());
        adam[l].vw = adam[l].mw;
        adam[l].mb = Eigen::RowVectorXd::Zero(layer.bias.size());
        adam[l].vb = adam[l].mb;
    }
    long step = 0;

    const auto apply_update = [&](LinearLayer& layer, detail::AdamState& st,
                                  const Eigen::MatrixXd& gw, const Eigen::RowVectorXd& gb) {
        if (cfg.optimizer == TrainConfig::Optimizer::Sgd) {
            layer.weight -= cfg.learning_rate * gw;
            layer.bias -= cfg.learning_rate * gb;
            return;
        }
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
        st.mw = b1 * st.mw + (1.0 - b1) * gw;
        st.vw = b2 * st.vw + (1.0 - b2) * gw.cwiseProduct(gw);
        st.mb = b1 * st.mb + (1.0 - b1) * gb;
        st.vb = b2 * st.vb + (1.0 - b2) * gb.cwiseProduct(gb);
        layer.weight -= (cfg.learning_rate / c1) *
                        (st.mw.array() / ((st.vw.array() / c2).sqrt() + eps)).matrix();
        layer.bias -= (cfg.learning_rate / c1) *
                      (st.mb.array() / ((st.vb.array() / c2).sqrt() + eps)).matrix();
    };

    std::vector<std::size_t> order(ds.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<PointCloud> augmented;  // batch scratch

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the portable rng (std::shuffle is impl-defined)
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = rng.index(i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t nbatches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            augmented.clear();
            for (std::size_t k = start; k < stop; ++k) {
                PointCloud c = ds.train[order[k]];
                if (cfg.rotate_z) {
                    const double theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                    const double ct = std::cos(theta), st = std::sin(theta);
                    for (auto& p : c.points) {
                        const double dx = p.x - 0.5, dy = p.y - 0.5;
                        p.x = std::clamp(0.5 + ct * dx - st * dy, 0.0, 1.0);
                        p.y = std::clamp(0.5 + st * dx + ct * dy, 0.0, 1.0);
                    }
                }
                if (cfg.jitter_sigma > 0.0) {
                    for (auto& p : c.points) {
                        p.x += rng.normal(0.0, cfg.jitter_sigma);
                        p.y += rng.normal(0.0, cfg.jitter_sigma);
                        p.z += rng.normal(0.0, cfg.jitter_sigma);
                    }
                }
                augmented.push_back(std::move(c));
            }
            std::vector<const PointCloud*> ptrs;
            for (const auto& c : augmented) ptrs.push_back(&c);
            const detail::Batch batch = detail::stack_clouds(ptrs);
            const detail::BatchTrace t = detail::batch_forward(net, batch);

            const Eigen::Index bsz = t.probs.rows();
            Eigen::MatrixXd dlogits = t.probs;
            double loss = 0.0;
            for (Eigen::Index r = 0; r < bsz; ++r) {
                const int label = batch.labels[static_cast<std::size_t>(r)];
                loss -= std::log(std::max(t.probs(r, label), 1e-300));
                dlogits(r, label) -= 1.0;
            }
            loss /= static_cast<double>(bsz);
            dlogits /= static_cast<double>(bsz);
            epoch_loss += loss;
            ++nbatches;
            ++step;

            // head backward
            Eigen::MatrixXd g = dlogits;
            std::vector<Eigen::MatrixXd> head_gw(head.size());
            std::vector<Eigen::RowVectorXd> head_gb(head.size());
            for (std::size_t l = head.size(); l-- > 0;) {
                const Eigen::MatrixXd& in = l == 0 ? t.pooled : t.head_act[l - 1];
                head_gw[l] = in.transpose() * g;
                head_gb[l] = g.colwise().sum();
                Eigen::MatrixXd dx = g * head[l].weight.transpose();
                if (l > 0)
                    g = dx.cwiseProduct(
                        (t.head_pre[l - 1].array() > 0.0).cast<double>().matrix());
                else
                    g = dx;
            }
            // unpool to the per-point rows
            Eigen::MatrixXd dfeat = Eigen::MatrixXd::Zero(batch.x.rows(), t.pooled.cols());
            if (net.pooling() == Pooling::Max) {
                for (Eigen::Index b = 0; b < bsz; ++b)
                    for (Eigen::Index c = 0; c < t.pooled.cols(); ++c)
                        dfeat(t.winners[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)],
                              c) += g(b, c);
            } else {
                for (Eigen::Index b = 0; b < bsz; ++b) {
                    const Eigen::Index lo = batch.offset[static_cast<std::size_t>(b)];
                    const Eigen::Index hi = batch.offset[static_cast<std::size_t>(b) + 1];
                    const double inv = 1.0 / static_cast<double>(hi - lo);
                    for (Eigen::Index c = 0; c < t.pooled.cols(); ++c)
                        dfeat.col(c).segment(lo, hi - lo).array() += g(b, c) * inv;
                }
            }
            // MLP backward
            Eigen::MatrixXd gm =
                dfeat.cwiseProduct((t.pre.back().array() > 0.0).cast<double>().matrix());
            std::vector<Eigen::MatrixXd> mlp_gw(mlp.size());
            std::vector<Eigen::RowVectorXd> mlp_gb(mlp.size());
            for (std::size_t l = mlp.size(); l-- > 0;) {
                const Eigen::MatrixXd& in = l == 0 ? batch.x : t.act[l - 1];
                mlp_gw[l] = in.transpose() * gm;
                mlp_gb[l] = gm.colwise().sum();
                if (l > 0) {
                    Eigen::MatrixXd dx = gm * mlp[l].weight.transpose();
                    gm = dx.cwiseProduct(
                        (t.pre[l - 1].array() > 0.0).cast<double>().matrix());
                }
            }
            for (std::size_t l = 0; l < mlp.size(); ++l)
                apply_update(mlp[l], adam[l], mlp_gw[l], mlp_gb[l]);
            for (std::size_t l = 0; l < head.size(); ++l)
                apply_update(head[l], adam[mlp.size() + l], head_gw[l], head_gb[l]);
        }
        if (report) report->epoch_loss.push_back(epoch_loss / static_cast<double>(nbatches));
    }

    if (report) {
        report->train_accuracy = evaluate_accuracy(net, ds.train);
        report->test_accuracy = evaluate_accuracy(net, ds.test);
    }
    return net;
}

}  // namespace pcadv
