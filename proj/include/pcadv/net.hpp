#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcadv/core.hpp"
#include "pcadv/rng.hpp"

namespace pcadv {

enum class Pooling { Max, Avg };

struct LinearLayer {
    Eigen::MatrixXd weight;     // in x out
    Eigen::RowVectorXd bias;    // 1 x out
};

// Architecture description. The default is a per-point shared MLP
// 3->64->128->256 with channel-wise max pooling and a 256->128->C dense head.
// "avgpool" swaps the pooling operator, "maxpool_slim" halves every width;
// both exist as distinct transfer targets.
struct ClassifierSpec {
    std::string architecture_tag = "maxpool";
    Pooling pooling = Pooling::Max;
    std::vector<int> point_mlp_widths{3, 64, 128, 256};
    std::vector<int> head_widths{256, 128, 0};  // last entry = num classes

    static ClassifierSpec for_tag(const std::string& tag, int num_classes) {
        ClassifierSpec spec;
        spec.architecture_tag = tag;
        if (tag == "maxpool") {
            spec.pooling = Pooling::Max;
        } else if (tag == "avgpool") {
            spec.pooling = Pooling::Avg;
        } else if (tag == "maxpool_slim") {
            spec.pooling = Pooling::Max;
            spec.point_mlp_widths = {3, 32, 64, 128};
            spec.head_widths = {128, 64, 0};
        } else {
            throw std::invalid_argument("unknown architecture tag: " + tag);
        }
        spec.head_widths.back() = num_classes;
        return spec;
    }
};

// Activations kept by a traced forward pass; everything backprop or the
// critical-point query needs.
struct ForwardTrace {
    Eigen::MatrixXd input;                   // N x 3
    std::vector<Eigen::MatrixXd> mlp_pre;    // pre-activation per MLP layer
    std::vector<Eigen::MatrixXd> mlp_act;    // post-ReLU per MLP layer
    Eigen::RowVectorXd pooled;               // 1 x F
    std::vector<int> winners;                // per channel (max pooling only)
    std::vector<Eigen::RowVectorXd> head_pre;
    std::vector<Eigen::RowVectorXd> head_act;
    Eigen::VectorXd logits;
    Eigen::VectorXd probs;
};

struct MarginValue {
    double value = 0.0;   // max{0, F_true - max_{i != true} F_i}
    int true_class = -1;
    int runner_up = -1;
};

namespace detail {

// Order-independent column mean: summing in sorted order makes the result
// invariant under point permutations, which forward() promises exactly.
inline double sorted_mean(std::vector<double>& buf) {
    std::sort(buf.begin(), buf.end());
    double sum = 0.0;
    for (double v : buf) sum += v;
    return sum / static_cast<double>(buf.size());
}

inline int argmax_lowest(const Eigen::VectorXd& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

}  // namespace detail

// Point-based classifier: shared per-point MLP, channel-wise pooling over
// however many points are present, dense head, softmax. Accepts any N >= 1.
// Parameters are immutable after training; all queries are const and
// concurrent-safe.
class Classifier {
public:
    Classifier() = default;

    // He-initialized network, deterministic for a given seed
    static Classifier random_init(const ClassifierSpec& spec, std::uint64_t seed) {
        if (spec.head_widths.back() < 2)
            throw std::invalid_argument("Classifier: need at least 2 classes");
        if (spec.point_mlp_widths.front() != 3)
            throw std::invalid_argument("Classifier: per-point input width must be 3");
        if (spec.head_widths.front() != spec.point_mlp_widths.back())
            throw std::invalid_argument("Classifier: head input must match pooled width");
        Classifier net;
        net.tag_ = spec.architecture_tag;
        net.pooling_ = spec.pooling;
        net.mlp_widths_ = spec.point_mlp_widths;
        net.head_widths_ = spec.head_widths;
        Rng rng(seed);
        const auto init_layers = [&](const std::vector<int>& widths,
                                     std::vector<LinearLayer>& layers) {
            for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
                LinearLayer layer;
                layer.weight.resize(widths[l], widths[l + 1]);
                const double scale = std::sqrt(2.0 / widths[l]);
                for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
                    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
                        layer.weight(r, c) = scale * rng.normal();
                layer.bias = Eigen::RowVectorXd::Zero(widths[l + 1]);
                layers.push_back(std::move(layer));
            }
        };
        init_layers(net.mlp_widths_, net.mlp_);
        init_layers(net.head_widths_, net.head_);
        return net;
    }

    const std::string& architecture_tag() const { return tag_; }
    Pooling pooling() const { return pooling_; }
    int num_classes() const { return head_widths_.back(); }
    int feature_width() const { return mlp_widths_.back(); }
    const std::vector<int>& point_mlp_widths() const { return mlp_widths_; }
    const std::vector<int>& head_widths() const { return head_widths_; }

    // mutable parameter access for the trainer (single writer)
    std::vector<LinearLayer>& mlp_layers() { return mlp_; }
    std::vector<LinearLayer>& head_layers() { return head_; }
    const std::vector<LinearLayer>& mlp_layers() const { return mlp_; }
    const std::vector<LinearLayer>& head_layers() const { return head_; }

    ForwardTrace trace(const PointCloud& cloud) const {
        if (cloud.empty()) throw std::invalid_argument("Classifier: empty cloud");
        ForwardTrace t;
        const Eigen::Index n = static_cast<Eigen::Index>(cloud.size());
        t.input.resize(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Point3& p = cloud.points[static_cast<std::size_t>(i)];
            t.input(i, 0) = p.x;
            t.input(i, 1) = p.y;
            t.input(i, 2) = p.z;
        }
        const Eigen::MatrixXd* x = &t.input;
        for (const auto& layer : mlp_) {
            Eigen::MatrixXd pre = (*x) * layer.weight;
            pre.rowwise() += layer.bias;
            t.mlp_pre.push_back(pre);
            t.mlp_act.push_back(pre.cwiseMax(0.0));
            x = &t.mlp_act.back();
        }
        const Eigen::MatrixXd& features = t.mlp_act.back();
        const Eigen::Index f = features.cols();
        t.pooled.resize(f);
        if (pooling_ == Pooling::Max) {
            t.winners.assign(static_cast<std::size_t>(f), 0);
            for (Eigen::Index c = 0; c < f; ++c) {
                Eigen::Index w = 0;
                double best = features(0, c);
                for (Eigen::Index i = 1; i < n; ++i)
                    if (features(i, c) > best) {
                        best = features(i, c);
                        w = i;
                    }
                t.pooled(c) = best;
                t.winners[static_cast<std::size_t>(c)] = static_cast<int>(w);
            }
        } else {
            std::vector<double> buf(static_cast<std::size_t>(n));
            for (Eigen::Index c = 0; c < f; ++c) {
                for (Eigen::Index i = 0; i < n; ++i)
                    buf[static_cast<std::size_t>(i)] = features(i, c);
                t.pooled(c) = detail::sorted_mean(buf);
            }
        }
        const Eigen::RowVectorXd* h = &t.pooled;
        for (std::size_t l = 0; l < head_.size(); ++l) {
            Eigen::RowVectorXd pre = (*h) * head_[l].weight + head_[l].bias;
            t.head_pre.push_back(pre);
            if (l + 1 < head_.size()) {
                t.head_act.push_back(pre.cwiseMax(0.0));
                h = &t.head_act.back();
            }
        }
        t.logits = t.head_pre.back().transpose();
        const double m = t.logits.maxCoeff();
        Eigen::VectorXd ex = (t.logits.array() - m).exp();
        t.probs = ex / ex.sum();
        return t;
    }

    // class probabilities, length C, nonnegative, summing to 1
    Eigen::VectorXd forward(const PointCloud& cloud) const { return trace(cloud).probs; }

    int predict(const PointCloud& cloud) const {
        return detail::argmax_lowest(forward(cloud));
    }

    // d(objective)/d(point coordinates) for an objective whose gradient in
    // logit space is dlogits; exact reverse mode through head, pooling, MLP.
    std::vector<Vec3> input_gradient(const ForwardTrace& t,
                                     const Eigen::VectorXd& dlogits) const {
        Eigen::RowVectorXd g = dlogits.transpose();
        for (std::size_t l = head_.size(); l-- > 0;) {
            Eigen::RowVectorXd dx = g * head_[l].weight.transpose();
            if (l > 0) {
                g = dx.cwiseProduct(
                    (t.head_pre[l - 1].array() > 0.0).cast<double>().matrix());
            } else {
                g = dx;
            }
        }
        // g is now the gradient at the pooled feature vector
        const Eigen::Index n = t.input.rows();
        const Eigen::Index f = t.pooled.size();
        Eigen::MatrixXd dfeat = Eigen::MatrixXd::Zero(n, f);
        if (pooling_ == Pooling::Max) {
            // ties routed to the lowest winning index
            for (Eigen::Index c = 0; c < f; ++c)
                dfeat(t.winners[static_cast<std::size_t>(c)], c) += g(c);
        } else {
            const double inv_n = 1.0 / static_cast<double>(n);
            for (Eigen::Index c = 0; c < f; ++c) dfeat.col(c).setConstant(g(c) * inv_n);
        }
        Eigen::MatrixXd gm = dfeat.cwiseProduct(
            (t.mlp_pre.back().array() > 0.0).cast<double>().matrix());
        for (std::size_t l = mlp_.size(); l-- > 0;) {
            Eigen::MatrixXd dx = gm * mlp_[l].weight.transpose();
            if (l > 0) {
                gm = dx.cwiseProduct(
                    (t.mlp_pre[l - 1].array() > 0.0).cast<double>().matrix());
            } else {
                gm = dx;
            }
        }
        std::vector<Vec3> out(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] = Vec3{gm(i, 0), gm(i, 1), gm(i, 2)};
        return out;
    }

    // hinge margin h(P') = max{0, F_true - max_{i != true} F_i}; zero exactly
    // when the cloud is already misclassified relative to true_class
    MarginValue margin_from_probs(const Eigen::VectorXd& probs, int true_class) const {
        if (true_class < 0 || true_class >= num_classes())
            throw std::invalid_argument("margin: true_class out of range");
        MarginValue m;
        m.true_class = true_class;
        m.runner_up = -1;
        for (int i = 0; i < num_classes(); ++i) {
            if (i == true_class) continue;
            if (m.runner_up < 0 || probs(i) > probs(m.runner_up)) m.runner_up = i;
        }
        m.value = std::max(0.0, probs(true_class) - probs(m.runner_up));
        return m;
    }

    MarginValue margin(const PointCloud& cloud, int true_class) const {
        return margin_from_probs(forward(cloud), true_class);
    }

    // dh/dp'_i; all zeros when the hinge is inactive
    std::vector<Vec3> margin_input_gradient(const PointCloud& cloud, int true_class) const {
        const ForwardTrace t = trace(cloud);
        return margin_input_gradient(t, true_class);
    }

    std::vector<Vec3> margin_input_gradient(const ForwardTrace& t, int true_class) const {
        const MarginValue m = margin_from_probs(t.probs, true_class);
        if (m.value <= 0.0)
            return std::vector<Vec3>(static_cast<std::size_t>(t.input.rows()), Vec3{});
        // d(F_a - F_b)/dz_j through the softmax Jacobian
        const int a = m.true_class, b = m.runner_up;
        Eigen::VectorXd dlogits(num_classes());
        for (int j = 0; j < num_classes(); ++j) {
            const double da = t.probs(a) * ((j == a ? 1.0 : 0.0) - t.probs(j));
            const double db = t.probs(b) * ((j == b ? 1.0 : 0.0) - t.probs(j));
            dlogits(j) = da - db;
        }
        return input_gradient(t, dlogits);
    }

    // indices of points attaining the channel-wise maximum in at least one
    // pooled feature channel; ties include every attaining point
    std::vector<int> critical_points(const PointCloud& cloud) const {
        const ForwardTrace t = trace(cloud);
        const Eigen::MatrixXd& features = t.mlp_act.back();
        std::vector<std::uint8_t> is_critical(cloud.size(), 0);
        for (Eigen::Index c = 0; c < features.cols(); ++c) {
            const double top = features.col(c).maxCoeff();
            for (Eigen::Index i = 0; i < features.rows(); ++i)
                if (features(i, c) == top) is_critical[static_cast<std::size_t>(i)] = 1;
        }
        std::vector<int> out;
        for (std::size_t i = 0; i < is_critical.size(); ++i)
            if (is_critical[i]) out.push_back(static_cast<int>(i));
        return out;
    }

    // ||d(cross-entropy vs label)/dp_i||_2 per point
    std::vector<double> saliency_scores(const PointCloud& cloud, int label) const {
        if (label < 0 || label >= num_classes())
            throw std::invalid_argument("saliency_scores: label out of range");
        const ForwardTrace t = trace(cloud);
        Eigen::VectorXd dlogits = t.probs;
        dlogits(label) -= 1.0;
        const std::vector<Vec3> grads = input_gradient(t, dlogits);
        std::vector<double> scores(grads.size());
        for (std::size_t i = 0; i < grads.size(); ++i) scores[i] = grads[i].norm();
        return scores;
    }

    void save(const std::string& path) const {
        nlohmann::json j = to_json();
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
        out << j.dump(2) << '\n';
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "pcadv-classifier";
        j["version"] = 1;
        j["architecture_tag"] = tag_;
        j["pooling"] = pooling_ == Pooling::Max ? "max" : "avg";
        j["point_mlp_widths"] = mlp_widths_;
        j["head_widths"] = head_widths_;
        j["num_classes"] = num_classes();
        const auto dump_layers = [](const std::vector<LinearLayer>& layers) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& layer : layers) {
                nlohmann::json lj;
                lj["rows"] = layer.weight.rows();
                lj["cols"] = layer.weight.cols();
                std::vector<double> w;
                w.reserve(static_cast<std::size_t>(layer.weight.size()));
                for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
                    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
                        w.push_back(layer.weight(r, c));
                lj["weight"] = std::move(w);
                lj["bias"] = std::vector<double>(layer.bias.data(),
                                                 layer.bias.data() + layer.bias.size());
                arr.push_back(std::move(lj));
            }
            return arr;
        };
        j["mlp"] = dump_layers(mlp_);
        j["head"] = dump_layers(head_);
        return j;
    }

    static Classifier load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }

    static Classifier from_json(const nlohmann::json& j) {
        if (j.value("format", "") != "pcadv-classifier")
            throw std::runtime_error("checkpoint: not a pcadv classifier file");
        if (j.value("version", 0) != 1)
            throw std::runtime_error("checkpoint: unsupported version");
        Classifier net;
        net.tag_ = j.at("architecture_tag").get<std::string>();
        const std::string pooling = j.at("pooling").get<std::string>();
        if (pooling == "max") {
            net.pooling_ = Pooling::Max;
        } else if (pooling == "avg") {
            net.pooling_ = Pooling::Avg;
        } else {
            throw std::runtime_error("checkpoint: unknown pooling " + pooling);
        }
        net.mlp_widths_ = j.at("point_mlp_widths").get<std::vector<int>>();
        net.head_widths_ = j.at("head_widths").get<std::vector<int>>();
        if (j.at("num_classes").get<int>() != net.head_widths_.back())
            throw std::runtime_error("checkpoint: class count mismatch");
        const auto read_layers = [](const nlohmann::json& arr, const std::vector<int>& widths,
                                    std::vector<LinearLayer>& layers) {
            if (arr.size() + 1 != widths.size())
                throw std::runtime_error("checkpoint: layer count mismatch");
            for (std::size_t l = 0; l < arr.size(); ++l) {
                const auto& lj = arr[l];
                const Eigen::Index rows = lj.at("rows").get<Eigen::Index>();
                const Eigen::Index cols = lj.at("cols").get<Eigen::Index>();
                if (rows != widths[l] || cols != widths[l + 1])
                    throw std::runtime_error("checkpoint: layer shape mismatch");
                const auto w = lj.at("weight").get<std::vector<double>>();
                const auto b = lj.at("bias").get<std::vector<double>>();
                if (w.size() != static_cast<std::size_t>(rows * cols) ||
                    b.size() != static_cast<std::size_t>(cols))
                    throw std::runtime_error("checkpoint: parameter size mismatch");
                LinearLayer layer;
                layer.weight.resize(rows, cols);
                std::size_t k = 0;
                for (Eigen::Index r = 0; r < rows; ++r)
                    for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = w[k++];
                layer.bias.resize(cols);
                for (Eigen::Index c = 0; c < cols; ++c) layer.bias(c) = b[static_cast<std::size_t>(c)];
                layers.push_back(std::move(layer));
            }
        };
        read_layers(j.at("mlp"), net.mlp_widths_, net.mlp_);
        read_layers(j.at("head"), net.head_widths_, net.head_);
        return net;
    }

private:
    std::string tag_ = "maxpool";
    Pooling pooling_ = Pooling::Max;
    std::vector<int> mlp_widths_;
    std::vector<int> head_widths_;
    std::vector<LinearLayer> mlp_;
    std::vector<LinearLayer> head_;
};

}  // namespace pcadv
