#include "gzsl/classify.hpp"

#include "gzsl/error.hpp"
#include "gzsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace gzsl {

ClassifierHead train_head(const Matrix& features, const std::vector<int>& labels, const std::vector<int>& label_map,
                          const HeadConfig& cfg) {
    if (label_map.empty()) throw ValidationError("label_map must not be empty");
    if (static_cast<Eigen::Index>(labels.size()) != features.rows())
        throw ValidationError("one label per feature row required");
    if (features.rows() == 0) throw ValidationError("classifier head needs training rows");
    if (cfg.batch_size < 1 || cfg.epochs < 0 || !(cfg.lr > 0)) throw ValidationError("invalid head config");
    if (std::set<int>(label_map.begin(), label_map.end()).size() != label_map.size())
        throw ValidationError("label_map contains duplicates");

    std::vector<int> targets;
    targets.reserve(labels.size());
    for (int y : labels) {
        const auto it = std::find(label_map.begin(), label_map.end(), y);
        if (it == label_map.end()) throw ValidationError("label " + std::to_string(y) + " outside label_map");
        targets.push_back(static_cast<int>(it - label_map.begin()));
    }

    ClassifierHead head;
    head.label_map = label_map;
    head.network = init_mlp({{static_cast<int>(features.cols()), static_cast<int>(label_map.size())}, Activation::relu,
                             Activation::softmax},
                            derive_seed(cfg.seed, 60));
    if (label_map.size() == 1) return head;

    AdamState adam = adam_init(head.network);
    const AdamConfig adam_cfg{cfg.lr};
    Rng rng(derive_seed(cfg.seed, 61));
    std::vector<int> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto b = static_cast<Eigen::Index>(end - start);
            Matrix input(b, features.cols());
            for (Eigen::Index i = 0; i < b; ++i) input.row(i) = features.row(order[start + static_cast<std::size_t>(i)]);
            const ForwardTrace trace = forward_trace(head.network, input);
            // Softmax + cross-entropy: gradient on the logits is p - onehot.
            Matrix grad = Matrix::Zero(b, trace.output.cols());
            for (Eigen::Index i = 0; i < b; ++i) {
                const int t = targets[static_cast<std::size_t>(order[start + static_cast<std::size_t>(i)])];
                grad(i, t) = -1.0 / (std::max(trace.output(i, t), 1e-12) * static_cast<double>(b));
            }
            adam_step(head.network, backward(head.network, trace, grad), adam, adam_cfg);
        }
    }
    return head;
}

HeadPrediction predict_head(const ClassifierHead& head, const Matrix& features) {
    const Matrix p = head.probabilities(features);
    HeadPrediction out;
    out.classes.reserve(static_cast<std::size_t>(p.rows()));
    out.confidence.reserve(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        // Highest probability; among equal probabilities the lowest class id.
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < p.cols(); ++c) {
            const double a = p(r, c), b = p(r, best);
            if (a > b || (a == b && head.label_map[static_cast<std::size_t>(c)] <
                                        head.label_map[static_cast<std::size_t>(best)]))
                best = c;
        }
        out.classes.push_back(head.label_map[static_cast<std::size_t>(best)]);
        out.confidence.push_back(p(r, best));
    }
    return out;
}

void GzslPredictor::validate() const {
    std::set<int> seen(seen_head.label_map.begin(), seen_head.label_map.end());
    for (int y : unseen_head.label_map)
        if (seen.count(y)) throw ValidationError("seen and unseen heads share class " + std::to_string(y));
    if (std::set<int>(od.seen_classes.begin(), od.seen_classes.end()) != seen)
        throw ValidationError("detector and seen head disagree on the seen label set");
}

HeadPrediction predict_routed(const std::vector<bool>& routed_seen, const ClassifierHead& seen_head,
                              const ClassifierHead& unseen_head, const Matrix& features) {
    if (static_cast<Eigen::Index>(routed_seen.size()) != features.rows())
        throw ValidationError("one route per feature row required");
    const HeadPrediction s = predict_head(seen_head, features);
    const HeadPrediction u = predict_head(unseen_head, features);
    HeadPrediction out;
    for (std::size_t i = 0; i < routed_seen.size(); ++i) {
        const HeadPrediction& src = routed_seen[i] ? s : u;
        out.classes.push_back(src.classes[i]);
        out.confidence.push_back(src.confidence[i]);
    }
    return out;
}

std::vector<GzslPrediction> predict_gzsl_rows(const GzslPredictor& pred, const Matrix& features) {
    const std::vector<RoutingDecision> routes = route_rows(pred.od, features);
    std::vector<bool> seen(routes.size());
    for (std::size_t i = 0; i < routes.size(); ++i) seen[i] = routes[i].is_seen;
    const HeadPrediction heads = predict_routed(seen, pred.seen_head, pred.unseen_head, features);
    std::vector<GzslPrediction> out(routes.size());
    for (std::size_t i = 0; i < routes.size(); ++i)
        out[i] = {heads.classes[i], routes[i].is_seen, routes[i].entropy, heads.confidence[i]};
    return out;
}

GzslPrediction predict_gzsl(const GzslPredictor& pred, const RowVector& feature_row) {
    Matrix m(1, feature_row.size());
    m.row(0) = feature_row;
    return predict_gzsl_rows(pred, m).front();
}

int predict_zsl(const ClassifierHead& unseen_head, const RowVector& feature_row) {
    Matrix m(1, feature_row.size());
    m.row(0) = feature_row;
    return predict_head(unseen_head, m).classes.front();
}

ClassifierHead train_baseline_gzsl(const FeatureDataset& real_seen, const FeatureDataset& synth_unseen,
                                   const std::vector<int>& seen_classes, const std::vector<int>& unseen_classes,
                                   const HeadConfig& cfg) {
    if (synth_unseen.provenance != Provenance::synthesized)
        throw ValidationError("baseline unseen rows must be generated features");
    std::vector<int> label_map(seen_classes);
    label_map.insert(label_map.end(), unseen_classes.begin(), unseen_classes.end());
    std::sort(label_map.begin(), label_map.end());
    Matrix features(real_seen.size() + synth_unseen.size(), real_seen.feature_dim());
    features << to_double(real_seen.features), to_double(synth_unseen.features);
    std::vector<int> labels(real_seen.labels);
    labels.insert(labels.end(), synth_unseen.labels.begin(), synth_unseen.labels.end());
    return train_head(features, labels, label_map, cfg);
}

}  // namespace gzsl
