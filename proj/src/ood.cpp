#include "gzsl/ood.hpp"

#include "gzsl/binary_io.hpp"
#include "gzsl/error.hpp"
#include "gzsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gzsl {

namespace {

double plogp(double p) { return p * std::log(std::max(p, kLogFloor)); }

// d/dp of p * log(max(p, floor))
double plogp_grad(double p) { return p >= kLogFloor ? std::log(p) + 1.0 : std::log(kLogFloor); }

}  // namespace

double entropy(std::span<const double> p) {
    if (p.empty()) throw ValidationError("entropy of an empty distribution");
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw ValidationError("invalid distribution: negative or NaN entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("invalid distribution: entries sum to " + std::to_string(sum));
    double h = 0.0;
    for (double v : p) h -= plogp(v);
    return std::max(h, 0.0);
}

double entropy(const RowVector& p) { return entropy(std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))); }

Vector row_entropies(const Matrix& probs) {
    Vector h(probs.rows());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < probs.cols(); ++c) acc -= plogp(probs(r, c));
        h(r) = std::max(acc, 0.0);
    }
    return h;
}

EntropyLossGrad entropy_loss_grad(const Matrix& p_seen, const std::vector<int>& labels_seen, const Matrix& p_unseen,
                                  double nll_weight) {
    if (p_seen.rows() == 0 || p_unseen.rows() == 0) throw ValidationError("entropy loss needs seen and unseen rows");
    if (p_seen.cols() != p_unseen.cols()) throw ValidationError("seen and unseen outputs differ in width");
    if (static_cast<Eigen::Index>(labels_seen.size()) != p_seen.rows())
        throw ValidationError("one label per seen row required");
    const double inv_s = 1.0 / static_cast<double>(p_seen.rows());
    const double inv_u = 1.0 / static_cast<double>(p_unseen.rows());

    EntropyLossGrad out;
    out.d_seen = Matrix::Zero(p_seen.rows(), p_seen.cols());
    out.d_unseen = Matrix::Zero(p_unseen.rows(), p_unseen.cols());
    double h_seen = 0.0, h_unseen = 0.0, nll = 0.0;
    for (Eigen::Index r = 0; r < p_seen.rows(); ++r) {
        const int y = labels_seen[static_cast<std::size_t>(r)];
        if (y < 0 || y >= p_seen.cols()) throw ValidationError("seen label out of range");
        for (Eigen::Index c = 0; c < p_seen.cols(); ++c) {
            h_seen -= plogp(p_seen(r, c));
            out.d_seen(r, c) = -inv_s * plogp_grad(p_seen(r, c));
        }
        const double py = p_seen(r, y);
        nll -= std::log(std::max(py, kLogFloor));
        if (py >= kLogFloor) out.d_seen(r, y) -= nll_weight * inv_s / py;
    }
    for (Eigen::Index r = 0; r < p_unseen.rows(); ++r)
        for (Eigen::Index c = 0; c < p_unseen.cols(); ++c) {
            h_unseen -= plogp(p_unseen(r, c));
            out.d_unseen(r, c) = inv_u * plogp_grad(p_unseen(r, c));
        }
    out.value = h_seen * inv_s - h_unseen * inv_u + nll_weight * nll * inv_s;
    return out;
}

double entropy_loss(const Matrix& p_seen, const std::vector<int>& labels_seen, const Matrix& p_unseen,
                    double nll_weight) {
    return entropy_loss_grad(p_seen, labels_seen, p_unseen, nll_weight).value;
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<int>& rows, std::size_t start, std::size_t count) {
    Matrix out(static_cast<Eigen::Index>(count), m.cols());
    for (std::size_t i = 0; i < count; ++i)
        out.row(static_cast<Eigen::Index>(i)) = m.row(rows[(start + i) % rows.size()]);
    return out;
}

// Cycles through a shuffled index list, reshuffling at each wrap.
struct IndexStream {
    std::vector<int> order;
    std::size_t cursor = 0;

    explicit IndexStream(int n) : order(static_cast<std::size_t>(n)) { std::iota(order.begin(), order.end(), 0); }

    std::vector<int> take(std::size_t count, Rng& rng) {
        std::vector<int> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            if (cursor == 0) rng.shuffle(order);
            out.push_back(order[cursor]);
            cursor = (cursor + 1) % order.size();
        }
        return out;
    }
};

void check_pools(const FeatureDataset& real_seen, const FeatureDataset& synth_unseen) {
    if (real_seen.size() == 0 || synth_unseen.size() == 0)
        throw ValidationError("detector training needs nonempty seen and generated-unseen pools");
    if (real_seen.provenance != Provenance::real)
        throw ValidationError("detector seen pool must hold real seen-class features");
    if (synth_unseen.provenance != Provenance::synthesized)
        throw ValidationError("protocol violation: detector unseen pool must be generated, never real unseen features");
    if (real_seen.feature_dim() != synth_unseen.feature_dim())
        throw ValidationError("seen and unseen pools differ in feature width");
}

}  // namespace

OdDetector train_od(const FeatureDataset& real_seen, const FeatureDataset& synth_unseen,
                    const std::vector<int>& seen_classes, const OdConfig& cfg) {
    check_pools(real_seen, synth_unseen);
    if (seen_classes.empty()) throw ValidationError("detector needs at least one seen class");
    if (cfg.batch_size < 2 || cfg.epochs < 0 || !(cfg.lr > 0)) throw ValidationError("invalid detector config");
    const int s = static_cast<int>(seen_classes.size());

    std::vector<int> column(static_cast<std::size_t>(real_seen.num_classes()), -1);
    for (int k = 0; k < s; ++k) column.at(static_cast<std::size_t>(seen_classes[static_cast<std::size_t>(k)])) = k;
    std::vector<int> seen_targets;
    for (int y : real_seen.labels) {
        if (column[static_cast<std::size_t>(y)] < 0)
            throw ValidationError("seen pool contains class " + std::to_string(y) + " outside the seen label set");
        seen_targets.push_back(column[static_cast<std::size_t>(y)]);
    }
    for (int y : synth_unseen.labels)
        if (column[static_cast<std::size_t>(y)] >= 0)
            throw ValidationError("generated unseen pool contains seen class " + std::to_string(y));

    OdDetector det;
    det.seen_classes = seen_classes;
    det.network = init_mlp({{real_seen.feature_dim(), cfg.hidden, cfg.hidden, s}, Activation::relu, Activation::softmax},
                           derive_seed(cfg.seed, 50));
    const Matrix seen_x = to_double(real_seen.features);
    const Matrix unseen_x = to_double(synth_unseen.features);
    AdamState adam = adam_init(det.network);
    const AdamConfig adam_cfg{cfg.lr};
    Rng rng(derive_seed(cfg.seed, 51));
    IndexStream seen_stream(real_seen.size()), unseen_stream(synth_unseen.size());
    const std::size_t half = static_cast<std::size_t>(cfg.batch_size / 2);
    const int steps = static_cast<int>((seen_x.rows() + static_cast<Eigen::Index>(half) - 1) /
                                       static_cast<Eigen::Index>(half));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int step = 0; step < steps; ++step) {
            const std::vector<int> si = seen_stream.take(half, rng);
            const std::vector<int> ui = unseen_stream.take(half, rng);
            std::vector<int> labels;
            for (int i : si) labels.push_back(seen_targets[static_cast<std::size_t>(i)]);
            Matrix input(static_cast<Eigen::Index>(2 * half), seen_x.cols());
            input.topRows(static_cast<Eigen::Index>(half)) = gather_rows(seen_x, si, 0, half);
            input.bottomRows(static_cast<Eigen::Index>(half)) = gather_rows(unseen_x, ui, 0, half);
            const ForwardTrace trace = forward_trace(det.network, input);
            const EntropyLossGrad g =
                entropy_loss_grad(trace.output.topRows(static_cast<Eigen::Index>(half)), labels,
                                  trace.output.bottomRows(static_cast<Eigen::Index>(half)), cfg.nll_weight);
            if (!std::isfinite(g.value))
                throw RunError("non-finite entropy loss at detector epoch " + std::to_string(epoch));
            Matrix grad(input.rows(), s);
            grad << g.d_seen, g.d_unseen;
            adam_step(det.network, backward(det.network, trace, grad), adam, adam_cfg);
        }
    }
    det.threshold = select_threshold(det, seen_x);
    return det;
}

double select_threshold(const OdDetector& detector, const Matrix& seen_train_features) {
    if (seen_train_features.rows() == 0) throw ValidationError("threshold selection needs at least one seen row");
    return row_entropies(detector.probabilities(seen_train_features)).mean();
}

RoutingDecision route(const OdDetector& detector, const RowVector& feature_row) {
    Matrix m(1, feature_row.size());
    m.row(0) = feature_row;
    return route_rows(detector, m).front();
}

std::vector<RoutingDecision> route_rows(const OdDetector& detector, const Matrix& features) {
    const Vector h = row_entropies(detector.probabilities(features));
    std::vector<RoutingDecision> out(static_cast<std::size_t>(h.size()));
    for (Eigen::Index i = 0; i < h.size(); ++i) out[static_cast<std::size_t>(i)] = {h(i), h(i) < detector.threshold};
    return out;
}

Vector BinaryDetector::unseen_probability(const Matrix& features) const {
    return forward(network, features).col(1);
}

std::vector<bool> BinaryDetector::routes_seen(const Matrix& features) const {
    const Matrix p = forward(network, features);
    std::vector<bool> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) out[static_cast<std::size_t>(i)] = p(i, 0) > 0.5;
    return out;
}

BinaryDetector train_od_binary(const FeatureDataset& real_seen, const FeatureDataset& synth_seen,
                               const FeatureDataset& synth_unseen, const OdConfig& cfg) {
    check_pools(real_seen, synth_unseen);
    if (synth_seen.provenance != Provenance::synthesized || synth_seen.size() == 0)
        throw ValidationError("binary detector needs a nonempty generated seen pool");
    if (synth_seen.feature_dim() != real_seen.feature_dim())
        throw ValidationError("generated seen pool differs in feature width");
    if (cfg.batch_size < 2 || cfg.epochs < 0 || !(cfg.lr > 0)) throw ValidationError("invalid detector config");

    Matrix seen_x(real_seen.size() + synth_seen.size(), real_seen.feature_dim());
    seen_x << to_double(real_seen.features), to_double(synth_seen.features);
    const Matrix unseen_x = to_double(synth_unseen.features);

    BinaryDetector det;
    det.network = init_mlp({{real_seen.feature_dim(), cfg.hidden, cfg.hidden, 2}, Activation::relu, Activation::softmax},
                           derive_seed(cfg.seed, 52));
    AdamState adam = adam_init(det.network);
    const AdamConfig adam_cfg{cfg.lr};
    Rng rng(derive_seed(cfg.seed, 53));
    IndexStream seen_stream(static_cast<int>(seen_x.rows())), unseen_stream(static_cast<int>(unseen_x.rows()));
    const std::size_t half = static_cast<std::size_t>(cfg.batch_size / 2);
    const auto b = static_cast<Eigen::Index>(2 * half);
    // Same number of updates per epoch as the entropy detector.
    const int steps = static_cast<int>((real_seen.size() + static_cast<int>(half) - 1) / static_cast<int>(half));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int step = 0; step < steps; ++step) {
            Matrix input(b, seen_x.cols());
            input.topRows(static_cast<Eigen::Index>(half)) = gather_rows(seen_x, seen_stream.take(half, rng), 0, half);
            input.bottomRows(static_cast<Eigen::Index>(half)) =
                gather_rows(unseen_x, unseen_stream.take(half, rng), 0, half);
            const ForwardTrace trace = forward_trace(det.network, input);
            Matrix grad = Matrix::Zero(b, 2);
            for (Eigen::Index i = 0; i < b; ++i) {
                const int target = i < static_cast<Eigen::Index>(half) ? 0 : 1;
                grad(i, target) = -1.0 / (std::max(trace.output(i, target), kLogFloor) * static_cast<double>(b));
            }
            adam_step(det.network, backward(det.network, trace, grad), adam, adam_cfg);
        }
    }
    return det;
}

void save_detector(const OdDetector& detector, const std::filesystem::path& dir) {
    save_mlp(detector.network, dir / "network");
    nlohmann::ordered_json th;
    th["ent_th"] = detector.threshold;
    io::write_json(dir / "threshold.json", th);
    nlohmann::ordered_json classes;
    classes["seen_classes"] = detector.seen_classes;
    io::write_json(dir / "classes.json", classes);
}

OdDetector load_detector(const std::filesystem::path& dir) {
    OdDetector det;
    det.network = load_mlp(dir / "network");
    try {
        det.threshold = io::read_json(dir / "threshold.json").at("ent_th").get<double>();
        det.seen_classes = io::read_json(dir / "classes.json").at("seen_classes").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed detector checkpoint: " + std::string(e.what()));
    }
    if (static_cast<int>(det.seen_classes.size()) != det.network.spec.output_size())
        throw ValidationError("detector output width does not match its class list");
    return det;
}

}  // namespace gzsl
