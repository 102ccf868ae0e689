#include "gzsl/dataset.hpp"

#include "gzsl/error.hpp"
#include "gzsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gzsl {

namespace {

Matrix concat_inputs(const FeatureDataset& ds, const std::vector<int>& rows, const Matrix& word_vectors) {
    Matrix in(static_cast<Eigen::Index>(rows.size()), ds.feature_dim() + word_vectors.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        in.row(r).head(ds.feature_dim()) = ds.features.row(rows[i]).cast<double>();
        in.row(r).tail(word_vectors.cols()) = word_vectors.row(ds.labels[static_cast<std::size_t>(rows[i])]);
    }
    return in;
}

Matrix targets_of(const FeatureDataset& ds, const std::vector<int>& rows, const Matrix& attributes) {
    Matrix t(static_cast<Eigen::Index>(rows.size()), attributes.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        t.row(static_cast<Eigen::Index>(i)) = attributes.row(ds.labels[static_cast<std::size_t>(rows[i])]);
    return t;
}

double mse(const Matrix& pred, const Matrix& target) {
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

}  // namespace

TransferResult transfer_attributes(const FeatureDataset& source, const Matrix& target_word_vectors,
                                   const FeatureDataset& synth, const TransferConfig& cfg) {
    if (!source.manual_embeddings) throw ValidationError("transfer source must carry a manual attribute table");
    if (target_word_vectors.cols() != source.embedding_dim())
        throw ValidationError("dimension mismatch: source word vectors have " + std::to_string(source.embedding_dim()) +
                              " dims, target has " + std::to_string(target_word_vectors.cols()));
    if (synth.provenance != Provenance::synthesized)
        throw ValidationError("transfer inputs for target classes must be generated features, not real ones");
    if (synth.feature_dim() != source.feature_dim())
        throw ValidationError("dimension mismatch: generated features do not match source feature width");
    const int num_targets = static_cast<int>(target_word_vectors.rows());
    for (int y : synth.labels)
        if (y < 0 || y >= num_targets) throw ValidationError("generated row label outside target class range");

    const Matrix word = to_double(source.embeddings);
    const Matrix attrs = to_double(*source.manual_embeddings);

    // Early-stopping holdout: a fraction of the source classes that have rows.
    std::vector<int> populated;
    const std::vector<int> counts = source.class_counts();
    for (int y = 0; y < source.num_classes(); ++y)
        if (counts[static_cast<std::size_t>(y)] > 0) populated.push_back(y);
    if (populated.size() < 2) throw ValidationError("transfer source needs rows from at least 2 classes");
    Rng rng(derive_seed(cfg.seed, 40));
    rng.shuffle(populated);
    const auto num_holdout = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(cfg.holdout_class_fraction * static_cast<double>(populated.size()))), 1,
        populated.size() - 1);
    std::vector<bool> is_holdout(static_cast<std::size_t>(source.num_classes()), false);
    for (std::size_t i = 0; i < num_holdout; ++i) is_holdout[static_cast<std::size_t>(populated[i])] = true;

    std::vector<int> train_rows, val_rows;
    for (int i = 0; i < source.size(); ++i)
        (is_holdout[static_cast<std::size_t>(source.labels[static_cast<std::size_t>(i)])] ? val_rows : train_rows)
            .push_back(i);

    const Matrix val_in = concat_inputs(source, val_rows, word);
    const Matrix val_target = targets_of(source, val_rows, attrs);

    MlpSpec spec{{source.feature_dim() + source.embedding_dim(), cfg.hidden, static_cast<int>(attrs.cols())},
                 Activation::relu, Activation::none};
    TransferResult result;
    result.network = init_mlp(spec, derive_seed(cfg.seed, 41));
    result.validation_mse = mse(forward(result.network, val_in), val_target);
    result.best_epoch = 0;

    Mlp net = result.network;
    AdamState adam = adam_init(net);
    const AdamConfig adam_cfg{cfg.lr};
    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(train_rows);
        for (std::size_t start = 0; start < train_rows.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(train_rows.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::vector<int> batch(train_rows.begin() + static_cast<std::ptrdiff_t>(start),
                                         train_rows.begin() + static_cast<std::ptrdiff_t>(end));
            const ForwardTrace trace = forward_trace(net, concat_inputs(source, batch, word));
            const Matrix target = targets_of(source, batch, attrs);
            const Matrix grad = 2.0 * (trace.output - target) / static_cast<double>(trace.output.size());
            adam_step(net, backward(net, trace, grad), adam, adam_cfg);
        }
        const double val = mse(forward(net, val_in), val_target);
        if (!std::isfinite(val)) throw RunError("attribute transfer diverged at epoch " + std::to_string(epoch));
        if (val < result.validation_mse) {
            result.validation_mse = val;
            result.best_epoch = epoch;
            result.network = net;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    result.attributes = Matrix::Zero(num_targets, attrs.cols());
    std::vector<int> per_target(static_cast<std::size_t>(num_targets), 0);
    std::vector<int> rows(static_cast<std::size_t>(synth.size()));
    std::iota(rows.begin(), rows.end(), 0);
    if (!rows.empty()) {
        const Matrix pred = forward(result.network, concat_inputs(synth, rows, target_word_vectors));
        for (int i = 0; i < synth.size(); ++i) {
            const int y = synth.labels[static_cast<std::size_t>(i)];
            result.attributes.row(y) += pred.row(i);
            ++per_target[static_cast<std::size_t>(y)];
        }
    }
    for (int y = 0; y < num_targets; ++y) {
        if (per_target[static_cast<std::size_t>(y)] == 0)
            throw ValidationError("no generated rows for target class " + std::to_string(y));
        result.attributes.row(y) /= per_target[static_cast<std::size_t>(y)];
    }
    return result;
}

}  // namespace gzsl
