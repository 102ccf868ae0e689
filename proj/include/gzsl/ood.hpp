#pragma once

#include "gzsl/dataset.hpp"
#include "gzsl/models.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gzsl {

/// Floor applied inside every log of the entropy and NLL terms.
inline constexpr double kLogFloor = 1e-12;

/// Natural-log entropy, 0 log 0 = 0. Throws on entries < 0 or a sum off 1
/// by more than 1e-6.
double entropy(std::span<const double> p);
double entropy(const RowVector& p);

/// Per-row entropies of a probability matrix (no validation).
Vector row_entropies(const Matrix& probs);

/// mean H(p_seen) - mean H(p_unseen) + nll_weight * mean(-log p_seen[y]).
/// `labels_seen` are column indices into the S-way outputs.
double entropy_loss(const Matrix& p_seen, const std::vector<int>& labels_seen, const Matrix& p_unseen,
                    double nll_weight = 1.0);

struct EntropyLossGrad {
    double value = 0.0;
    Matrix d_seen;    // d loss / d p_seen
    Matrix d_unseen;  // d loss / d p_unseen
};

EntropyLossGrad entropy_loss_grad(const Matrix& p_seen, const std::vector<int>& labels_seen, const Matrix& p_unseen,
                                  double nll_weight = 1.0);

struct OdConfig {
    int hidden = 64;
    int epochs = 100;
    int batch_size = 64;  // half real seen rows, half generated unseen rows
    double lr = 1e-3;
    double nll_weight = 1.0;
    std::uint64_t seed = 0;
};

/// S-way softmax network over the seen classes plus the entropy threshold.
struct OdDetector {
    Mlp network;
    std::vector<int> seen_classes;  // output column k is class seen_classes[k]
    double threshold = 0.0;

    Matrix probabilities(const Matrix& features) const { return forward(network, features); }
};

struct RoutingDecision {
    double entropy = 0.0;
    bool is_seen = false;  // entropy < threshold; ties route to unseen
};

/// Trains on real seen rows and generated unseen rows with the entropy loss,
/// then sets the threshold from the seen training rows. Refuses an unseen
/// pool that is not tagged Provenance::synthesized.
OdDetector train_od(const FeatureDataset& real_seen, const FeatureDataset& synth_unseen,
                    const std::vector<int>& seen_classes, const OdConfig& cfg);

/// Mean prediction entropy over the rows.
double select_threshold(const OdDetector& detector, const Matrix& seen_train_features);

RoutingDecision route(const OdDetector& detector, const RowVector& feature_row);
std::vector<RoutingDecision> route_rows(const OdDetector& detector, const Matrix& features);

/// Seen-vs-unseen two-way classifier. Column 0 is "seen".
struct BinaryDetector {
    Mlp network;

    /// Probability that each row belongs to an unseen class.
    Vector unseen_probability(const Matrix& features) const;
    /// Seen iff P(seen) > 0.5.
    std::vector<bool> routes_seen(const Matrix& features) const;
};

/// Real seen and generated seen rows form the "seen" group, generated
/// unseen rows the "unseen" group; trained with cross-entropy on balanced
/// batches.
BinaryDetector train_od_binary(const FeatureDataset& real_seen, const FeatureDataset& synth_seen,
                               const FeatureDataset& synth_unseen, const OdConfig& cfg);

/// Checkpoint: models-format network under <dir>/network, plus
/// <dir>/threshold.json {"ent_th": ...} and <dir>/classes.json.
void save_detector(const OdDetector& detector, const std::filesystem::path& dir);
OdDetector load_detector(const std::filesystem::path& dir);

}  // namespace gzsl
