#pragma once

#include "gzsl/dataset.hpp"
#include "gzsl/models.hpp"
#include "gzsl/ood.hpp"

#include <cstdint>
#include <vector>

namespace gzsl {

struct HeadConfig {
    int epochs = 50;
    int batch_size = 64;
    double lr = 1e-3;
    std::uint64_t seed = 0;
};

/// Single-layer softmax classifier. Output column k is class label_map[k].
struct ClassifierHead {
    Mlp network;
    std::vector<int> label_map;

    Matrix probabilities(const Matrix& features) const { return forward(network, features); }
};

struct HeadPrediction {
    std::vector<int> classes;       // predicted class ids
    std::vector<double> confidence; // max softmax probability
};

/// Cross-entropy training. Every label must appear in label_map.
ClassifierHead train_head(const Matrix& features, const std::vector<int>& labels, const std::vector<int>& label_map,
                          const HeadConfig& cfg);

/// Argmax over the head's classes; ties go to the lowest class id.
HeadPrediction predict_head(const ClassifierHead& head, const Matrix& features);

struct GzslPredictor {
    OdDetector od;
    ClassifierHead seen_head;
    ClassifierHead unseen_head;

    void validate() const;
};

struct GzslPrediction {
    int predicted_class = -1;
    bool routed_seen = false;
    double entropy = 0.0;
    double confidence = 0.0;
};

GzslPrediction predict_gzsl(const GzslPredictor& pred, const RowVector& feature_row);
std::vector<GzslPrediction> predict_gzsl_rows(const GzslPredictor& pred, const Matrix& features);

/// Dispatches each row to the seen or unseen head by a precomputed route.
HeadPrediction predict_routed(const std::vector<bool>& routed_seen, const ClassifierHead& seen_head,
                              const ClassifierHead& unseen_head, const Matrix& features);

int predict_zsl(const ClassifierHead& unseen_head, const RowVector& feature_row);

/// One head over seen and unseen classes (no routing): real seen rows plus
/// generated unseen rows.
ClassifierHead train_baseline_gzsl(const FeatureDataset& real_seen, const FeatureDataset& synth_unseen,
                                   const std::vector<int>& seen_classes, const std::vector<int>& unseen_classes,
                                   const HeadConfig& cfg);

}  // namespace gzsl
