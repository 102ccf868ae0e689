#pragma once

#include "gzsl/dataset.hpp"
#include "gzsl/models.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace gzsl {

struct TrainConfig {
    double alpha = 10.0;  // gradient-penalty coefficient
    double beta = 0.01;   // cycle-consistency weight
    double gamma = 0.1;   // cosine-embedding weight
    double lr = 1e-3;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.9;
    int batch_size = 64;
    int epochs = 100;
    int critic_steps_per_gen_step = 5;
    int d_z = 16;
    int hidden = 256;         // generator, decoder and critic hidden width
    bool squared_cycle = false;       // ||e_hat - e||^2 instead of ||e_hat - e||
    bool decoder_on_real = false;     // also fit the decoder on real features
    std::uint64_t seed = 0;
    std::filesystem::path dump_dir;   // where a non-finite batch is written, if set

    void validate() const;
};

/// Generator G(z ++ e) -> x, critic D(x ++ e) -> score, decoder x -> e.
struct GanModel {
    Mlp generator;
    Mlp critic;
    Mlp decoder;
    int d_z = 0;

    int feature_dim() const { return generator.spec.output_size(); }
    int embedding_dim() const { return decoder.spec.output_size(); }
};

/// Generator and decoder have two hidden ReLU layers; the critic has one
/// hidden LeakyReLU layer.
GanModel init_gan(int feature_dim, int embedding_dim, const TrainConfig& cfg);

void save_gan(const GanModel& gan, const std::filesystem::path& dir);
GanModel load_gan(const std::filesystem::path& dir);

struct Batch {
    Matrix real;              // B x dx
    std::vector<int> labels;  // B
    Matrix embeddings;        // B x de, row i is e(labels[i])
    Matrix noise;             // B x dz

    void validate(const GanModel& gan) const;
};

/// Index pairs (real row, synthesized row) inside one mini-batch.
struct PairSet {
    std::vector<std::pair<int, int>> matched;
    std::vector<std::pair<int, int>> unmatched;
};

/// For every synthesized row: one random same-label real row (if any) and
/// one random different-label real row (if any).
PairSet pair_minibatch(const std::vector<int>& labels_real, const std::vector<int>& labels_synth, std::uint64_t seed);

Matrix concat_columns(const Matrix& left, const Matrix& right);

/// G(z, e) for each batch row.
Matrix generate(const GanModel& gan, const Matrix& noise, const Matrix& embeddings);

/// Parts of the conditional WGAN-GP objective. `value` is the quantity the
/// critic maximizes: mean D(x,e) - mean D(x~,e) - alpha * penalty.
struct CriticLoss {
    double real_score = 0.0;
    double fake_score = 0.0;
    double penalty = 0.0;  // mean (||grad_x D(x^, e)|| - 1)^2
    double value = 0.0;
};

/// `mix` holds the per-row convex weights eps in x^ = eps x + (1 - eps) x~.
CriticLoss critic_loss(const GanModel& gan, const Batch& batch, double alpha, const Vector& mix);

/// Row-wise gradient of the critic score with respect to its feature input.
Matrix critic_input_gradient(const Mlp& critic, const Matrix& features, const Matrix& embeddings);

struct CriticObjective {
    CriticLoss loss;
    MlpGrads grads;  // d value / d critic params (ascent direction)
};

CriticObjective critic_objective(const GanModel& gan, const Batch& batch, double alpha, const Vector& mix);

/// -mean D(G(z,e), e).
double generator_wgan_term(const GanModel& gan, const Batch& batch);

/// mean ||decoder(G(z,e)) - e|| (squared when `squared` is set).
double cycle_loss(const GanModel& gan, const Batch& batch, bool squared = false);

/// mean over matched pairs of (1 - cos) plus mean over unmatched pairs of
/// max(0, cos). An empty unmatched set contributes 0.
double cosine_embedding_loss(const PairSet& pairs, const Matrix& real, const Matrix& synth);

/// Gradient of cosine_embedding_loss with respect to `synth`.
Matrix cosine_embedding_grad(const PairSet& pairs, const Matrix& real, const Matrix& synth);

struct GeneratorLoss {
    double wgan = 0.0;
    double cycle = 0.0;
    double embed = 0.0;
    double total = 0.0;  // wgan + beta * cycle + gamma * embed
};

struct GeneratorObjective {
    GeneratorLoss loss;
    MlpGrads generator_grads;
    MlpGrads decoder_grads;
};

/// Value and gradients of the generator-side objective (minimized).
GeneratorObjective generator_objective(const GanModel& gan, const Batch& batch, const PairSet& pairs, double beta,
                                       double gamma, bool squared_cycle = false);

struct LossRecord {
    int epoch = 0;
    double critic_loss = 0.0;
    double gen_wgan = 0.0;
    double cycle = 0.0;
    double embed = 0.0;
    double total = 0.0;
    double monitor = 0.0;  // value of the optional training monitor
};

struct TrainedGan {
    GanModel model;
    std::vector<LossRecord> history;  // one row per epoch; epoch 0 is the initialization
};

/// Called at initialization and after every epoch; its value lands in
/// LossRecord::monitor.
using GanMonitor = std::function<double(const GanModel&)>;

/// Alternates critic_steps_per_gen_step critic updates with one joint
/// generator + decoder update. Rows must all belong to seen classes; the
/// embedding table of `seen` conditions both networks.
TrainedGan train_gan(const FeatureDataset& seen, const TrainConfig& cfg, const GanMonitor& monitor = {});

std::string history_csv(const std::vector<LossRecord>& history);

/// per_class rows for each embedding row, grouped by embedding row.
Matrix synthesize_features(const GanModel& gan, const Matrix& embeddings, int per_class, std::uint64_t seed);

/// Generated dataset for `classes` of `table`, labelled with those class
/// ids and tagged Provenance::synthesized.
FeatureDataset synthesize(const GanModel& gan, const FeatureDataset& table, const std::vector<int>& classes,
                          int per_class, std::uint64_t seed);

}  // namespace gzsl
