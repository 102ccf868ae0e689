#pragma once

#include "gzsl/models.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gzsl {

/// Float32, row-major: the in-memory mirror of the on-disk payload.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Where feature rows came from. Detector training refuses real unseen rows,
/// so generated datasets carry the `synthesized` tag.
enum class Provenance { real, synthesized };

struct FeatureDataset {
    FeatureMatrix features;              // n x dx
    std::vector<int> labels;             // n, each in [0, c)
    FeatureMatrix embeddings;            // c x de, row y is e(y)
    std::vector<std::string> class_names;
    std::optional<FeatureMatrix> manual_embeddings;  // c x dm, optional second table
    Provenance provenance = Provenance::real;

    int size() const { return static_cast<int>(features.rows()); }
    int feature_dim() const { return static_cast<int>(features.cols()); }
    int embedding_dim() const { return static_cast<int>(embeddings.cols()); }
    int num_classes() const { return static_cast<int>(embeddings.rows()); }

    /// Shape and label checks. `allow_empty` admits n == 0 (e.g. a
    /// zero-count synthesis); loaded datasets are never empty.
    void validate(bool allow_empty = false) const;

    std::vector<int> class_counts() const;
    std::vector<int> rows_of_class(int label) const;

    /// Copies the given rows, keeping the class tables.
    FeatureDataset subset(const std::vector<int>& rows) const;
};

/// Reads meta.json, features.f32, labels.i32, embeddings.f32 and the
/// optional embeddings_manual.f32.
FeatureDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const FeatureDataset& ds, const std::filesystem::path& dir);

struct SplitSpec {
    std::vector<int> seen;    // sorted
    std::vector<int> unseen;  // sorted
    std::uint64_t seed = 0;
    double seen_test_fraction = 0.2;

    void validate(int num_classes) const;
    bool is_seen(int label) const;
};

nlohmann::ordered_json split_to_json(const SplitSpec& split);
SplitSpec split_from_json(const nlohmann::json& j);

/// Shuffles class ids with `seed` and takes the first `num_seen` as seen.
SplitSpec random_split(const FeatureDataset& ds, int num_seen, std::uint64_t seed);

struct GzslTestSet {
    FeatureMatrix features;
    std::vector<int> labels;
    std::vector<bool> is_seen_class;
    std::vector<int> source_rows;  // row indices into the originating dataset
};

/// Row indices of the seen training pool and of the generalized test set.
/// Per seen class, round-half-up(fraction * count) rows are held out for
/// testing; every unseen row goes to the test set.
struct GzslPartition {
    std::vector<int> train_rows;
    std::vector<int> test_rows;
};

GzslPartition partition_rows(const FeatureDataset& ds, const SplitSpec& split);
GzslTestSet build_gzsl_test_set(const FeatureDataset& ds, const SplitSpec& split);
/// Seen-class rows not held out by build_gzsl_test_set for the same split.
FeatureDataset build_train_set(const FeatureDataset& ds, const SplitSpec& split);

struct SyntheticBenchmarkConfig {
    int num_classes = 20;
    int dim_feature = 64;
    int dim_embedding = 16;
    int samples_per_class = 100;
    double cluster_spread = 0.5;
    double embedding_noise = 0.05;
    /// Rank of the latent factor behind the class embeddings. Keeps unseen
    /// embeddings inside the span of the seen ones, as real attribute
    /// tables are strongly correlated.
    int embedding_rank = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Class embedding e = B h, class mean
/// mu = A e + embedding_noise * n, samples x = mu + cluster_spread * g,
/// with A, B, h, n, g standard-normal draws.
FeatureDataset make_synthetic_benchmark(const SyntheticBenchmarkConfig& cfg);

/// The embedding -> class-mean rule used by make_synthetic_benchmark, for
/// the map and per-class noise fixed by cfg.seed. Row y of `embeddings`
/// yields row y of the result.
Matrix benchmark_class_means(const SyntheticBenchmarkConfig& cfg, const Matrix& embeddings);

struct TransferConfig {
    int hidden = 128;
    int epochs = 200;
    int batch_size = 64;
    double lr = 1e-3;
    double holdout_class_fraction = 0.1;  // early-stopping validation classes
    int patience = 20;
    std::uint64_t seed = 0;
};

struct TransferResult {
    Matrix attributes;            // U x dm
    double validation_mse = 0.0;  // on held-out source classes at the kept epoch
    int best_epoch = 0;
    Mlp network;
};

/// Learns word-vector -> manual-attribute regression on `source` (which
/// must carry both embedding tables) with a two-layer FC network fed
/// (feature ++ word vector). Each target class is then predicted as the
/// mean network output over its generated rows in `synth`, whose labels
/// index rows of `target_word_vectors`. `synth` must be tagged
/// Provenance::synthesized.
TransferResult transfer_attributes(const FeatureDataset& source, const Matrix& target_word_vectors,
                                   const FeatureDataset& synth, const TransferConfig& cfg);

Matrix to_double(const FeatureMatrix& m);
FeatureMatrix to_float(const Matrix& m);

}  // namespace gzsl
