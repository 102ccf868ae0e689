#include "gzsl/dataset.hpp"

#include "gzsl/binary_io.hpp"
#include "gzsl/error.hpp"
#include "gzsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace gzsl {

namespace fs = std::filesystem;

Matrix to_double(const FeatureMatrix& m) { return m.cast<double>(); }
FeatureMatrix to_float(const Matrix& m) { return m.cast<float>(); }

void FeatureDataset::validate(bool allow_empty) const {
    const int c = num_classes();
    if (c < 2) throw ValidationError("dataset needs at least 2 classes, got " + std::to_string(c));
    if (embedding_dim() <= 0) throw ValidationError("embedding dimension must be positive");
    if (feature_dim() <= 0) throw ValidationError("feature dimension must be positive");
    if (!allow_empty && size() < 1) throw ValidationError("dataset has no rows");
    if (static_cast<int>(labels.size()) != size())
        throw ValidationError("dimension mismatch: " + std::to_string(labels.size()) + " labels for " +
                              std::to_string(size()) + " feature rows");
    if (static_cast<int>(class_names.size()) != c)
        throw ValidationError("dimension mismatch: " + std::to_string(class_names.size()) + " class names for " +
                              std::to_string(c) + " classes");
    if (manual_embeddings && (manual_embeddings->rows() != c || manual_embeddings->cols() <= 0))
        throw ValidationError("dimension mismatch: manual embedding table must have one row per class");
    for (int y : labels)
        if (y < 0 || y >= c) throw ValidationError("label out of range: " + std::to_string(y));
}

std::vector<int> FeatureDataset::class_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(num_classes()), 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

std::vector<int> FeatureDataset::rows_of_class(int label) const {
    std::vector<int> rows;
    for (int i = 0; i < size(); ++i)
        if (labels[static_cast<std::size_t>(i)] == label) rows.push_back(i);
    return rows;
}

FeatureDataset FeatureDataset::subset(const std::vector<int>& rows) const {
    FeatureDataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
        out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
    }
    out.embeddings = embeddings;
    out.class_names = class_names;
    out.manual_embeddings = manual_embeddings;
    out.provenance = provenance;
    return out;
}

namespace {

std::vector<float> flat_of(const FeatureMatrix& m) { return {m.data(), m.data() + m.size()}; }

FeatureMatrix matrix_of(const std::vector<float>& flat, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
        throw ValidationError("dimension mismatch: " + what + " holds " + std::to_string(flat.size()) +
                              " values, meta.json implies " + std::to_string(rows * cols));
    FeatureMatrix m(rows, cols);
    std::copy(flat.begin(), flat.end(), m.data());
    return m;
}

}  // namespace

FeatureDataset load_dataset(const fs::path& dir) {
    const nlohmann::json meta = io::read_json(dir / "meta.json");
    int n = 0, dx = 0, c = 0, de = 0;
    std::optional<int> dm;
    FeatureDataset ds;
    try {
        n = meta.at("n").get<int>();
        dx = meta.at("dx").get<int>();
        c = meta.at("c").get<int>();
        de = meta.at("de").get<int>();
        ds.class_names = meta.at("class_names").get<std::vector<std::string>>();
        if (meta.contains("dm")) dm = meta.at("dm").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed meta.json: " + std::string(e.what()));
    }
    if (n < 0 || dx <= 0 || c <= 0 || de <= 0) throw ValidationError("meta.json has non-positive dimensions");

    ds.features = matrix_of(io::read_f32(dir / "features.f32"), n, dx, "features.f32");
    const std::vector<std::int32_t> labels = io::read_i32(dir / "labels.i32");
    if (static_cast<int>(labels.size()) != n)
        throw ValidationError("dimension mismatch: labels.i32 holds " + std::to_string(labels.size()) +
                              " labels, meta.json says n=" + std::to_string(n));
    ds.labels.assign(labels.begin(), labels.end());
    ds.embeddings = matrix_of(io::read_f32(dir / "embeddings.f32"), c, de, "embeddings.f32");
    if (dm) {
        ds.manual_embeddings = matrix_of(io::read_f32(dir / "embeddings_manual.f32"), c, *dm, "embeddings_manual.f32");
    }
    ds.validate();
    return ds;
}

void save_dataset(const FeatureDataset& ds, const fs::path& dir) {
    ds.validate(/*allow_empty=*/true);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw RunError("cannot create " + dir.string() + ": " + ec.message());

    nlohmann::ordered_json meta;
    meta["n"] = ds.size();
    meta["dx"] = ds.feature_dim();
    meta["c"] = ds.num_classes();
    meta["de"] = ds.embedding_dim();
    meta["class_names"] = ds.class_names;
    if (ds.manual_embeddings) meta["dm"] = ds.manual_embeddings->cols();
    io::write_json(dir / "meta.json", meta);
    io::write_f32(dir / "features.f32", flat_of(ds.features));
    io::write_i32(dir / "labels.i32", std::vector<std::int32_t>(ds.labels.begin(), ds.labels.end()));
    io::write_f32(dir / "embeddings.f32", flat_of(ds.embeddings));
    if (ds.manual_embeddings) io::write_f32(dir / "embeddings_manual.f32", flat_of(*ds.manual_embeddings));
}

// ---------------------------------------------------------------------------
// Splits

void SplitSpec::validate(int num_classes) const {
    if (seen.empty() || unseen.empty()) throw ValidationError("split needs at least one seen and one unseen class");
    if (!(seen_test_fraction > 0.0 && seen_test_fraction < 1.0))
        throw ValidationError("seen_test_fraction must lie in (0, 1)");
    std::vector<int> all(seen);
    all.insert(all.end(), unseen.begin(), unseen.end());
    std::sort(all.begin(), all.end());
    if (static_cast<int>(all.size()) != num_classes || std::adjacent_find(all.begin(), all.end()) != all.end() ||
        all.front() != 0 || all.back() != num_classes - 1)
        throw ValidationError("split must partition classes 0.." + std::to_string(num_classes - 1) +
                              " into disjoint seen/unseen sets");
}

bool SplitSpec::is_seen(int label) const { return std::binary_search(seen.begin(), seen.end(), label); }

nlohmann::ordered_json split_to_json(const SplitSpec& split) {
    nlohmann::ordered_json j;
    j["seed"] = split.seed;
    j["seen"] = split.seen;
    j["unseen"] = split.unseen;
    j["seen_test_fraction"] = split.seen_test_fraction;
    return j;
}

SplitSpec split_from_json(const nlohmann::json& j) {
    SplitSpec s;
    try {
        s.seed = j.at("seed").get<std::uint64_t>();
        s.seen = j.at("seen").get<std::vector<int>>();
        s.unseen = j.at("unseen").get<std::vector<int>>();
        s.seen_test_fraction = j.at("seen_test_fraction").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed split: " + std::string(e.what()));
    }
    std::sort(s.seen.begin(), s.seen.end());
    std::sort(s.unseen.begin(), s.unseen.end());
    return s;
}

SplitSpec random_split(const FeatureDataset& ds, int num_seen, std::uint64_t seed) {
    const int c = ds.num_classes();
    if (num_seen < 1 || num_seen >= c)
        throw ValidationError("num_seen must be in [1, " + std::to_string(c - 1) + "], got " + std::to_string(num_seen));
    std::vector<int> classes(static_cast<std::size_t>(c));
    std::iota(classes.begin(), classes.end(), 0);
    Rng rng(derive_seed(seed, 1));
    rng.shuffle(classes);
    SplitSpec split;
    split.seed = seed;
    split.seen.assign(classes.begin(), classes.begin() + num_seen);
    split.unseen.assign(classes.begin() + num_seen, classes.end());
    std::sort(split.seen.begin(), split.seen.end());
    std::sort(split.unseen.begin(), split.unseen.end());
    return split;
}

GzslPartition partition_rows(const FeatureDataset& ds, const SplitSpec& split) {
    split.validate(ds.num_classes());
    GzslPartition part;
    Rng rng(derive_seed(split.seed, 2));
    for (int y : split.seen) {
        std::vector<int> rows = ds.rows_of_class(y);
        const int count = static_cast<int>(rows.size());
        if (count < 2)
            throw ValidationError("seen class " + std::to_string(y) + " has " + std::to_string(count) +
                                  " rows; at least 2 are needed to hold out a test subset");
        const int held_out = static_cast<int>(std::floor(split.seen_test_fraction * count + 0.5));
        if (held_out >= count)
            throw ValidationError("seen class " + std::to_string(y) + " would keep no training rows");
        rng.shuffle(rows);
        part.test_rows.insert(part.test_rows.end(), rows.begin(), rows.begin() + held_out);
        part.train_rows.insert(part.train_rows.end(), rows.begin() + held_out, rows.end());
    }
    for (int y : split.unseen) {
        const std::vector<int> rows = ds.rows_of_class(y);
        part.test_rows.insert(part.test_rows.end(), rows.begin(), rows.end());
    }
    std::sort(part.train_rows.begin(), part.train_rows.end());
    std::sort(part.test_rows.begin(), part.test_rows.end());
    return part;
}

GzslTestSet build_gzsl_test_set(const FeatureDataset& ds, const SplitSpec& split) {
    const GzslPartition part = partition_rows(ds, split);
    GzslTestSet test;
    test.features.resize(static_cast<Eigen::Index>(part.test_rows.size()), ds.features.cols());
    for (std::size_t i = 0; i < part.test_rows.size(); ++i) {
        const int row = part.test_rows[i];
        const int y = ds.labels[static_cast<std::size_t>(row)];
        test.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(row);
        test.labels.push_back(y);
        test.is_seen_class.push_back(split.is_seen(y));
    }
    test.source_rows = part.test_rows;
    return test;
}

FeatureDataset build_train_set(const FeatureDataset& ds, const SplitSpec& split) {
    return ds.subset(partition_rows(ds, split).train_rows);
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

namespace {

constexpr double kMeanScale = 2.0;

Matrix normal_matrix(Rng& rng, int rows, int cols, double scale) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    return m;
}

}  // namespace

void SyntheticBenchmarkConfig::validate() const {
    if (num_classes < 2) throw ValidationError("num_classes must be at least 2");
    if (dim_feature <= 0 || dim_embedding <= 0) throw ValidationError("dimensions must be positive");
    if (samples_per_class < 1) throw ValidationError("samples_per_class must be at least 1");
    if (!(cluster_spread >= 0.0) || !std::isfinite(cluster_spread))
        throw ValidationError("cluster_spread must be a finite nonnegative number");
    if (!(embedding_noise >= 0.0) || !std::isfinite(embedding_noise))
        throw ValidationError("embedding_noise must be a finite nonnegative number");
    if (embedding_rank < 1 || embedding_rank > dim_embedding)
        throw ValidationError("embedding_rank must be in [1, dim_embedding]");
}

Matrix benchmark_class_means(const SyntheticBenchmarkConfig& cfg, const Matrix& embeddings) {
    Rng map_rng(derive_seed(cfg.seed, 12));
    const Matrix map = normal_matrix(map_rng, cfg.dim_embedding, cfg.dim_feature,
                                     kMeanScale / std::sqrt(static_cast<double>(cfg.dim_embedding)));
    Rng noise_rng(derive_seed(cfg.seed, 13));
    const Matrix noise = normal_matrix(noise_rng, static_cast<int>(embeddings.rows()), cfg.dim_feature,
                                       cfg.embedding_noise * kMeanScale);
    return embeddings * map + noise;
}

FeatureDataset make_synthetic_benchmark(const SyntheticBenchmarkConfig& cfg) {
    cfg.validate();
    Rng factor_rng(derive_seed(cfg.seed, 10));
    const Matrix loading = normal_matrix(factor_rng, cfg.embedding_rank, cfg.dim_embedding,
                                         1.0 / std::sqrt(static_cast<double>(cfg.embedding_rank)));
    Rng class_rng(derive_seed(cfg.seed, 11));
    const Matrix latent = normal_matrix(class_rng, cfg.num_classes, cfg.embedding_rank, 1.0);
    const Matrix embeddings = latent * loading;
    const Matrix means = benchmark_class_means(cfg, embeddings);

    FeatureDataset ds;
    ds.embeddings = to_float(embeddings);
    const int n = cfg.num_classes * cfg.samples_per_class;
    ds.features.resize(n, cfg.dim_feature);
    ds.labels.reserve(static_cast<std::size_t>(n));
    Rng sample_rng(derive_seed(cfg.seed, 14));
    int row = 0;
    for (int y = 0; y < cfg.num_classes; ++y) {
        ds.class_names.push_back("class_" + std::to_string(y));
        for (int k = 0; k < cfg.samples_per_class; ++k, ++row) {
            for (int d = 0; d < cfg.dim_feature; ++d)
                ds.features(row, d) = static_cast<float>(means(y, d) + cfg.cluster_spread * sample_rng.normal());
            ds.labels.push_back(y);
        }
    }
    ds.validate();
    return ds;
}

}  // namespace gzsl
