#include "oracles.hpp"

#include "gzsl/binary_io.hpp"
#include "gzsl/dataset.hpp"
#include "gzsl/error.hpp"
#include "gzsl/wgan.hpp"

#include <doctest.h>

#include <fstream>
#include <set>

using namespace gzsl;

namespace {

FeatureDataset toy(int n, int dx, int c, int de, std::uint64_t seed = 0) {
    Rng rng(seed);
    FeatureDataset ds;
    ds.features = to_float(oracle::random_matrix(rng, n, dx));
    for (int i = 0; i < n; ++i) ds.labels.push_back(i % c);
    ds.embeddings = to_float(oracle::random_matrix(rng, c, de));
    for (int y = 0; y < c; ++y) ds.class_names.push_back("c" + std::to_string(y));
    return ds;
}

bool same(const FeatureDataset& a, const FeatureDataset& b) {
    return a.features == b.features && a.labels == b.labels && a.embeddings == b.embeddings &&
           a.class_names == b.class_names && a.manual_embeddings.has_value() == b.manual_embeddings.has_value() &&
           (!a.manual_embeddings || *a.manual_embeddings == *b.manual_embeddings);
}

// Linear-regression R^2 of class means on [embedding, 1].
double mean_map_r2(const FeatureDataset& ds) {
    const Matrix x = to_double(ds.features);
    Matrix means = Matrix::Zero(ds.num_classes(), ds.feature_dim());
    const auto counts = ds.class_counts();
    for (int i = 0; i < ds.size(); ++i) means.row(ds.labels[static_cast<std::size_t>(i)]) += x.row(i);
    for (int y = 0; y < ds.num_classes(); ++y) means.row(y) /= counts[static_cast<std::size_t>(y)];
    Matrix e(ds.num_classes(), ds.embedding_dim() + 1);
    e << to_double(ds.embeddings), Matrix::Ones(ds.num_classes(), 1);
    const Matrix w = e.colPivHouseholderQr().solve(means);
    const double ss_res = (e * w - means).squaredNorm();
    const double ss_tot = (means.rowwise() - means.colwise().mean()).squaredNorm();
    return 1.0 - ss_res / ss_tot;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("save/load round-trip, including N=1, empty classes and a manual table") {
    const auto dir = oracle::temp_dir("ds_roundtrip");
    FeatureDataset ds = toy(10, 8, 3, 4);
    save_dataset(ds, dir / "a");
    const FeatureDataset back = load_dataset(dir / "a");
    CHECK(back.size() == 10);
    CHECK(back.feature_dim() == 8);
    CHECK(back.num_classes() == 3);
    CHECK(same(ds, back));

    FeatureDataset one = toy(1, 4, 2, 3);
    save_dataset(one, dir / "b");
    CHECK(same(one, load_dataset(dir / "b")));

    FeatureDataset gap = toy(6, 4, 4, 3);
    for (int& y : gap.labels) y = (y == 2) ? 3 : y;  // class 2 empty
    save_dataset(gap, dir / "c");
    CHECK(load_dataset(dir / "c").class_counts() == gap.class_counts());

    FeatureDataset manual = toy(6, 4, 3, 3);
    Rng rng(4);
    manual.manual_embeddings = to_float(oracle::random_matrix(rng, 3, 5));
    save_dataset(manual, dir / "d");
    CHECK(same(manual, load_dataset(dir / "d")));
    CHECK(io::read_json(dir / "d" / "meta.json").at("dm") == 5);
}

TEST_CASE("meta.json carries the documented keys") {
    const auto dir = oracle::temp_dir("ds_meta");
    save_dataset(toy(10, 8, 3, 4), dir);
    const auto meta = io::read_json(dir / "meta.json");
    CHECK(meta.at("n") == 10);
    CHECK(meta.at("dx") == 8);
    CHECK(meta.at("c") == 3);
    CHECK(meta.at("de") == 4);
    CHECK(meta.at("class_names").size() == 3);
    CHECK(std::filesystem::file_size(dir / "features.f32") == 10 * 8 * 4);
    CHECK(std::filesystem::file_size(dir / "labels.i32") == 10 * 4);
}

TEST_CASE("load errors: label out of range, dimension mismatch, missing file") {
    const auto dir = oracle::temp_dir("ds_errors");
    save_dataset(toy(10, 8, 3, 4), dir / "bad_label");
    io::write_i32(dir / "bad_label" / "labels.i32", std::vector<std::int32_t>{0, 1, 2, 3, 0, 1, 2, 0, 1, 2});
    CHECK_THROWS_WITH_AS(load_dataset(dir / "bad_label"), doctest::Contains("label out of range"), ValidationError);

    save_dataset(toy(10, 8, 3, 4), dir / "short");
    io::write_f32(dir / "short" / "features.f32", std::vector<float>(79, 1.0f));
    CHECK_THROWS_WITH_AS(load_dataset(dir / "short"), doctest::Contains("dimension mismatch"), ValidationError);

    save_dataset(toy(10, 8, 3, 4), dir / "ragged");
    {
        std::ofstream f(dir / "ragged" / "features.f32", std::ios::binary | std::ios::app);
        f.put('\0');
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir / "ragged"), doctest::Contains("dimension mismatch"), ValidationError);

    save_dataset(toy(10, 8, 3, 4), dir / "missing");
    std::filesystem::remove(dir / "missing" / "embeddings.f32");
    CHECK_THROWS_WITH_AS(load_dataset(dir / "missing"), doctest::Contains("missing file"), ValidationError);
}

TEST_CASE("random_split sizes, determinism and range") {
    const FeatureDataset olympic = toy(32, 4, 16, 3);
    const SplitSpec s = random_split(olympic, 8, 3);
    CHECK(s.seen.size() == 8);
    CHECK(s.unseen.size() == 8);
    const FeatureDataset ucf = toy(202, 4, 101, 3);
    const SplitSpec u = random_split(ucf, 51, 0);
    CHECK(u.seen.size() == 51);
    CHECK(u.unseen.size() == 50);
    const SplitSpec again = random_split(olympic, 8, 3);
    CHECK(again.seen == s.seen);
    CHECK(again.unseen == s.unseen);
    CHECK(random_split(olympic, 8, 4).seen != s.seen);
    CHECK_THROWS_AS(random_split(olympic, 0, 0), ValidationError);
    CHECK_THROWS_AS(random_split(olympic, 16, 0), ValidationError);
}

TEST_CASE("split json round-trip") {
    const SplitSpec s = random_split(toy(20, 2, 10, 2), 4, 7);
    const SplitSpec back = split_from_json(nlohmann::json::parse(split_to_json(s).dump()));
    CHECK(back.seen == s.seen);
    CHECK(back.unseen == s.unseen);
    CHECK(back.seed == s.seed);
}

TEST_CASE("gzsl test set: 2 of 10 rows per seen class, every unseen row") {
    FeatureDataset ds = toy(40, 3, 4, 2);  // 10 rows per class
    // Class 3 gets 7 rows.
    ds = ds.subset([&] {
        std::vector<int> rows;
        int c3 = 0;
        for (int i = 0; i < ds.size(); ++i)
            if (ds.labels[static_cast<std::size_t>(i)] != 3 || c3++ < 7) rows.push_back(i);
        return rows;
    }());
    SplitSpec split;
    split.seen = {0, 1};
    split.unseen = {2, 3};
    const GzslTestSet test = build_gzsl_test_set(ds, split);
    std::vector<int> per(4, 0);
    for (int y : test.labels) ++per[static_cast<std::size_t>(y)];
    CHECK(per == std::vector<int>{2, 2, 10, 7});
    for (std::size_t i = 0; i < test.labels.size(); ++i) CHECK(test.is_seen_class[i] == split.is_seen(test.labels[i]));
}

TEST_CASE("holdout rounding: half rounds up, one row per seen class is an error") {
    FeatureDataset ds = toy(15, 2, 3, 2);  // 5 rows per class
    SplitSpec split;
    split.seen = {0, 1};
    split.unseen = {2};
    split.seen_test_fraction = 0.1;  // 0.5 rows -> 1
    const GzslPartition p = partition_rows(ds, split);
    int seen_test = 0;
    for (int r : p.test_rows) seen_test += split.is_seen(ds.labels[static_cast<std::size_t>(r)]);
    CHECK(seen_test == 2);

    FeatureDataset lone = toy(5, 2, 2, 2);
    lone.labels = {0, 1, 1, 1, 1};
    SplitSpec s2;
    s2.seen = {0};
    s2.unseen = {1};
    CHECK_THROWS_AS(build_gzsl_test_set(lone, s2), ValidationError);
}

TEST_CASE("split properties: disjoint, covering, deterministic") {
    const FeatureDataset ds = make_synthetic_benchmark({});
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SplitSpec split = random_split(ds, 10, seed);
        const GzslPartition p = partition_rows(ds, split);
        const GzslPartition q = partition_rows(ds, split);
        CHECK(p.train_rows == q.train_rows);
        CHECK(p.test_rows == q.test_rows);
        std::set<int> train(p.train_rows.begin(), p.train_rows.end());
        for (int r : p.test_rows) CHECK(train.count(r) == 0);
        int unseen_rows = 0;
        for (int y : ds.labels) unseen_rows += !split.is_seen(y);
        int unseen_in_test = 0;
        for (int r : p.test_rows) unseen_in_test += !split.is_seen(ds.labels[static_cast<std::size_t>(r)]);
        CHECK(unseen_in_test == unseen_rows);
        CHECK(train.size() + p.test_rows.size() == static_cast<std::size_t>(ds.size()));
        for (int r : p.train_rows) CHECK(split.is_seen(ds.labels[static_cast<std::size_t>(r)]));
    }
}

TEST_CASE("synthetic benchmark: degenerate spread, identical embeddings, determinism") {
    SyntheticBenchmarkConfig cfg;
    cfg.cluster_spread = 0.0;
    const FeatureDataset ds = make_synthetic_benchmark(cfg);
    for (int y = 0; y < ds.num_classes(); ++y) {
        const std::vector<int> rows = ds.rows_of_class(y);
        for (int r : rows) CHECK(ds.features.row(r) == ds.features.row(rows.front()));
    }

    SyntheticBenchmarkConfig noiseless;
    noiseless.embedding_noise = 0.0;
    Rng erng(3);
    Matrix e = oracle::random_matrix(erng, 2, noiseless.dim_embedding);
    e.row(1) = e.row(0);
    const Matrix mu = benchmark_class_means(noiseless, e);
    CHECK(mu.row(0) == mu.row(1));

    SyntheticBenchmarkConfig a;
    a.seed = 12;
    CHECK(make_synthetic_benchmark(a).features == make_synthetic_benchmark(a).features);
    a.num_classes = 1;
    CHECK_THROWS_AS(make_synthetic_benchmark(a), ValidationError);
}

TEST_CASE("synthetic benchmark oracle: nearest class mean > 95%, mean-map R^2 > 0.5") {
    const FeatureDataset ds = make_synthetic_benchmark({});
    CHECK(ds.num_classes() == 20);
    CHECK(ds.feature_dim() == 64);
    CHECK(ds.embedding_dim() == 16);
    CHECK(ds.size() == 2000);
    const Matrix x = to_double(ds.features);
    Matrix means = Matrix::Zero(20, 64);
    for (int i = 0; i < ds.size(); ++i) means.row(ds.labels[static_cast<std::size_t>(i)]) += x.row(i);
    means /= 100.0;
    int correct = 0;
    for (int i = 0; i < ds.size(); ++i) {
        Eigen::Index best = 0;
        (means.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
        correct += static_cast<int>(best) == ds.labels[static_cast<std::size_t>(i)];
    }
    MESSAGE("nearest-class-mean accuracy " << 100.0 * correct / ds.size());
    CHECK(correct > 0.95 * ds.size());
    const double r2 = mean_map_r2(ds);
    MESSAGE("mean-map R^2 " << r2);
    CHECK(r2 > 0.5);
}

TEST_CASE("transfer: output width 115, zero epochs gives the init mapping, identity target") {
    // Source with word vectors (dw=6) and manual attributes (dm=115).
    SyntheticBenchmarkConfig cfg;
    cfg.num_classes = 12;
    cfg.dim_feature = 16;
    cfg.dim_embedding = 6;
    cfg.samples_per_class = 30;
    FeatureDataset source = make_synthetic_benchmark(cfg);
    Rng rng(5);
    const Matrix proj = oracle::random_matrix(rng, 6, 115, 0.3);
    source.manual_embeddings = to_float(to_double(source.embeddings) * proj);

    // "Generated" rows: here simply the source rows of classes 0 and 1, relabelled 0/1
    // against a two-row target word-vector table copied from those classes.
    std::vector<int> rows;
    for (int y : {0, 1})
        for (int r : source.rows_of_class(y)) rows.push_back(r);
    FeatureDataset synth = source.subset(rows);
    synth.embeddings = source.embeddings.topRows(2);
    synth.class_names = {"t0", "t1"};
    synth.provenance = Provenance::synthesized;
    const Matrix target_wv = to_double(source.embeddings.topRows(2));

    TransferConfig tc;
    tc.epochs = 300;
    tc.seed = 1;
    const TransferResult res = transfer_attributes(source, target_wv, synth, tc);
    CHECK(res.attributes.rows() == 2);
    CHECK(res.attributes.cols() == 115);
    const Matrix truth = to_double(source.manual_embeddings->topRows(2));
    const double rel = (res.attributes - truth).norm() / truth.norm();
    MESSAGE("identity-target relative error " << rel << ", validation mse " << res.validation_mse);
    CHECK(rel < 0.25);

    TransferConfig zero = tc;
    zero.epochs = 0;
    const TransferResult init = transfer_attributes(source, target_wv, synth, zero);
    CHECK(init.network.spec.layer_sizes == std::vector<int>{16 + 6, tc.hidden, 115});
    Matrix input(synth.size(), 22);
    input << to_double(synth.features), Matrix::Zero(synth.size(), 6);
    for (int i = 0; i < synth.size(); ++i) input.row(i).tail(6) = target_wv.row(synth.labels[static_cast<std::size_t>(i)]);
    const Matrix out = forward(init.network, input);
    CHECK((out.topRows(30).colwise().mean() - init.attributes.row(0)).cwiseAbs().maxCoeff() < 1e-9);

    CHECK_THROWS_WITH_AS(transfer_attributes(source, Matrix::Zero(2, 5), synth, tc),
                         doctest::Contains("dimension mismatch"), ValidationError);
    FeatureDataset real = synth;
    real.provenance = Provenance::real;
    CHECK_THROWS_AS(transfer_attributes(source, target_wv, real, tc), ValidationError);
}

}  // TEST_SUITE
