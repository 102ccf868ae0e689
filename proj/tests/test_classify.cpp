#include "oracles.hpp"

#include "gzsl/classify.hpp"
#include "gzsl/error.hpp"

#include <doctest.h>

#include <set>

using namespace gzsl;

namespace {

struct Toy {
    Matrix x;
    std::vector<int> y;
};

// Well separated clusters, class c centred at 4 * (unit vector c mod dim).
Toy clusters(const std::vector<int>& classes, int per_class, int dim, std::uint64_t seed) {
    Rng rng(seed);
    Toy t;
    t.x.resize(static_cast<Eigen::Index>(classes.size()) * per_class, dim);
    int r = 0;
    for (int c : classes)
        for (int i = 0; i < per_class; ++i, ++r) {
            for (int k = 0; k < dim; ++k) t.x(r, k) = (k == c % dim ? 4.0 : 0.0) + 0.3 * rng.normal();
            t.y.push_back(c);
        }
    return t;
}

FeatureDataset as_dataset(const Toy& t, int num_classes, Provenance prov) {
    FeatureDataset ds;
    ds.features = t.x.cast<float>();
    ds.labels = t.y;
    ds.embeddings = FeatureMatrix::Zero(num_classes, 2);
    ds.provenance = prov;
    return ds;
}

}  // namespace

TEST_SUITE("classify") {

TEST_CASE("head fits separable clusters") {
    const Toy train = clusters({3, 7, 11}, 40, 6, 1), test = clusters({3, 7, 11}, 30, 6, 2);
    const ClassifierHead head = train_head(train.x, train.y, {3, 7, 11}, HeadConfig{});
    const HeadPrediction p = predict_head(head, test.x);
    CHECK(p.classes == test.y);
    for (double c : p.confidence) {
        CHECK(c > 1.0 / 3.0);
        CHECK(c <= 1.0);
    }
}

TEST_CASE("head: single class, determinism, validation") {
    const Toy t = clusters({5}, 10, 4, 3);
    const ClassifierHead one = train_head(t.x, t.y, {5}, HeadConfig{});
    const HeadPrediction p = predict_head(one, t.x);
    for (std::size_t i = 0; i < p.classes.size(); ++i) {
        CHECK(p.classes[i] == 5);
        CHECK(p.confidence[i] == doctest::Approx(1.0));
    }

    const Toy two = clusters({0, 1}, 20, 4, 4);
    HeadConfig cfg;
    cfg.seed = 17;
    CHECK(flatten(train_head(two.x, two.y, {0, 1}, cfg).network) == flatten(train_head(two.x, two.y, {0, 1}, cfg).network));
    CHECK_THROWS_AS(train_head(two.x, two.y, {0}, cfg), ValidationError);
    CHECK_THROWS_AS(train_head(two.x, two.y, {0, 1, 1}, cfg), ValidationError);
    CHECK_THROWS_AS(train_head(two.x, two.y, {}, cfg), ValidationError);
}

TEST_CASE("argmax ties go to the lowest class id") {
    ClassifierHead head;
    head.label_map = {8, 2, 5};
    head.network = init_mlp({{2, 3}, Activation::relu, Activation::softmax}, 1);
    head.network.layers[0].weight.setZero();
    head.network.layers[0].bias.setZero();
    Matrix x(1, 2);
    x << 1.0, 1.0;
    CHECK(predict_head(head, x).classes == std::vector<int>{2});
    head.network.layers[0].bias << 1.0, 0.0, 1.0;
    CHECK(predict_head(head, x).classes == std::vector<int>{5});
}

TEST_CASE("routing is exclusive and matches the chosen head") {
    const Toy seen = clusters({0, 1}, 30, 6, 5), unseen = clusters({2, 3}, 30, 6, 6);
    GzslPredictor pred;
    pred.seen_head = train_head(seen.x, seen.y, {0, 1}, HeadConfig{});
    pred.unseen_head = train_head(unseen.x, unseen.y, {2, 3}, HeadConfig{});
    pred.od.network = init_mlp({{6, 8, 2}, Activation::relu, Activation::softmax}, 2);
    pred.od.seen_classes = {0, 1};
    pred.od.threshold = 0.5;
    pred.validate();

    Matrix all(120, 6);
    all << seen.x, unseen.x;
    const auto preds = predict_gzsl_rows(pred, all);
    const auto s = predict_head(pred.seen_head, all), u = predict_head(pred.unseen_head, all);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool in_seen = preds[i].predicted_class <= 1;
        CHECK(in_seen == preds[i].routed_seen);
        CHECK(preds[i].predicted_class == (preds[i].routed_seen ? s.classes[i] : u.classes[i]));
        CHECK(preds[i].routed_seen == (preds[i].entropy < pred.od.threshold));
    }
    const GzslPrediction single = predict_gzsl(pred, all.row(7));
    CHECK(single.predicted_class == preds[7].predicted_class);

    SUBCASE("threshold 0 is zero-shot classification") {
        pred.od.threshold = 0.0;
        for (int i = 0; i < 120; ++i) {
            const GzslPrediction g = predict_gzsl(pred, all.row(i));
            CHECK_FALSE(g.routed_seen);
            CHECK(g.predicted_class == predict_zsl(pred.unseen_head, all.row(i)));
        }
    }
    SUBCASE("threshold above log S is the seen head") {
        pred.od.threshold = std::log(2.0) + 1e-9;
        const auto forced = predict_gzsl_rows(pred, all);
        for (std::size_t i = 0; i < forced.size(); ++i) {
            CHECK(forced[i].routed_seen);
            CHECK(forced[i].predicted_class == s.classes[i]);
        }
    }
    SUBCASE("validation") {
        pred.unseen_head.label_map = {1, 3};
        CHECK_THROWS_AS(pred.validate(), ValidationError);
    }
    CHECK_THROWS_AS(predict_routed({true}, pred.seen_head, pred.unseen_head, all), ValidationError);
}

TEST_CASE("baseline head covers every class") {
    const Toy seen = clusters({0, 2}, 30, 5, 7), unseen = clusters({1, 3, 4}, 30, 5, 8);
    const ClassifierHead h = train_baseline_gzsl(as_dataset(seen, 5, Provenance::real),
                                                 as_dataset(unseen, 5, Provenance::synthesized), {0, 2}, {1, 3, 4},
                                                 HeadConfig{300});
    CHECK(h.label_map == std::vector<int>{0, 1, 2, 3, 4});
    const Toy test = clusters({0, 1, 2, 3, 4}, 10, 5, 9);
    const HeadPrediction p = predict_head(h, test.x);
    CHECK(std::set<int>(p.classes.begin(), p.classes.end()).size() == 5);
    CHECK_THROWS_AS(train_baseline_gzsl(as_dataset(seen, 5, Provenance::real), as_dataset(unseen, 5, Provenance::real),
                                        {0, 2}, {1, 3, 4}, HeadConfig{}),
                    ValidationError);
}

}  // TEST_SUITE
