#include "oracles.hpp"

#include "gzsl/error.hpp"
#include "gzsl/models.hpp"
#include "gzsl/random.hpp"

#include <doctest.h>

#include <set>

using namespace gzsl;

TEST_SUITE("random") {

TEST_CASE("derived seeds differ per stream and repeat per input") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 64; ++s) seen.insert(derive_seed(7, s));
    CHECK(seen.size() == 64);
    CHECK(derive_seed(3, 4) == derive_seed(3, 4));
    CHECK(derive_seed(3, 4) != derive_seed(4, 3));
}

TEST_CASE("rng streams are reproducible") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(42), d(42);
    for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("uniform, below and normal stay in range with sane moments") {
    Rng rng(1);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK_UNARY(u >= 0.0);
        CHECK_UNARY(u < 1.0);
        CHECK(rng.below(7) < 7u);
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("shuffle is a permutation") {
    Rng rng(5);
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

}  // TEST_SUITE

TEST_SUITE("models") {

TEST_CASE("parameter count of [4, 8, 2] is 58") {
    const MlpSpec spec{{4, 8, 2}};
    CHECK(spec.parameter_count() == 58);
    CHECK(flatten(init_mlp(spec, 0)).size() == 58);
}

TEST_CASE("init is deterministic, bounded and zero-biased") {
    const MlpSpec spec{{5, 7, 3}, Activation::leaky_relu};
    const Mlp a = init_mlp(spec, 9), b = init_mlp(spec, 9), c = init_mlp(spec, 10);
    CHECK(flatten(a) == flatten(b));
    CHECK(flatten(a) != flatten(c));
    for (const Layer& l : a.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
        CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
        CHECK(l.bias.isZero());
    }
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(MlpSpec({{4, 0, 2}}).validate(), ValidationError);
    CHECK_THROWS_AS(MlpSpec({{4}}).validate(), ValidationError);
    CHECK_THROWS_AS(init_mlp(MlpSpec{{3, 0}}, 0), ValidationError);
    CHECK_NOTHROW(MlpSpec({{4, 2}}).validate());
}

TEST_CASE("forward: zero weights, softmax rows, hand-computed linear layer") {
    Mlp zero = init_mlp({{3, 4, 2}}, 1);
    for (Layer& l : zero.layers) l.weight.setZero();
    Rng rng(2);
    CHECK(forward(zero, oracle::random_matrix(rng, 5, 3)).isZero());

    const Mlp soft = init_mlp({{3, 6, 4}, Activation::relu, Activation::softmax}, 3);
    const Matrix p = forward(soft, oracle::random_matrix(rng, 10, 3, 5.0));
    for (int r = 0; r < p.rows(); ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));

    Mlp lin = init_mlp({{2, 2}}, 0);
    lin.layers[0].weight << 1, 2, 3, 4;
    lin.layers[0].bias << 0.5, -1;
    Matrix x(1, 2);
    x << 10, 20;
    const Matrix y = forward(lin, x);
    CHECK(y(0, 0) == 50.5);
    CHECK(y(0, 1) == 109.0);

    CHECK_THROWS_AS(forward(lin, Matrix::Zero(1, 3)), ValidationError);
}

TEST_CASE("backward matches finite differences") {
    for (Activation hidden : {Activation::relu, Activation::leaky_relu}) {
        for (Activation out : {Activation::none, Activation::softmax}) {
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                const Mlp net = init_mlp({{4, 6, 5, 3}, hidden, out}, seed);
                Rng rng(100 + seed);
                const Matrix x = oracle::random_matrix(rng, 6, 4);
                const Matrix w = oracle::random_matrix(rng, 6, 3);
                auto loss = [&](const Mlp& n) { return forward(n, x).cwiseProduct(w).sum(); };
                const MlpGrads g = backward(net, forward_trace(net, x), w);
                CHECK(oracle::rel_err(flatten(g), oracle::numeric_param_grad(net, loss)) < 1e-6);
                const Matrix gx = oracle::numeric_grad(x, [&](const Matrix& xx) {
                    return forward(net, xx).cwiseProduct(w).sum();
                });
                CHECK(oracle::rel_err(oracle::to_vec(g.input), oracle::to_vec(gx)) < 1e-6);
            }
        }
    }
}

TEST_CASE("adam: first step moves every parameter by about lr, zero gradient leaves it") {
    Mlp net = init_mlp({{3, 4, 2}}, 0);
    const std::vector<double> before = flatten(net);
    MlpGrads g = zero_grads(net);
    for (Layer& l : g.layers) {
        l.weight.setConstant(0.37);
        l.bias.setConstant(-2.0);
    }
    AdamState st = adam_init(net);
    const AdamConfig cfg{1e-3, 0.9, 0.999, 1e-8};
    adam_step(net, g, st, cfg);
    const std::vector<double> after = flatten(net);
    const std::vector<double> grad = flatten(g);
    for (std::size_t i = 0; i < before.size(); ++i) {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        const double expected = -cfg.lr * grad[i] / (std::abs(grad[i]) + cfg.eps);
        CHECK(after[i] - before[i] == doctest::Approx(expected).epsilon(1e-9));
        CHECK(std::abs(after[i] - before[i]) == doctest::Approx(cfg.lr).epsilon(1e-4));
    }

    Mlp still = init_mlp({{3, 4, 2}}, 0);
    AdamState st2 = adam_init(still);
    adam_step(still, zero_grads(still), st2, cfg);
    CHECK(flatten(still) == before);
}

TEST_CASE("adam trajectories are deterministic") {
    auto run = [] {
        Mlp net = init_mlp({{3, 5, 2}}, 4);
        AdamState st = adam_init(net);
        Rng rng(8);
        for (int step = 0; step < 10; ++step) {
            const Matrix x = oracle::random_matrix(rng, 4, 3);
            const ForwardTrace t = forward_trace(net, x);
            adam_step(net, backward(net, t, t.output), st, AdamConfig{});
        }
        return flatten(net);
    };
    CHECK(run() == run());
}

TEST_CASE("flatten and unflatten round-trip") {
    Mlp a = init_mlp({{3, 5, 2}}, 1);
    const Mlp b = init_mlp({{3, 5, 2}}, 2);
    unflatten(a, flatten(b));
    CHECK(flatten(a) == flatten(b));
    CHECK_THROWS_AS(unflatten(a, std::vector<double>(3)), ValidationError);
}

TEST_CASE("checkpoint round-trip at float32 precision") {
    const auto dir = oracle::temp_dir("mlp");
    const Mlp net = init_mlp({{6, 4, 3}, Activation::leaky_relu, Activation::softmax}, 11);
    save_mlp(net, dir);
    CHECK(std::filesystem::file_size(dir / "params.f32") == 4 * net.spec.parameter_count());
    const Mlp back = load_mlp(dir);
    CHECK(back.spec.layer_sizes == net.spec.layer_sizes);
    CHECK(back.spec.hidden_activation == Activation::leaky_relu);
    CHECK(back.spec.output_activation == Activation::softmax);
    const std::vector<double> a = flatten(net), b = flatten(back);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == static_cast<double>(static_cast<float>(a[i])));
}

TEST_CASE("argmax ties go to the lowest column; softmax is shift invariant") {
    Matrix m(2, 3);
    m << 1, 3, 3, 2, 2, 2;
    CHECK(argmax_rows(m) == std::vector<int>{1, 0});
    Matrix logits(1, 3);
    logits << 1000, 1001, 1002;
    const Matrix p = softmax_rows(logits);
    Matrix small(1, 3);
    small << 0, 1, 2;
    CHECK((p - softmax_rows(small)).cwiseAbs().maxCoeff() < 1e-12);
}

}  // TEST_SUITE
