#include "gzsl/wgan.hpp"

#include "gzsl/binary_io.hpp"
#include "gzsl/error.hpp"
#include "gzsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace gzsl {

namespace {

constexpr double kNormFloor = 1e-12;

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void TrainConfig::validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0) throw ValidationError("loss coefficients must be nonnegative");
    if (!(lr > 0)) throw ValidationError("learning rate must be positive");
    if (batch_size < 1) throw ValidationError("batch_size must be positive");
    if (epochs < 0) throw ValidationError("epochs must be nonnegative");
    if (critic_steps_per_gen_step < 1) throw ValidationError("critic_steps_per_gen_step must be positive");
    if (d_z < 1) throw ValidationError("noise dimension d_z must be positive");
    if (hidden < 1) throw ValidationError("hidden width must be positive");
}

GanModel init_gan(int feature_dim, int embedding_dim, const TrainConfig& cfg) {
    cfg.validate();
    GanModel gan;
    gan.d_z = cfg.d_z;
    gan.generator = init_mlp({{cfg.d_z + embedding_dim, cfg.hidden, cfg.hidden, feature_dim}, Activation::relu,
                              Activation::none},
                             derive_seed(cfg.seed, 20));
    gan.critic = init_mlp({{feature_dim + embedding_dim, cfg.hidden, 1}, Activation::leaky_relu, Activation::none},
                          derive_seed(cfg.seed, 21));
    gan.decoder = init_mlp({{feature_dim, cfg.hidden, cfg.hidden, embedding_dim}, Activation::relu, Activation::none},
                           derive_seed(cfg.seed, 22));
    return gan;
}

void save_gan(const GanModel& gan, const std::filesystem::path& dir) {
    save_mlp(gan.generator, dir / "generator");
    save_mlp(gan.critic, dir / "critic");
    save_mlp(gan.decoder, dir / "decoder");
    nlohmann::ordered_json j;
    j["d_z"] = gan.d_z;
    io::write_json(dir / "gan.json", j);
}

GanModel load_gan(const std::filesystem::path& dir) {
    GanModel gan;
    gan.generator = load_mlp(dir / "generator");
    gan.critic = load_mlp(dir / "critic");
    gan.decoder = load_mlp(dir / "decoder");
    gan.d_z = io::read_json(dir / "gan.json").at("d_z").get<int>();
    return gan;
}

void Batch::validate(const GanModel& gan) const {
    const auto b = static_cast<Eigen::Index>(labels.size());
    if (b == 0) throw ValidationError("empty batch");
    if (real.rows() != b || embeddings.rows() != b || noise.rows() != b)
        throw ValidationError("batch row counts disagree");
    if (real.cols() != gan.feature_dim() || embeddings.cols() != gan.embedding_dim() || noise.cols() != gan.d_z)
        throw ValidationError("batch widths do not match the model");
}

PairSet pair_minibatch(const std::vector<int>& labels_real, const std::vector<int>& labels_synth, std::uint64_t seed) {
    PairSet pairs;
    Rng rng(seed);
    std::vector<int> same, other;
    for (std::size_t j = 0; j < labels_synth.size(); ++j) {
        same.clear();
        other.clear();
        for (std::size_t i = 0; i < labels_real.size(); ++i)
            (labels_real[i] == labels_synth[j] ? same : other).push_back(static_cast<int>(i));
        const int sj = static_cast<int>(j);
        if (!same.empty()) pairs.matched.emplace_back(same[rng.below(same.size())], sj);
        if (!other.empty()) pairs.unmatched.emplace_back(other[rng.below(other.size())], sj);
    }
    return pairs;
}

Matrix concat_columns(const Matrix& left, const Matrix& right) {
    if (left.rows() != right.rows()) throw ValidationError("concat_columns: row counts differ");
    Matrix out(left.rows(), left.cols() + right.cols());
    out << left, right;
    return out;
}

Matrix generate(const GanModel& gan, const Matrix& noise, const Matrix& embeddings) {
    return forward(gan.generator, concat_columns(noise, embeddings));
}

Matrix critic_input_gradient(const Mlp& critic, const Matrix& features, const Matrix& embeddings) {
    const ForwardTrace trace = forward_trace(critic, concat_columns(features, embeddings));
    const MlpGrads g = backward(critic, trace, Matrix::Ones(features.rows(), 1));
    return g.input.leftCols(features.cols());
}

namespace {

struct PenaltyTerms {
    double penalty = 0.0;
    MlpGrads grads;  // d penalty / d critic params
};

// Penalty mean_i (||grad_x D(x^_i, e_i)|| - 1)^2 for a one-hidden-layer
// critic D(v) = w2 . act(W1 v + b1) + b2. With a piecewise-linear act the
// input gradient is g_i = (s_i * w2) W1x, s_i = act'(a_i), which is constant
// in b1, b2 and the embedding columns almost everywhere.
PenaltyTerms gradient_penalty(const Mlp& critic, const Matrix& mixed, const Matrix& embeddings) {
    if (critic.layers.size() != 2) throw ValidationError("gradient penalty expects a critic with one hidden layer");
    const Eigen::Index b = mixed.rows();
    const Eigen::Index dx = mixed.cols();
    const Layer& hidden = critic.layers[0];
    const Layer& head = critic.layers[1];

    Matrix pre = concat_columns(mixed, embeddings) * hidden.weight.transpose();
    pre.rowwise() += hidden.bias;
    const double neg = critic.spec.hidden_activation == Activation::relu ? 0.0 : kLeakySlope;
    const Matrix slope = pre.unaryExpr([neg](double v) { return v > 0.0 ? 1.0 : neg; });
    const Matrix gated = slope.array().rowwise() * head.weight.row(0).array();  // s_i * w2
    const auto w1x = hidden.weight.leftCols(dx);
    const Matrix g = gated * w1x;  // B x dx

    PenaltyTerms out;
    out.grads = zero_grads(critic);
    Matrix q(b, dx);  // d penalty / d g
    for (Eigen::Index i = 0; i < b; ++i) {
        const double norm = g.row(i).norm();
        out.penalty += (norm - 1.0) * (norm - 1.0);
        if (norm > kNormFloor)
            q.row(i) = (2.0 * (norm - 1.0) / (norm * static_cast<double>(b))) * g.row(i);
        else
            q.row(i).setZero();
    }
    out.penalty /= static_cast<double>(b);

    out.grads.layers[0].weight.leftCols(dx) = gated.transpose() * q;
    const Matrix back = q * w1x.transpose();  // B x H
    out.grads.layers[1].weight.row(0) = slope.cwiseProduct(back).colwise().sum();
    return out;
}

}  // namespace

CriticObjective critic_objective(const GanModel& gan, const Batch& batch, double alpha, const Vector& mix) {
    batch.validate(gan);
    const auto b = static_cast<Eigen::Index>(batch.labels.size());
    if (mix.size() != b) throw ValidationError("mix weights must have one entry per batch row");
    const Matrix fake = generate(gan, batch.noise, batch.embeddings);

    const ForwardTrace real_trace = forward_trace(gan.critic, concat_columns(batch.real, batch.embeddings));
    const ForwardTrace fake_trace = forward_trace(gan.critic, concat_columns(fake, batch.embeddings));

    Matrix mixed(b, fake.cols());
    for (Eigen::Index i = 0; i < b; ++i) mixed.row(i) = mix(i) * batch.real.row(i) + (1.0 - mix(i)) * fake.row(i);
    PenaltyTerms gp = gradient_penalty(gan.critic, mixed, batch.embeddings);

    CriticObjective obj;
    obj.loss.real_score = real_trace.output.mean();
    obj.loss.fake_score = fake_trace.output.mean();
    obj.loss.penalty = gp.penalty;
    obj.loss.value = obj.loss.real_score - obj.loss.fake_score - alpha * gp.penalty;

    const Matrix unit = Matrix::Constant(b, 1, 1.0 / static_cast<double>(b));
    obj.grads = backward(gan.critic, real_trace, unit);
    accumulate(obj.grads, backward(gan.critic, fake_trace, unit), -1.0);
    accumulate(obj.grads, gp.grads, -alpha);
    return obj;
}

CriticLoss critic_loss(const GanModel& gan, const Batch& batch, double alpha, const Vector& mix) {
    return critic_objective(gan, batch, alpha, mix).loss;
}

double generator_wgan_term(const GanModel& gan, const Batch& batch) {
    batch.validate(gan);
    const Matrix fake = generate(gan, batch.noise, batch.embeddings);
    return -forward(gan.critic, concat_columns(fake, batch.embeddings)).mean();
}

double cycle_loss(const GanModel& gan, const Batch& batch, bool squared) {
    batch.validate(gan);
    const Matrix recon = forward(gan.decoder, generate(gan, batch.noise, batch.embeddings));
    const Matrix diff = recon - batch.embeddings;
    return squared ? diff.rowwise().squaredNorm().mean() : diff.rowwise().norm().mean();
}

namespace {

double cosine(const RowVector& a, const RowVector& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw ValidationError("cosine undefined for a zero-norm vector");
    return a.dot(b) / (na * nb);
}

// d cos(a, b) / d b
RowVector cosine_grad_b(const RowVector& a, const RowVector& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw ValidationError("cosine undefined for a zero-norm vector");
    const double c = a.dot(b) / (na * nb);
    return a / (na * nb) - c * b / (nb * nb);
}

}  // namespace

double cosine_embedding_loss(const PairSet& pairs, const Matrix& real, const Matrix& synth) {
    if (pairs.matched.empty()) throw ValidationError("cosine embedding loss needs at least one matched pair");
    double matched = 0.0;
    for (const auto& [i, j] : pairs.matched) matched += 1.0 - cosine(real.row(i), synth.row(j));
    double unmatched = 0.0;
    for (const auto& [i, j] : pairs.unmatched) unmatched += std::max(0.0, cosine(real.row(i), synth.row(j)));
    double loss = matched / static_cast<double>(pairs.matched.size());
    if (!pairs.unmatched.empty()) loss += unmatched / static_cast<double>(pairs.unmatched.size());
    return loss;
}

Matrix cosine_embedding_grad(const PairSet& pairs, const Matrix& real, const Matrix& synth) {
    if (pairs.matched.empty()) throw ValidationError("cosine embedding loss needs at least one matched pair");
    Matrix grad = Matrix::Zero(synth.rows(), synth.cols());
    const double wm = 1.0 / static_cast<double>(pairs.matched.size());
    for (const auto& [i, j] : pairs.matched) grad.row(j) -= wm * cosine_grad_b(real.row(i), synth.row(j));
    if (!pairs.unmatched.empty()) {
        const double wu = 1.0 / static_cast<double>(pairs.unmatched.size());
        for (const auto& [i, j] : pairs.unmatched)
            if (cosine(real.row(i), synth.row(j)) > 0.0) grad.row(j) += wu * cosine_grad_b(real.row(i), synth.row(j));
    }
    return grad;
}

GeneratorObjective generator_objective(const GanModel& gan, const Batch& batch, const PairSet& pairs, double beta,
                                       double gamma, bool squared_cycle) {
    batch.validate(gan);
    const auto b = static_cast<Eigen::Index>(batch.labels.size());
    const double inv_b = 1.0 / static_cast<double>(b);
    const ForwardTrace gen_trace = forward_trace(gan.generator, concat_columns(batch.noise, batch.embeddings));
    const Matrix& fake = gen_trace.output;

    GeneratorObjective obj;
    // Adversarial term: -mean D(x~, e).
    const ForwardTrace critic_trace = forward_trace(gan.critic, concat_columns(fake, batch.embeddings));
    obj.loss.wgan = -critic_trace.output.mean();
    Matrix grad_fake =
        backward(gan.critic, critic_trace, Matrix::Constant(b, 1, -inv_b)).input.leftCols(fake.cols());

    // Cycle term through the decoder. A zero weight switches a term off
    // entirely, so its history column reads 0.
    obj.decoder_grads = zero_grads(gan.decoder);
    if (beta != 0.0) {
        const ForwardTrace dec_trace = forward_trace(gan.decoder, fake);
        const Matrix diff = dec_trace.output - batch.embeddings;
        Matrix grad_recon(b, diff.cols());
        double cycle = 0.0;
        for (Eigen::Index i = 0; i < b; ++i) {
            if (squared_cycle) {
                cycle += diff.row(i).squaredNorm();
                grad_recon.row(i) = 2.0 * inv_b * diff.row(i);
            } else {
                const double n = diff.row(i).norm();
                cycle += n;
                if (n > kNormFloor)
                    grad_recon.row(i) = (inv_b / n) * diff.row(i);
                else
                    grad_recon.row(i).setZero();
            }
        }
        obj.loss.cycle = cycle * inv_b;
        const MlpGrads dec = backward(gan.decoder, dec_trace, beta * grad_recon);
        accumulate(obj.decoder_grads, dec);
        grad_fake += dec.input;
    }

    // Cosine embedding term on real/synthesized pairs.
    if (gamma != 0.0) {
        obj.loss.embed = cosine_embedding_loss(pairs, batch.real, fake);
        grad_fake += gamma * cosine_embedding_grad(pairs, batch.real, fake);
    }

    obj.loss.total = obj.loss.wgan + beta * obj.loss.cycle + gamma * obj.loss.embed;
    obj.generator_grads = backward(gan.generator, gen_trace, grad_fake);
    return obj;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct BatchSampler {
    const FeatureDataset& data;
    Matrix features;
    Matrix embeddings;
    Rng rng;
    std::vector<int> order;
    std::size_t cursor = 0;

    BatchSampler(const FeatureDataset& ds, std::uint64_t seed)
        : data(ds), features(to_double(ds.features)), embeddings(to_double(ds.embeddings)), rng(seed),
          order(static_cast<std::size_t>(ds.size())) {
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
    }

    // Draws from a reshuffled pass over the rows; wraps across epochs.
    Batch next(int batch_size, int d_z) {
        const int b = std::min(batch_size, data.size());
        Batch batch;
        batch.real.resize(b, features.cols());
        batch.embeddings.resize(b, embeddings.cols());
        batch.noise.resize(b, d_z);
        for (int i = 0; i < b; ++i) {
            if (cursor == order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            const int row = order[cursor++];
            const int y = data.labels[static_cast<std::size_t>(row)];
            batch.real.row(i) = features.row(row);
            batch.embeddings.row(i) = embeddings.row(y);
            batch.labels.push_back(y);
        }
        for (int i = 0; i < b; ++i)
            for (int k = 0; k < d_z; ++k) batch.noise(i, k) = rng.normal();
        return batch;
    }

    Vector mix_weights(Eigen::Index b) {
        Vector mix(b);
        for (Eigen::Index i = 0; i < b; ++i) mix(i) = rng.uniform();
        return mix;
    }
};

void dump_batch(const std::filesystem::path& dir, const Batch& batch) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    std::ostringstream out;
    out.precision(9);
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << batch.labels[i];
        for (Eigen::Index k = 0; k < batch.real.cols(); ++k) out << ',' << batch.real(r, k);
        for (Eigen::Index k = 0; k < batch.noise.cols(); ++k) out << ',' << batch.noise(r, k);
        out << '\n';
    }
    io::write_text(dir / "nonfinite_batch.csv", out.str());
}

}  // namespace

TrainedGan train_gan(const FeatureDataset& seen, const TrainConfig& cfg, const GanMonitor& monitor) {
    cfg.validate();
    seen.validate(/*allow_empty=*/true);
    if (seen.size() == 0) throw ValidationError("cannot train the GAN on an empty dataset");

    TrainedGan out;
    out.model = init_gan(seen.feature_dim(), seen.embedding_dim(), cfg);
    GanModel& gan = out.model;
    AdamState critic_adam = adam_init(gan.critic);
    AdamState gen_adam = adam_init(gan.generator);
    AdamState dec_adam = adam_init(gan.decoder);
    const AdamConfig adam{cfg.lr, cfg.adam_beta1, cfg.adam_beta2};
    BatchSampler sampler(seen, derive_seed(cfg.seed, 23));
    Rng pair_rng(derive_seed(cfg.seed, 24));

    LossRecord init;
    if (monitor) init.monitor = monitor(gan);
    out.history.push_back(init);

    const int iterations = (seen.size() + cfg.batch_size - 1) / cfg.batch_size;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        LossRecord rec;
        rec.epoch = epoch;
        for (int it = 0; it < iterations; ++it) {
            for (int k = 0; k < cfg.critic_steps_per_gen_step; ++k) {
                const Batch batch = sampler.next(cfg.batch_size, gan.d_z);
                const Vector mix = sampler.mix_weights(static_cast<Eigen::Index>(batch.labels.size()));
                CriticObjective c = critic_objective(gan, batch, cfg.alpha, mix);
                if (!finite(c.loss.value)) {
                    dump_batch(cfg.dump_dir, batch);
                    throw RunError("non-finite critic loss at epoch " + std::to_string(epoch) + ", iteration " +
                                   std::to_string(it));
                }
                // Ascent on the critic objective.
                for (Layer& l : c.grads.layers) {
                    l.weight = -l.weight;
                    l.bias = -l.bias;
                }
                adam_step(gan.critic, c.grads, critic_adam, adam);
                rec.critic_loss += c.loss.value;
            }

            const Batch batch = sampler.next(cfg.batch_size, gan.d_z);
            const PairSet pairs = pair_minibatch(batch.labels, batch.labels, pair_rng.next_u64());
            GeneratorObjective g = generator_objective(gan, batch, pairs, cfg.beta, cfg.gamma, cfg.squared_cycle);
            if (!finite(g.loss.total) || !finite(g.loss.cycle) || !finite(g.loss.embed)) {
                dump_batch(cfg.dump_dir, batch);
                throw RunError("non-finite generator loss at epoch " + std::to_string(epoch) + ", iteration " +
                               std::to_string(it));
            }
            if (cfg.decoder_on_real && cfg.beta != 0.0) {
                const ForwardTrace t = forward_trace(gan.decoder, batch.real);
                const Matrix diff = t.output - batch.embeddings;
                Matrix grad(diff.rows(), diff.cols());
                const double inv_b = 1.0 / static_cast<double>(diff.rows());
                for (Eigen::Index i = 0; i < diff.rows(); ++i) {
                    const double n = diff.row(i).norm();
                    grad.row(i) = cfg.squared_cycle ? RowVector(2.0 * inv_b * diff.row(i))
                                  : n > kNormFloor  ? RowVector((inv_b / n) * diff.row(i))
                                                    : RowVector(RowVector::Zero(diff.cols()));
                }
                accumulate(g.decoder_grads, backward(gan.decoder, t, cfg.beta * grad));
            }
            adam_step(gan.generator, g.generator_grads, gen_adam, adam);
            adam_step(gan.decoder, g.decoder_grads, dec_adam, adam);
            rec.gen_wgan += g.loss.wgan;
            rec.cycle += g.loss.cycle;
            rec.embed += g.loss.embed;
            rec.total += g.loss.total;
        }
        rec.critic_loss /= static_cast<double>(iterations * cfg.critic_steps_per_gen_step);
        rec.gen_wgan /= iterations;
        rec.cycle /= iterations;
        rec.embed /= iterations;
        rec.total /= iterations;
        if (monitor) rec.monitor = monitor(gan);
        out.history.push_back(rec);
    }
    return out;
}

std::string history_csv(const std::vector<LossRecord>& history) {
    std::ostringstream out;
    out.precision(9);
    out << "epoch,critic_loss,gen_wgan,cycle,embed,total\n";
    for (const LossRecord& r : history)
        out << r.epoch << ',' << r.critic_loss << ',' << r.gen_wgan << ',' << r.cycle << ',' << r.embed << ','
            << r.total << '\n';
    return out.str();
}

Matrix synthesize_features(const GanModel& gan, const Matrix& embeddings, int per_class, std::uint64_t seed) {
    if (per_class < 0) throw ValidationError("per_class must be nonnegative");
    if (embeddings.cols() != gan.embedding_dim()) throw ValidationError("embedding width does not match the model");
    const Eigen::Index n = embeddings.rows() * per_class;
    if (n == 0) return Matrix(0, gan.feature_dim());
    Rng rng(derive_seed(seed, 30));
    Matrix noise(n, gan.d_z);
    Matrix cond(n, embeddings.cols());
    for (Eigen::Index c = 0, row = 0; c < embeddings.rows(); ++c) {
        for (int k = 0; k < per_class; ++k, ++row) {
            cond.row(row) = embeddings.row(c);
            for (int d = 0; d < gan.d_z; ++d) noise(row, d) = rng.normal();
        }
    }
    return generate(gan, noise, cond);
}

FeatureDataset synthesize(const GanModel& gan, const FeatureDataset& table, const std::vector<int>& classes,
                          int per_class, std::uint64_t seed) {
    Matrix emb(static_cast<Eigen::Index>(classes.size()), table.embedding_dim());
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] < 0 || classes[i] >= table.num_classes())
            throw ValidationError("synthesize: class id out of range");
        emb.row(static_cast<Eigen::Index>(i)) = table.embeddings.row(classes[i]).cast<double>();
    }
    FeatureDataset out;
    out.features = to_float(synthesize_features(gan, emb, per_class, seed));
    for (int y : classes) out.labels.insert(out.labels.end(), static_cast<std::size_t>(per_class), y);
    out.embeddings = table.embeddings;
    out.class_names = table.class_names;
    out.manual_embeddings = table.manual_embeddings;
    out.provenance = Provenance::synthesized;
    return out;
}

}  // namespace gzsl
