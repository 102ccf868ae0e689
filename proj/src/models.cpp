#include "gzsl/models.hpp"

#include "gzsl/binary_io.hpp"
#include "gzsl/error.hpp"
#include "gzsl/random.hpp"

#include <cmath>

namespace gzsl {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::none: return "none";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::softmax: return "softmax";
    }
    return "none";
}

Activation activation_from_string(const std::string& name) {
    if (name == "none") return Activation::none;
    if (name == "relu") return Activation::relu;
    if (name == "leaky_relu") return Activation::leaky_relu;
    if (name == "softmax") return Activation::softmax;
    throw ValidationError("unknown activation: " + name);
}

void MlpSpec::validate() const {
    if (layer_sizes.size() < 2) throw ValidationError("MlpSpec needs at least input and output sizes");
    for (int s : layer_sizes)
        if (s <= 0) throw ValidationError("MlpSpec layer sizes must be positive");
    if (hidden_activation != Activation::relu && hidden_activation != Activation::leaky_relu)
        throw ValidationError("hidden activation must be relu or leaky_relu");
    if (output_activation != Activation::none && output_activation != Activation::softmax)
        throw ValidationError("output activation must be none or softmax");
}

std::size_t MlpSpec::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i)
        n += static_cast<std::size_t>(layer_sizes[i]) * layer_sizes[i + 1] + layer_sizes[i + 1];
    return n;
}

Mlp init_mlp(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    Mlp net{spec, {}};
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Layer layer{Matrix(out, in), RowVector::Zero(out)};
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        out.row(r) = (logits.row(r).array() - mx).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> idx(static_cast<std::size_t>(m.rows()), 0);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        int best = 0;
        for (Eigen::Index c = 1; c < m.cols(); ++c)
            if (m(r, c) > m(r, best)) best = static_cast<int>(c);
        idx[static_cast<std::size_t>(r)] = best;
    }
    return idx;
}

namespace {

Matrix apply_hidden(const Matrix& pre, Activation a) {
    if (a == Activation::relu) return pre.cwiseMax(0.0);
    return pre.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

Matrix hidden_derivative(const Matrix& pre, Activation a) {
    const double neg = a == Activation::relu ? 0.0 : kLeakySlope;
    return pre.unaryExpr([neg](double v) { return v > 0.0 ? 1.0 : neg; });
}

void check_input(const Mlp& net, const Matrix& input) {
    if (input.cols() != net.spec.input_size())
        throw ValidationError("width mismatch: network expects " + std::to_string(net.spec.input_size()) +
                              " inputs, got " + std::to_string(input.cols()));
}

}  // namespace

ForwardTrace forward_trace(const Mlp& net, const Matrix& input) {
    check_input(net, input);
    ForwardTrace trace;
    Matrix act = input;
    const std::size_t n = net.layers.size();
    for (std::size_t l = 0; l < n; ++l) {
        const Layer& layer = net.layers[l];
        Matrix pre = act * layer.weight.transpose();
        pre.rowwise() += layer.bias;
        trace.inputs.push_back(std::move(act));
        if (l + 1 < n) {
            act = apply_hidden(pre, net.spec.hidden_activation);
        } else {
            act = net.spec.output_activation == Activation::softmax ? softmax_rows(pre) : pre;
        }
        trace.preactivations.push_back(std::move(pre));
    }
    trace.output = std::move(act);
    return trace;
}

Matrix forward(const Mlp& net, const Matrix& input) { return forward_trace(net, input).output; }

MlpGrads zero_grads(const Mlp& net) {
    MlpGrads g;
    for (const Layer& layer : net.layers)
        g.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), RowVector::Zero(layer.bias.size())});
    return g;
}

MlpGrads backward(const Mlp& net, const ForwardTrace& trace, const Matrix& grad_output) {
    const std::size_t n = net.layers.size();
    if (grad_output.rows() != trace.output.rows() || grad_output.cols() != trace.output.cols())
        throw ValidationError("backward: gradient shape does not match network output");

    MlpGrads grads;
    grads.layers.resize(n);
    Matrix delta;
    if (net.spec.output_activation == Activation::softmax) {
        const Matrix& p = trace.output;
        const Vector inner = (grad_output.cwiseProduct(p)).rowwise().sum();
        delta = p.cwiseProduct(grad_output - inner.replicate(1, p.cols()));
    } else {
        delta = grad_output;
    }
    for (std::size_t i = n; i-- > 0;) {
        const Layer& layer = net.layers[i];
        grads.layers[i].weight = delta.transpose() * trace.inputs[i];
        grads.layers[i].bias = delta.colwise().sum();
        Matrix upstream = delta * layer.weight;
        if (i > 0) {
            delta = upstream.cwiseProduct(hidden_derivative(trace.preactivations[i - 1], net.spec.hidden_activation));
        } else {
            grads.input = std::move(upstream);
        }
    }
    return grads;
}

void accumulate(MlpGrads& dst, const MlpGrads& src, double scale) {
    if (dst.layers.size() != src.layers.size()) throw ValidationError("accumulate: layer count mismatch");
    for (std::size_t i = 0; i < dst.layers.size(); ++i) {
        dst.layers[i].weight += scale * src.layers[i].weight;
        dst.layers[i].bias += scale * src.layers[i].bias;
    }
}

namespace {

void append(std::vector<double>& flat, const std::vector<Layer>& layers) {
    for (const Layer& layer : layers) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) flat.push_back(layer.weight(r, c));
        for (Eigen::Index c = 0; c < layer.bias.size(); ++c) flat.push_back(layer.bias(c));
    }
}

}  // namespace

std::vector<double> flatten(const Mlp& net) {
    std::vector<double> flat;
    flat.reserve(net.spec.parameter_count());
    append(flat, net.layers);
    return flat;
}

std::vector<double> flatten(const MlpGrads& grads) {
    std::vector<double> flat;
    append(flat, grads.layers);
    return flat;
}

void unflatten(Mlp& net, const std::vector<double>& flat) {
    if (flat.size() != net.spec.parameter_count())
        throw ValidationError("unflatten: expected " + std::to_string(net.spec.parameter_count()) + " values, got " +
                              std::to_string(flat.size()));
    std::size_t k = 0;
    for (Layer& layer : net.layers) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = flat[k++];
        for (Eigen::Index c = 0; c < layer.bias.size(); ++c) layer.bias(c) = flat[k++];
    }
}

AdamState adam_init(const Mlp& net) {
    AdamState s;
    s.m = zero_grads(net).layers;
    s.v = s.m;
    return s;
}

void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state, const AdamConfig& cfg) {
    if (grads.layers.size() != net.layers.size() || state.m.size() != net.layers.size())
        throw ValidationError("adam_step: shape mismatch");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        if (g.rows() != param.rows() || g.cols() != param.cols()) throw ValidationError("adam_step: shape mismatch");
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        param.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
    };
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        update(net.layers[i].weight, grads.layers[i].weight, state.m[i].weight, state.v[i].weight);
        update(net.layers[i].bias, grads.layers[i].bias, state.m[i].bias, state.v[i].bias);
    }
}

void save_mlp(const Mlp& net, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::vector<double> flat = flatten(net);
    io::write_f32(dir / "params.f32", std::vector<float>(flat.begin(), flat.end()));
    nlohmann::ordered_json shape;
    shape["layer_sizes"] = net.spec.layer_sizes;
    shape["hidden_activation"] = to_string(net.spec.hidden_activation);
    shape["output_activation"] = to_string(net.spec.output_activation);
    io::write_json(dir / "shape.json", shape);
}

Mlp load_mlp(const std::filesystem::path& dir) {
    const nlohmann::json shape = io::read_json(dir / "shape.json");
    MlpSpec spec;
    try {
        spec.layer_sizes = shape.at("layer_sizes").get<std::vector<int>>();
        spec.hidden_activation = activation_from_string(shape.at("hidden_activation").get<std::string>());
        spec.output_activation = activation_from_string(shape.at("output_activation").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed shape.json: " + std::string(e.what()));
    }
    spec.validate();
    const std::vector<float> raw = io::read_f32(dir / "params.f32");
    if (raw.size() != spec.parameter_count())
        throw ValidationError("dimension mismatch: params.f32 holds " + std::to_string(raw.size()) +
                              " values, shape needs " + std::to_string(spec.parameter_count()));
    Mlp net = init_mlp(spec, 0);
    unflatten(net, std::vector<double>(raw.begin(), raw.end()));
    return net;
}

}  // namespace gzsl
