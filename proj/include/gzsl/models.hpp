#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gzsl {

/// Row-major samples: one row per example.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation { none, relu, leaky_relu, softmax };

inline constexpr double kLeakySlope = 0.2;

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Fully-connected network shape. layer_sizes = {input, hidden..., output}.
struct MlpSpec {
    std::vector<int> layer_sizes;
    Activation hidden_activation = Activation::relu;
    Activation output_activation = Activation::none;

    void validate() const;
    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return layer_sizes.size() - 1; }
    std::size_t parameter_count() const;
};

/// One affine map: out = in * weight^T + bias. weight is (out x in).
struct Layer {
    Matrix weight;
    RowVector bias;
};

/// Parameter bundle for an MlpSpec.
struct Mlp {
    MlpSpec spec;
    std::vector<Layer> layers;
};

/// Weights ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
Mlp init_mlp(const MlpSpec& spec, std::uint64_t seed);

/// Intermediate values kept for backpropagation.
struct ForwardTrace {
    std::vector<Matrix> inputs;       // input to layer i
    std::vector<Matrix> preactivations;
    Matrix output;
};

Matrix forward(const Mlp& net, const Matrix& input);
ForwardTrace forward_trace(const Mlp& net, const Matrix& input);

/// Gradients with the same layout as an Mlp, plus the input gradient.
struct MlpGrads {
    std::vector<Layer> layers;
    Matrix input;
};

MlpGrads zero_grads(const Mlp& net);

/// Backpropagates dL/d(output), where output is taken after the output
/// activation (softmax Jacobian included).
MlpGrads backward(const Mlp& net, const ForwardTrace& trace, const Matrix& grad_output);

/// Accumulates scale * src into dst.
void accumulate(MlpGrads& dst, const MlpGrads& src, double scale = 1.0);

/// Flat parameter view in checkpoint order: for each layer, weight
/// row-major (out x in) then bias.
std::vector<double> flatten(const Mlp& net);
std::vector<double> flatten(const MlpGrads& grads);
void unflatten(Mlp& net, const std::vector<double>& flat);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Layer> m;
    std::vector<Layer> v;
    long step = 0;
};

AdamState adam_init(const Mlp& net);

/// Bias-corrected Adam update applied in place.
void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state, const AdamConfig& cfg);

/// Checkpoint: <dir>/params.f32 (little-endian float32, flatten() order)
/// and <dir>/shape.json.
void save_mlp(const Mlp& net, const std::filesystem::path& dir);
Mlp load_mlp(const std::filesystem::path& dir);

/// Row-wise softmax with max-subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Row-wise argmax; ties go to the lowest column.
std::vector<int> argmax_rows(const Matrix& m);

}  // namespace gzsl
