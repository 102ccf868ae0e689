#pragma once
// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls into the code under test except to read parameters.

#include "gzsl/models.hpp"
#include "gzsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace oracle {

using gzsl::Matrix;

inline Matrix random_matrix(gzsl::Rng& rng, int rows, int cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    return m;
}

/// Rows drawn from a Dirichlet(1,...,1), i.e. uniform on the simplex.
inline Matrix random_simplex(gzsl::Rng& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            m(r, c) = -std::log(1.0 - rng.uniform());
            sum += m(r, c);
        }
        m.row(r) /= sum;
    }
    return m;
}

inline double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-10});
    return std::sqrt(diff) / denom;
}

inline std::vector<double> to_vec(const Matrix& m) { return std::vector<double>(m.data(), m.data() + m.size()); }

/// Central differences of f over every entry of `x`.
inline std::vector<double> numeric_grad(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                                        double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline Matrix numeric_grad(const Matrix& x, const std::function<double(const Matrix&)>& f, double h = 1e-6) {
    std::vector<double> flat = to_vec(x);
    const std::vector<double> g = numeric_grad(flat, [&](const std::vector<double>& v) {
        Matrix m = Eigen::Map<const Matrix>(v.data(), x.rows(), x.cols());
        return f(m);
    }, h);
    return Eigen::Map<const Matrix>(g.data(), x.rows(), x.cols());
}

/// Numeric gradient of f with respect to every parameter of `net`, in
/// flatten() order.
inline std::vector<double> numeric_param_grad(const gzsl::Mlp& net, const std::function<double(const gzsl::Mlp&)>& f,
                                              double h = 1e-6) {
    gzsl::Mlp work = net;
    return numeric_grad(gzsl::flatten(net), [&](const std::vector<double>& p) {
        gzsl::unflatten(work, p);
        return f(work);
    }, h);
}

/// Plain-loop evaluation of a one-hidden-layer LeakyReLU critic on x ++ e.
inline double critic_score(const gzsl::Mlp& critic, const std::vector<double>& input) {
    const gzsl::Layer& l1 = critic.layers[0];
    const gzsl::Layer& l2 = critic.layers[1];
    double out = l2.bias(0);
    for (int j = 0; j < l1.weight.rows(); ++j) {
        double a = l1.bias(j);
        for (int k = 0; k < l1.weight.cols(); ++k) a += l1.weight(j, k) * input[static_cast<std::size_t>(k)];
        if (a < 0.0) a *= 0.2;
        out += l2.weight(0, j) * a;
    }
    return out;
}

/// Gradient penalty mean_i (||d D / d x_i|| - 1)^2 with the feature gradient
/// itself taken by central differences.
inline double fd_gradient_penalty(const gzsl::Mlp& critic, const Matrix& interp, const Matrix& emb, double h = 1e-6) {
    double total = 0.0;
    const int dx = static_cast<int>(interp.cols());
    for (int i = 0; i < interp.rows(); ++i) {
        std::vector<double> in(static_cast<std::size_t>(dx + emb.cols()));
        for (int k = 0; k < dx; ++k) in[static_cast<std::size_t>(k)] = interp(i, k);
        for (int k = 0; k < emb.cols(); ++k) in[static_cast<std::size_t>(dx + k)] = emb(i, k);
        double sq = 0.0;
        for (int k = 0; k < dx; ++k) {
            const double keep = in[static_cast<std::size_t>(k)];
            in[static_cast<std::size_t>(k)] = keep + h;
            const double up = critic_score(critic, in);
            in[static_cast<std::size_t>(k)] = keep - h;
            const double down = critic_score(critic, in);
            in[static_cast<std::size_t>(k)] = keep;
            const double g = (up - down) / (2.0 * h);
            sq += g * g;
        }
        total += (std::sqrt(sq) - 1.0) * (std::sqrt(sq) - 1.0);
    }
    return total / static_cast<double>(interp.rows());
}

inline double entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

inline double harmonic(double s, double u) { return s + u == 0.0 ? 0.0 : 2.0 * s * u / (s + u); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("gzsl_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::FILE* f = std::fopen(p.c_str(), "rb");
    if (!f) return {};
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
    std::fclose(f);
    return out;
}

}  // namespace oracle
