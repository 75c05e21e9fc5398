#pragma once

// Activation functions, a fixed two-layer perceptron, and scaled dot-product
// attention. All pure functions over the linalg types.

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "visa/linalg.hpp"
#include "visa/rng.hpp"

namespace visa {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec sigmoid(const Vec& x) {
    require_finite(x, "sigmoid");
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
    return out;
}

// Numerically stable softmax (max subtraction).
inline Vec softmax(const Vec& x) {
    if (x.empty()) throw std::invalid_argument("softmax: empty input");
    require_finite(x, "softmax");
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : x) mx = std::max(mx, v);
    Vec out(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

// Two-layer perceptron, hidden width = input width = output width,
// sigmoid hidden activation, linear output.
struct MlpParams {
    Matrix w1;
    Vec b1;
    Matrix w2;
    Vec b2;

    std::size_t width() const { return w1.cols(); }

    void validate() const {
        if (w1.rows() != b1.size() || w2.cols() != w1.rows() ||
            w2.rows() != b2.size() || w2.rows() != w1.cols())
            throw std::invalid_argument("MlpParams: shapes do not chain in->hidden->in");
    }
};

inline MlpParams make_mlp_params(std::size_t width, std::uint64_t seed) {
    RngStream rng(seed);
    MlpParams p{Matrix(width, width), Vec(width), Matrix(width, width), Vec(width)};
    const double s = 1.0 / std::sqrt(static_cast<double>(width));
    for (double& v : p.w1.data()) v = rng.uniform(-s, s);
    for (double& v : p.b1) v = rng.uniform(-s, s);
    for (double& v : p.w2.data()) v = rng.uniform(-s, s);
    for (double& v : p.b2) v = rng.uniform(-s, s);
    return p;
}

inline Vec mlp_forward(const MlpParams& params, const Vec& x) {
    params.validate();
    if (x.size() != params.width())
        throw std::invalid_argument("mlp_forward: input width mismatch");
    Vec h = sigmoid(add(matvec(params.w1, x), params.b1));
    return add(matvec(params.w2, h), params.b2);
}

// out = softmax(Q K^T / sqrt(d_k)) V; each output row is a convex
// combination of V rows.
inline Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (q.cols() != k.cols())
        throw std::invalid_argument("attention: Q/K key width mismatch");
    if (k.rows() != v.rows())
        throw std::invalid_argument("attention: K/V row count mismatch");
    if (k.rows() == 0)
        throw std::invalid_argument("attention: empty key set");
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(k.cols()));
    Matrix out(q.rows(), v.cols());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        Vec scores(k.rows());
        for (std::size_t j = 0; j < k.rows(); ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < k.cols(); ++c) acc += q(i, c) * k(j, c);
            scores[j] = acc * inv_sqrt_dk;
        }
        Vec w = softmax(scores);
        for (std::size_t j = 0; j < k.rows(); ++j)
            for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) += w[j] * v(j, c);
    }
    return out;
}

// JSON schema: {"w1": [[...]], "b1": [...], "w2": [[...]], "b2": [...]}
inline MlpParams mlp_params_from_json(const nlohmann::json& j) {
    auto mat = [](const nlohmann::json& rows) {
        std::vector<Vec> r;
        for (const auto& row : rows) r.push_back(row.get<Vec>());
        return Matrix::from_rows(r);
    };
    MlpParams p{mat(j.at("w1")), j.at("b1").get<Vec>(), mat(j.at("w2")), j.at("b2").get<Vec>()};
    p.validate();
    return p;
}

inline MlpParams load_mlp_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open MLP parameter file: " + path);
    nlohmann::json j;
    in >> j;
    return mlp_params_from_json(j);
}

}  // namespace visa
