#pragma once

// Memory-guided sequence modeling: an EMA memory over noisy per-frame
// features, a gated concat + attention enhancement path, and the closed-form
// bias/variance analysis of the memory with a Monte-Carlo oracle.
//
// Noise model per entity: v^t = v + t*delta + eps_t, eps_t ~ N(0, diag(Sigma)).
// Memory update: M' = (1-lambda) M + lambda v^t.

#include <cstdint>
#include <deque>
#include <optional>

#include "visa/linalg.hpp"
#include "visa/nn.hpp"
#include "visa/rng.hpp"

namespace visa::mgsm {

struct NoiseModel {
    Vec base_feature;  // v
    Vec sigma_diag;    // per-coordinate variance
    Vec drift;         // delta, per-step feature change

    void validate() const {
        require_same_width(base_feature, sigma_diag, "NoiseModel");
        require_same_width(base_feature, drift, "NoiseModel");
        for (double s : sigma_diag)
            if (!(s >= 0.0)) throw std::invalid_argument("NoiseModel: negative variance");
    }

    std::size_t width() const { return base_feature.size(); }

    // True (noise-free) feature at step t.
    Vec feature_at(std::uint64_t t) const {
        return add(base_feature, scale(drift, static_cast<double>(t)));
    }
};

struct MemoryState {
    Vec memory;
    double lambda = 0.04;
    std::uint64_t step = 0;
    std::optional<Vec> prev_feature;

    static MemoryState zero_init(std::size_t width, double lambda) {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw std::invalid_argument("MemoryState: lambda outside [0,1]");
        return MemoryState{Vec(width, 0.0), lambda, 0, std::nullopt};
    }
};

// W = sigmoid(MLP(v)), elementwise in (0,1).
inline Vec adaptive_weights(const MlpParams& params, const Vec& v) {
    return sigmoid(mlp_forward(params, v));
}

// v* = (W .* v_t) || v_prev, width 2d.
inline Vec gated_concat(const Vec& v_t, const Vec& v_prev, const Vec& w) {
    require_same_width(v_t, v_prev, "gated_concat");
    require_same_width(v_t, w, "gated_concat");
    return concat(hadamard(w, v_t), v_prev);
}

// M' = (1-lambda) M + lambda v_t. Exact contraction toward v_t.
inline MemoryState memory_update(const MemoryState& state, const Vec& v_t) {
    require_same_width(state.memory, v_t, "memory_update");
    if (!(state.lambda >= 0.0 && state.lambda <= 1.0))
        throw std::invalid_argument("memory_update: lambda outside [0,1]");
    MemoryState next;
    next.lambda = state.lambda;
    next.step = state.step + 1;
    next.prev_feature = v_t;
    next.memory.resize(v_t.size());
    for (std::size_t i = 0; i < v_t.size(); ++i)
        next.memory[i] = (1.0 - state.lambda) * state.memory[i] + state.lambda * v_t[i];
    return next;
}

// Attention over a bank of memory rows (keys) and their paired value rows.
// Query is v* projected from width 2d back to d.
inline Vec enhance_bank(const Vec& v_star, const Matrix& keys, const Matrix& values,
                        const Matrix& proj) {
    if (proj.cols() != v_star.size())
        throw std::invalid_argument("enhance: projection width mismatch");
    Matrix q(1, proj.rows(), matvec(proj, v_star));
    return attention(q, keys, values).row(0);
}

// Single-row form: K = M, V = v_t. With one key the softmax weight is 1 and
// the output equals v_t.
inline Vec enhance(const Vec& v_star, const Vec& memory, const Vec& v_t, const Matrix& proj) {
    require_same_width(memory, v_t, "enhance");
    return enhance_bank(v_star, Matrix(1, memory.size(), memory), Matrix(1, v_t.size(), v_t), proj);
}

// Ring of the last k memory snapshots, oldest evicted first.
class MemoryBank {
public:
    explicit MemoryBank(std::size_t depth = 1) : depth_(depth == 0 ? 1 : depth) {}

    void push(const Vec& memory, const Vec& value) {
        keys_.push_back(memory);
        values_.push_back(value);
        if (keys_.size() > depth_) {
            keys_.pop_front();
            values_.pop_front();
        }
    }

    Matrix keys() const { return Matrix::from_rows({keys_.begin(), keys_.end()}); }
    Matrix values() const { return Matrix::from_rows({values_.begin(), values_.end()}); }
    std::size_t size() const { return keys_.size(); }

private:
    std::size_t depth_;
    std::deque<Vec> keys_;
    std::deque<Vec> values_;
};

// ---------------------------------------------------------------------------
// Closed-form analytics.

// Long-run per-coordinate variance of M: lambda * sigma / (2 - lambda).
inline Vec stationary_variance(double lambda, const Vec& sigma_diag) {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw std::domain_error("stationary_variance: requires 0 < lambda <= 1");
    return scale(sigma_diag, lambda / (2.0 - lambda));
}

// Small-lambda approximation lambda * sigma / 2.
inline Vec stationary_variance_approx(double lambda, const Vec& sigma_diag) {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw std::domain_error("stationary_variance_approx: requires 0 < lambda <= 1");
    return scale(sigma_diag, lambda / 2.0);
}

// Long-run lag of M behind the drifting feature: -delta / lambda.
inline Vec steady_state_bias(const Vec& delta, double lambda) {
    if (!(lambda > 0.0))
        throw std::domain_error("steady_state_bias: requires lambda > 0");
    return scale(delta, -1.0 / lambda);
}

// Smallest lambda keeping ||steady-state bias|| <= epsilon: ||delta|| / epsilon.
inline double lambda_lower_bound(const Vec& delta, double epsilon_tol) {
    if (!(epsilon_tol > 0.0))
        throw std::domain_error("lambda_lower_bound: requires epsilon > 0");
    return norm2(delta) / epsilon_tol;
}

struct LambdaSweepRow {
    double lambda = 0.0;
    double bias_sq = 0.0;        // ||delta||^2 / lambda^2
    double variance = 0.0;       // lambda * sigma_bar / 2
    double total = 0.0;          // bias_sq + variance, same fp expression
    std::optional<double> empirical_total;
    std::optional<double> empirical_bias_sq;
    std::optional<double> empirical_variance;
};

// Total error decomposition at a given lambda; sigma_scalar is the scalarized
// noise level (mean of sigma_diag).
inline LambdaSweepRow total_error(double lambda, const Vec& delta, double sigma_scalar) {
    if (!(lambda > 0.0))
        throw std::domain_error("total_error: requires lambda > 0");
    if (!(sigma_scalar > 0.0))
        throw std::domain_error("total_error: requires sigma > 0");
    LambdaSweepRow row;
    row.lambda = lambda;
    double dn2 = dot(delta, delta);
    row.bias_sq = dn2 / (lambda * lambda);
    row.variance = lambda * sigma_scalar / 2.0;
    row.total = row.bias_sq + row.variance;
    return row;
}

// Argmin of the total error: (4 ||delta||^2 / sigma_bar)^(1/3). Values outside
// (0,1] are returned as-is; callers decide how to clamp or flag them.
inline double optimal_lambda(const Vec& delta, double sigma_scalar) {
    if (!(sigma_scalar > 0.0))
        throw std::domain_error("optimal_lambda: requires sigma > 0");
    double dn2 = dot(delta, delta);
    if (dn2 == 0.0)
        throw std::domain_error(
            "optimal_lambda: zero drift has no interior optimum; use lambda_lower_bound");
    return std::cbrt(4.0 * dn2 / sigma_scalar);
}

// ---------------------------------------------------------------------------
// Monte-Carlo oracle.

struct SimulationTrace {
    std::size_t steps = 0;
    std::size_t trials = 0;
    std::size_t width = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    // Row-major [step][coordinate].
    std::vector<Vec> mean;
    std::vector<Vec> variance;  // cross-trial, Bessel-corrected when trials > 1
    std::vector<Vec> bias;      // mean - (v + t*delta)

    // Fraction of final steps treated as stationary.
    static constexpr double kTailFraction = 0.2;

    std::size_t tail_start() const {
        return steps - std::max<std::size_t>(1, static_cast<std::size_t>(
                            static_cast<double>(steps) * kTailFraction));
    }

    Vec tail_variance() const { return tail_average(variance); }
    Vec tail_bias() const { return tail_average(bias); }

private:
    Vec tail_average(const std::vector<Vec>& rows) const {
        Vec acc(width, 0.0);
        std::size_t from = tail_start();
        for (std::size_t t = from; t < steps; ++t)
            for (std::size_t c = 0; c < width; ++c) acc[c] += rows[t][c];
        return scale(std::move(acc), 1.0 / static_cast<double>(steps - from));
    }
};

// Runs `trials` independent EMA chains M_{t+1} = (1-l) M_t + l (v + t d + eps),
// M_0 = v, and reports per-step cross-trial mean/variance and bias.
// One substream per trial, so results do not depend on execution order.
inline SimulationTrace simulate_memory(const NoiseModel& model, double lambda,
                                       std::size_t steps, std::size_t trials,
                                       const RngStream& rng) {
    model.validate();
    if (steps < 1 || trials < 1)
        throw std::invalid_argument("simulate_memory: steps and trials must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("simulate_memory: lambda outside [0,1]");

    const std::size_t d = model.width();
    std::vector<Vec> sum(steps, Vec(d, 0.0));
    std::vector<Vec> sumsq(steps, Vec(d, 0.0));

    Vec sd(d);
    bool noiseless = true;
    for (std::size_t c = 0; c < d; ++c) {
        sd[c] = std::sqrt(model.sigma_diag[c]);
        if (sd[c] != 0.0) noiseless = false;
    }

    Vec m(d);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        RngStream stream = rng.substream(trial);
        m = model.base_feature;
        for (std::size_t t = 0; t < steps; ++t) {
            double td = static_cast<double>(t);
            for (std::size_t c = 0; c < d; ++c) {
                double v = model.base_feature[c] + td * model.drift[c];
                if (!noiseless && sd[c] != 0.0) v += sd[c] * stream.normal();
                m[c] = (1.0 - lambda) * m[c] + lambda * v;
                sum[t][c] += m[c];
                sumsq[t][c] += m[c] * m[c];
            }
        }
    }

    SimulationTrace trace;
    trace.steps = steps;
    trace.trials = trials;
    trace.width = d;
    trace.lambda = lambda;
    trace.seed = rng.seed();
    trace.mean.assign(steps, Vec(d, 0.0));
    trace.variance.assign(steps, Vec(d, 0.0));
    trace.bias.assign(steps, Vec(d, 0.0));
    const double n = static_cast<double>(trials);
    for (std::size_t t = 0; t < steps; ++t) {
        // Row t holds M^{t+1}, built from v^t; its bias is measured against
        // the feature at t+1, matching the steady-state lag -delta/lambda.
        Vec truth = model.feature_at(t + 1);
        for (std::size_t c = 0; c < d; ++c) {
            double mu = sum[t][c] / n;
            trace.mean[t][c] = mu;
            trace.bias[t][c] = mu - truth[c];
            if (trials > 1) {
                double var = (sumsq[t][c] - n * mu * mu) / (n - 1.0);
                trace.variance[t][c] = std::max(0.0, var);
            }
        }
    }
    return trace;
}

// One analytic row per lambda, plus the empirical totals from the oracle.
inline std::vector<LambdaSweepRow> sweep_lambda(const std::vector<double>& grid,
                                                const NoiseModel& model,
                                                std::size_t steps, std::size_t trials,
                                                const RngStream& rng,
                                                bool with_empirical = true) {
    if (grid.empty()) throw std::invalid_argument("sweep_lambda: empty grid");
    model.validate();
    double sigma_bar = mean(model.sigma_diag);
    std::vector<LambdaSweepRow> rows;
    rows.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double lambda = grid[i];
        if (!(lambda > 0.0 && lambda <= 1.0))
            throw std::invalid_argument("sweep_lambda: grid values must lie in (0,1]");
        LambdaSweepRow row = total_error(lambda, model.drift, sigma_bar);
        if (with_empirical) {
            SimulationTrace trace = simulate_memory(model, lambda, steps, trials,
                                                    rng.substream(0x5eedull + i));
            Vec b = trace.tail_bias();
            row.empirical_bias_sq = dot(b, b);
            row.empirical_variance = mean(trace.tail_variance());
            row.empirical_total = *row.empirical_bias_sq + *row.empirical_variance;
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::size_t argmin_analytic(const std::vector<LambdaSweepRow>& rows) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].total < rows[best].total) best = i;
    return best;
}

inline std::size_t argmin_empirical(const std::vector<LambdaSweepRow>& rows) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].empirical_total.value() < rows[best].empirical_total.value()) best = i;
    return best;
}

}  // namespace visa::mgsm
