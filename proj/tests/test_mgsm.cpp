#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "visa/mgsm.hpp"

using namespace visa;
using namespace visa::mgsm;

TEST_CASE("adaptive_weights zero params give 0.5 and stay in (0,1)") {
    MlpParams zero{Matrix(3, 3), Vec(3, 0.0), Matrix(3, 3), Vec(3, 0.0)};
    Vec w = adaptive_weights(zero, {1.0, -2.0, 3.0});
    for (double x : w) CHECK(x == doctest::Approx(0.5).epsilon(1e-15));

    RngStream rng(5);
    MlpParams p = make_mlp_params(4, 17);
    for (int rep = 0; rep < 50; ++rep) {
        Vec v(4);
        for (double& x : v) x = rng.uniform(-10, 10);
        for (double x : adaptive_weights(p, v)) {
            CHECK(x > 0.0);
            CHECK(x < 1.0);
        }
    }
}

TEST_CASE("adaptive_weights seeded fixture matches direct evaluation") {
    MlpParams p = make_mlp_params(2, 31);
    Vec v{0.5, -1.5};
    Vec want = sigmoid(mlp_forward(p, v));
    Vec got = adaptive_weights(p, v);
    CHECK(got == want);
}

TEST_CASE("gated_concat gating arithmetic") {
    Vec vt{2.0, 4.0}, vp{1.0, 1.0};
    CHECK(gated_concat(vt, vp, {1.0, 1.0}) == Vec{2.0, 4.0, 1.0, 1.0});
    CHECK(gated_concat(vt, vp, {0.0, 0.0}) == Vec{0.0, 0.0, 1.0, 1.0});
    CHECK(gated_concat(vt, vp, {0.5, 0.25}) == Vec{1.0, 1.0, 1.0, 1.0});
    CHECK_THROWS_AS(gated_concat(vt, Vec{1.0}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("memory_update basics") {
    MemoryState s = MemoryState::zero_init(1, 0.04);
    MemoryState s1 = memory_update(s, {1.0});
    CHECK(s1.memory[0] == doctest::Approx(0.04).epsilon(1e-15));
    CHECK(s1.step == 1);
    CHECK(s1.prev_feature.value() == Vec{1.0});

    MemoryState frozen = MemoryState::zero_init(2, 0.0);
    frozen.memory = {3.0, -1.0};
    CHECK(memory_update(frozen, {100.0, 100.0}).memory == Vec{3.0, -1.0});

    MemoryState memoryless = MemoryState::zero_init(2, 1.0);
    memoryless.memory = {3.0, -1.0};
    CHECK(memory_update(memoryless, {5.0, 6.0}).memory == Vec{5.0, 6.0});
}

TEST_CASE("memory_update contracts toward the target exactly") {
    RngStream rng(3);
    for (int rep = 0; rep < 100; ++rep) {
        double lambda = rng.uniform(0.0, 1.0);
        MemoryState s = MemoryState::zero_init(3, lambda);
        for (double& x : s.memory) x = rng.uniform(-5, 5);
        Vec v(3);
        for (double& x : v) x = rng.uniform(-5, 5);
        MemoryState n = memory_update(s, v);
        double before = norm2(sub(s.memory, v));
        double after = norm2(sub(n.memory, v));
        CHECK(after == doctest::Approx((1.0 - lambda) * before).epsilon(1e-12));
    }
}

TEST_CASE("enhance single and multi-row memory banks") {
    Matrix proj(2, 4);  // zero projection: uniform attention weights
    Vec v_star{1.0, 2.0, 3.0, 4.0};
    Vec memory{0.5, 0.5};
    Vec v_t{7.0, -3.0};
    CHECK(enhance(v_star, memory, v_t, proj) == v_t);

    Matrix keys = Matrix::from_rows({{1.0, 0.0}, {1.0, 0.0}});
    Matrix values = Matrix::from_rows({{2.0, 2.0}, {4.0, 6.0}});
    Vec mean = enhance_bank(v_star, keys, values, proj);
    CHECK(mean[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(mean[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("enhance two-row bank closed-form softmax weights") {
    // q fixed at [1, 0]; keys chosen so scores are (ln2 + c, c) after the
    // 1/sqrt(2) scaling, giving weights (2/3, 1/3).
    Matrix proj(2, 2);
    proj(0, 0) = 1.0;  // q = [v_star[0], 0]
    const double c = 0.25, root2 = std::sqrt(2.0);
    Matrix keys = Matrix::from_rows({{root2 * (std::log(2.0) + c), 0.0}, {root2 * c, 0.0}});
    Matrix values = Matrix::from_rows({{3.0}, {9.0}});
    Vec out = enhance_bank({1.0, 99.0}, keys, values, proj);
    CHECK(out[0] == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("memory bank ring keeps the newest snapshots") {
    MemoryBank bank(2);
    bank.push({1.0}, {10.0});
    bank.push({2.0}, {20.0});
    bank.push({3.0}, {30.0});
    CHECK(bank.size() == 2);
    CHECK(bank.keys().row(0) == Vec{2.0});
    CHECK(bank.keys().row(1) == Vec{3.0});
    CHECK(bank.values().row(1) == Vec{30.0});
}

TEST_CASE("stationary_variance closed form") {
    CHECK(stationary_variance(1.0, {2.5})[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(stationary_variance(1e-9, {1.0})[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(stationary_variance(0.04, {1.0})[0] == doctest::Approx(0.04 / 1.96).epsilon(1e-12));
    CHECK(stationary_variance_approx(0.04, {1.0})[0] == doctest::Approx(0.02).epsilon(1e-15));
    CHECK_THROWS_AS(stationary_variance(0.0, {1.0}), std::domain_error);
}

TEST_CASE("steady_state_bias closed form") {
    CHECK(steady_state_bias({0.0, 0.0}, 0.5) == Vec{0.0, 0.0});
    CHECK(steady_state_bias({0.3}, 1.0)[0] == doctest::Approx(-0.3).epsilon(1e-15));
    CHECK(steady_state_bias({0.01}, 0.04)[0] == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK_THROWS_AS(steady_state_bias({0.1}, 0.0), std::domain_error);
}

TEST_CASE("lambda_lower_bound") {
    CHECK(lambda_lower_bound({0.01}, 0.25) == doctest::Approx(0.04).epsilon(1e-15));
    CHECK(lambda_lower_bound({0.0, 0.0}, 0.1) == 0.0);
    double b1 = lambda_lower_bound({0.02, 0.03}, 0.7);
    double b2 = lambda_lower_bound({0.04, 0.06}, 0.7);
    CHECK(b2 == doctest::Approx(2.0 * b1).epsilon(1e-14));
    CHECK_THROWS_AS(lambda_lower_bound({0.1}, 0.0), std::domain_error);
}

TEST_CASE("total_error decomposition") {
    LambdaSweepRow row = total_error(0.04, {std::sqrt(1.6e-5)}, 1.0);
    CHECK(row.bias_sq == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(row.variance == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(row.total == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(row.total == row.bias_sq + row.variance);  // exact fp identity

    LambdaSweepRow pure = total_error(0.3, {0.0}, 2.0);
    CHECK(pure.total == doctest::Approx(0.3).epsilon(1e-15));
    LambdaSweepRow memoryless = total_error(1.0, {0.0}, 5.0);
    CHECK(memoryless.total == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("optimal_lambda closed form and homogeneity") {
    CHECK(optimal_lambda({std::sqrt(2.0)}, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
    double l1 = optimal_lambda({0.003}, 1.0);
    double l2 = optimal_lambda({0.003 * std::sqrt(8.0)}, 1.0);
    CHECK(l2 == doctest::Approx(2.0 * l1).epsilon(1e-12));
    CHECK_THROWS_AS(optimal_lambda({0.0}, 1.0), std::domain_error);
}

TEST_CASE("optimal_lambda beats every grid point") {
    Vec delta{0.004};
    double sigma = 1.0;
    double opt = optimal_lambda(delta, sigma);
    double best = total_error(opt, delta, sigma).total;
    for (int i = 1; i <= 10000; ++i) {
        double lambda = 3.0 * opt * i / 10000.0;
        CHECK(best <= total_error(lambda, delta, sigma).total + 1e-15);
    }
}

TEST_CASE("lower-bound consistency ties bias norm to epsilon") {
    RngStream rng(8);
    for (int rep = 0; rep < 100; ++rep) {
        Vec delta(3);
        for (double& x : delta) x = rng.uniform(-0.1, 0.1);
        double eps = rng.uniform(0.01, 2.0);
        if (norm2(delta) == 0.0) continue;
        double lambda = lambda_lower_bound(delta, eps);
        CHECK(std::abs(norm2(steady_state_bias(delta, lambda)) - eps) <= 1e-12);
    }
}

TEST_CASE("simulate_memory deterministic chain with no noise or drift") {
    NoiseModel model{Vec{1.0, -2.0}, Vec(2, 0.0), Vec(2, 0.0)};
    SimulationTrace trace = simulate_memory(model, 0.1, 50, 4, RngStream(1));
    for (std::size_t t = 0; t < trace.steps; ++t)
        for (std::size_t c = 0; c < trace.width; ++c) {
            CHECK(trace.variance[t][c] == 0.0);
            CHECK(std::abs(trace.bias[t][c]) <= 1e-12);
        }
}

TEST_CASE("simulate_memory lambda=1 reproduces the input variance") {
    NoiseModel model{Vec{0.0}, Vec{1.0}, Vec{0.0}};
    SimulationTrace trace = simulate_memory(model, 1.0, 200, 4000, RngStream(2));
    double v = trace.tail_variance()[0];
    CHECK(std::abs(v - 1.0) <= 0.05);
}

TEST_CASE("simulate_memory stationary variance matches the closed form") {
    // Reduced-size version of the law; the acceptance suite runs it at scale.
    NoiseModel model{Vec(2, 0.0), Vec(2, 1.0), Vec(2, 0.0)};
    double lambda = 0.04;
    SimulationTrace trace = simulate_memory(model, lambda, 20000, 400, RngStream(3));
    Vec expect = stationary_variance(lambda, model.sigma_diag);
    Vec got = trace.tail_variance();
    for (std::size_t c = 0; c < 2; ++c)
        CHECK(std::abs(got[c] - expect[c]) / expect[c] <= 0.05);
}

TEST_CASE("simulate_memory cross-trial mean approaches the base feature") {
    NoiseModel model{Vec{2.0}, Vec{1.0}, Vec{0.0}};
    double lambda = 0.1;
    std::size_t trials = 2000;
    SimulationTrace trace = simulate_memory(model, lambda, 2000, trials, RngStream(4));
    double bound = 4.0 * std::sqrt(lambda * 1.0 / ((2.0 - lambda) * double(trials)));
    CHECK(std::abs(trace.mean.back()[0] - 2.0) <= bound);
}

TEST_CASE("simulate_memory drift bias converges to -delta/lambda") {
    double lambda = 0.05;
    NoiseModel model{Vec{0.0}, Vec{0.0}, Vec{0.01}};
    auto steps = static_cast<std::size_t>(10.0 / lambda);
    SimulationTrace trace = simulate_memory(model, lambda, steps, 1, RngStream(5));
    double want = -0.01 / lambda;
    CHECK(std::abs(trace.bias.back()[0] - want) / std::abs(want) <= 0.01);
}

TEST_CASE("simulate_memory results are independent of trial evaluation seed order") {
    NoiseModel model{Vec{0.0}, Vec{1.0}, Vec{0.0}};
    SimulationTrace a = simulate_memory(model, 0.2, 100, 50, RngStream(9));
    SimulationTrace b = simulate_memory(model, 0.2, 100, 50, RngStream(9));
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
}

TEST_CASE("sweep_lambda analytic argmin on the reference grid") {
    NoiseModel model{Vec(1, 0.0), Vec(1, 1.0), Vec(1, std::sqrt(1.6e-5))};
    std::vector<double> grid{0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1};
    auto rows = sweep_lambda(grid, model, 1, 1, RngStream(1), false);
    CHECK(rows.size() == grid.size());
    CHECK(grid[argmin_analytic(rows)] == 0.04);
    CHECK_THROWS_AS(sweep_lambda({}, model, 1, 1, RngStream(1), false), std::invalid_argument);
}

TEST_CASE("sweep_lambda singleton grid is its own argmin") {
    NoiseModel model{Vec(1, 0.0), Vec(1, 1.0), Vec(1, 0.004)};
    auto rows = sweep_lambda({0.04}, model, 500, 50, RngStream(6));
    CHECK(argmin_analytic(rows) == 0);
    CHECK(argmin_empirical(rows) == 0);
}

TEST_CASE("sweep_lambda empirical argmin lands within one grid step of analytic") {
    NoiseModel model{Vec(4, 0.0), Vec(4, 1.0), Vec(4, std::sqrt(1.6e-5 / 4.0))};
    std::vector<double> grid{0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1};
    auto rows = sweep_lambda(grid, model, 8000, 300, RngStream(10));
    auto ia = argmin_analytic(rows);
    auto ie = argmin_empirical(rows);
    CHECK(std::abs(static_cast<int>(ia) - static_cast<int>(ie)) <= 1);
}
