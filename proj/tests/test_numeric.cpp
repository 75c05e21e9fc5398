#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "visa/nn.hpp"
#include "visa/rng.hpp"

using namespace visa;

namespace {

// Independent dense-arithmetic oracle for the MLP fixture.
Vec naive_mlp(const MlpParams& p, const Vec& x) {
    std::size_t n = x.size();
    Vec h(n, 0.0), y(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double acc = p.b1[r];
        for (std::size_t c = 0; c < n; ++c) acc += p.w1(r, c) * x[c];
        h[r] = 1.0 / (1.0 + std::exp(-acc));
    }
    for (std::size_t r = 0; r < n; ++r) {
        double acc = p.b2[r];
        for (std::size_t c = 0; c < n; ++c) acc += p.w2(r, c) * h[c];
        y[r] = acc;
    }
    return y;
}

}  // namespace

TEST_CASE("sigmoid fixed points and saturation") {
    CHECK(sigmoid(Vec{0.0})[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sigmoid(Vec{40.0})[0] == doctest::Approx(1.0).epsilon(1e-12));
    // reference value from arbitrary-precision evaluation of 1/(1+e^-1)
    CHECK(sigmoid(Vec{1.0})[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK_THROWS_AS(sigmoid(Vec{std::nan("")}), std::invalid_argument);
}

TEST_CASE("sigmoid symmetry property") {
    RngStream rng(11);
    for (int i = 0; i < 200; ++i) {
        double x = rng.uniform(-30.0, 30.0);
        CHECK(std::abs(sigmoid(Vec{-x})[0] - (1.0 - sigmoid(Vec{x})[0])) <= 1e-15);
    }
}

TEST_CASE("softmax basics") {
    Vec u = softmax({0.0, 0.0});
    CHECK(u[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(u[1] == doctest::Approx(0.5).epsilon(1e-15));

    Vec logs = softmax({std::log(1.0), std::log(2.0), std::log(3.0)});
    CHECK(logs[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(logs[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    CHECK(logs[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-12));

    CHECK_THROWS_AS(softmax(Vec{}), std::invalid_argument);
}

TEST_CASE("softmax shift invariance and normalization up to |x|<=500") {
    RngStream rng(12);
    for (int i = 0; i < 100; ++i) {
        Vec x(5);
        for (double& v : x) v = rng.uniform(-500.0, 500.0);
        Vec a = softmax(x);
        double sum = 0.0;
        for (double v : a) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        double c = rng.uniform(-100.0, 100.0);
        Vec shifted = x;
        for (double& v : shifted) v += c;
        Vec b = softmax(shifted);
        for (std::size_t k = 0; k < x.size(); ++k)
            CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-9));
        // order preservation (ties allowed where the tails underflow)
        for (std::size_t k = 0; k + 1 < x.size(); ++k) {
            if (x[k] < x[k + 1]) CHECK(a[k] <= a[k + 1]);
            if (x[k] > x[k + 1]) CHECK(a[k] >= a[k + 1]);
        }
    }
}

TEST_CASE("mlp_forward zero weights and identity fixture") {
    MlpParams zero{Matrix(3, 3), Vec(3, 0.0), Matrix(3, 3), Vec{1.0, -2.0, 0.5}};
    Vec out = mlp_forward(zero, {9.0, 9.0, 9.0});
    CHECK(out == Vec{1.0, -2.0, 0.5});

    // W1 = 0 so hidden = sigmoid(0) = 0.5; W2 = 2I and b2 = -1 invert that.
    MlpParams inv{Matrix(2, 2), Vec(2, 0.0), Matrix(2, 2), Vec(2, -1.0)};
    inv.w2(0, 0) = inv.w2(1, 1) = 2.0;
    Vec id = mlp_forward(inv, {3.0, -4.0});
    CHECK(id[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(id[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("mlp_forward matches the naive oracle on seeded params") {
    MlpParams p = make_mlp_params(2, 99);
    Vec x{1.0, 0.0};
    Vec got = mlp_forward(p, x);
    Vec want = naive_mlp(p, x);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));

    CHECK_THROWS_AS(mlp_forward(p, Vec{1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("mlp params json round trip") {
    nlohmann::json j = {{"w1", {{0.0, 0.0}, {0.0, 0.0}}},
                        {"b1", {0.0, 0.0}},
                        {"w2", {{0.0, 0.0}, {0.0, 0.0}}},
                        {"b2", {4.0, 5.0}}};
    MlpParams p = mlp_params_from_json(j);
    CHECK(mlp_forward(p, {1.0, 1.0}) == Vec{4.0, 5.0});
}

TEST_CASE("attention single key and identical keys") {
    Matrix q(1, 2, Vec{0.3, -0.7});
    Matrix k(1, 2, Vec{5.0, 5.0});
    Matrix v(1, 3, Vec{1.0, 2.0, 3.0});
    Matrix out = attention(q, k, v);
    CHECK(out.row(0) == Vec{1.0, 2.0, 3.0});

    Matrix k2 = Matrix::from_rows({{1.0, 2.0}, {1.0, 2.0}});
    Matrix v2 = Matrix::from_rows({{0.0, 10.0}, {4.0, 2.0}});
    Matrix mean = attention(q, k2, v2);
    CHECK(mean(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(mean(0, 1) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("attention closed-form two-key weights") {
    // scores after scaling: ln2 + c and c  ->  weights (2/3, 1/3)
    const double c = 0.37;
    const double d = 4.0;  // key width, so scaling divides by 2
    Matrix q(1, 4, Vec{2.0 * (std::log(2.0) + c), 0.0, 0.0, 0.0});
    Matrix k = Matrix::from_rows({{1.0, 0, 0, 0}, {c / (std::log(2.0) + c), 0, 0, 0}});
    (void)d;
    Matrix v = Matrix::from_rows({{3.0}, {9.0}});
    Matrix out = attention(q, k, v);
    CHECK(out(0, 0) == doctest::Approx(2.0 / 3.0 * 3.0 + 1.0 / 3.0 * 9.0).epsilon(1e-12));
}

TEST_CASE("attention rows stay inside the V column envelope") {
    RngStream rng(21);
    for (int rep = 0; rep < 50; ++rep) {
        Matrix q(2, 3), k(4, 3), v(4, 2);
        for (double& x : q.data()) x = rng.uniform(-3, 3);
        for (double& x : k.data()) x = rng.uniform(-3, 3);
        for (double& x : v.data()) x = rng.uniform(-5, 5);
        Matrix out = attention(q, k, v);
        for (std::size_t c = 0; c < v.cols(); ++c) {
            double lo = v(0, c), hi = v(0, c);
            for (std::size_t r = 1; r < v.rows(); ++r) {
                lo = std::min(lo, v(r, c));
                hi = std::max(hi, v(r, c));
            }
            for (std::size_t r = 0; r < out.rows(); ++r) {
                CHECK(out(r, c) >= lo - 1e-12);
                CHECK(out(r, c) <= hi + 1e-12);
            }
        }
    }
    CHECK_THROWS_AS(attention(Matrix(1, 2), Matrix(1, 3), Matrix(1, 1)), std::invalid_argument);
    CHECK_THROWS_AS(attention(Matrix(1, 2), Matrix(2, 2), Matrix(1, 1)), std::invalid_argument);
}

TEST_CASE("gaussian_sample degenerate and deterministic") {
    RngStream a(77), b(77);
    Vec mean{1.0, -2.0, 3.0};
    CHECK(gaussian_sample(a, mean, Vec(3, 0.0)) == mean);
    Vec s1 = gaussian_sample(a, mean, Vec{1.0, 2.0, 3.0});
    Vec s2 = gaussian_sample(b, mean, Vec(3, 0.0)), s3 = gaussian_sample(b, mean, Vec{1.0, 2.0, 3.0});
    CHECK(s1 == s3);
    CHECK_THROWS_AS(gaussian_sample(a, mean, Vec{1.0, -0.5, 1.0}), std::invalid_argument);
}

TEST_CASE("gaussian_sample law of large numbers and variance match") {
    RngStream rng(123);
    const int n = 200000;
    Vec mean{2.0, -1.0};
    Vec cov{4.0, 0.25};
    Vec sum(2, 0.0), sumsq(2, 0.0);
    for (int i = 0; i < n; ++i) {
        Vec s = gaussian_sample(rng, mean, cov);
        for (int c = 0; c < 2; ++c) {
            sum[c] += s[c];
            sumsq[c] += s[c] * s[c];
        }
    }
    for (int c = 0; c < 2; ++c) {
        double mu = sum[c] / n;
        double sigma = std::sqrt(cov[c]);
        CHECK(std::abs(mu - mean[c]) <= 4.0 * sigma / std::sqrt(double(n)));
        double var = sumsq[c] / n - mu * mu;
        CHECK(std::abs(var - cov[c]) / cov[c] <= 0.05);
    }
}

TEST_CASE("rng streams are reproducible and substreams differ") {
    RngStream a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    RngStream s0 = a.substream(0), s1 = a.substream(1);
    CHECK(s0.next_u64() != s1.next_u64());
}
