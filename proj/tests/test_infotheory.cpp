#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "visa/infotheory.hpp"
#include "visa/rng.hpp"

using namespace visa;
using namespace visa::infotheory;

namespace {

Distribution random_distribution(RngStream& rng, std::size_t n) {
    Vec p(n);
    double sum = 0.0;
    for (double& x : p) {
        x = rng.uniform();
        sum += x;
    }
    for (double& x : p) x /= sum;
    return Distribution{{}, p};
}

JointTable random_joint(RngStream& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    double sum = 0.0;
    for (double& x : m.data()) {
        x = rng.uniform();
        sum += x;
    }
    for (double& x : m.data()) x /= sum;
    return JointTable{{}, {}, m};
}

}  // namespace

TEST_CASE("entropy basics") {
    CHECK(entropy(Distribution{{}, {0.0, 1.0, 0.0}}) == 0.0);
    CHECK(entropy(Distribution::uniform(26)) == doctest::Approx(std::log(26.0)).epsilon(1e-12));
    // -0.9 ln 0.9 - 0.1 ln 0.1
    CHECK(entropy(Distribution{{}, {0.9, 0.1}}) == doctest::Approx(0.325083).epsilon(1e-5));
    CHECK_THROWS_AS(entropy(Distribution{{}, {0.9, 0.2}}), std::invalid_argument);
    CHECK_THROWS_AS(entropy(Distribution{{}, {1.1, -0.1}}), std::invalid_argument);
}

TEST_CASE("entropy is invariant under vocabulary relabeling") {
    RngStream rng(1);
    for (int rep = 0; rep < 100; ++rep) {
        Distribution d = random_distribution(rng, 8);
        double h = entropy(d);
        Distribution shuffled = d;
        for (std::size_t i = shuffled.p.size() - 1; i > 0; --i)
            std::swap(shuffled.p[i], shuffled.p[rng.below(i + 1)]);
        CHECK(entropy(shuffled) == doctest::Approx(h).epsilon(1e-12));
    }
}

TEST_CASE("conditional entropy of independent and deterministic joints") {
    // independent: P(r,c) = P(r) P(c)
    Vec pr{0.7, 0.3}, pc{0.2, 0.5, 0.3};
    Matrix joint(2, 3);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) joint(r, c) = pr[r] * pc[c];
    JointTable t{{}, {}, joint};
    CHECK(conditional_entropy(t) == doctest::Approx(entropy(Distribution{{}, pr})).epsilon(1e-12));

    Matrix det(2, 2);
    det(0, 0) = 0.6;
    det(1, 1) = 0.4;
    CHECK(conditional_entropy(JointTable{{}, {}, det}) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("conditional entropy 2x2 fixture") {
    Matrix m(2, 2, Vec{0.4, 0.1, 0.1, 0.4});
    CHECK(conditional_entropy(JointTable{{}, {}, m}) == doctest::Approx(0.500402).epsilon(1e-5));
}

TEST_CASE("conditioning never increases entropy") {
    RngStream rng(2);
    for (int rep = 0; rep < 2000; ++rep) {
        JointTable t = random_joint(rng, 2 + rng.below(5), 2 + rng.below(5));
        double hr = entropy(Distribution{{}, t.marginal_rows()});
        CHECK(conditional_entropy(t) <= hr + 1e-12);
    }
}

TEST_CASE("bayes posterior") {
    Distribution uniform = Distribution::uniform(4);
    Vec lik{0.4, 0.1, 0.3, 0.2};
    Distribution post = bayes_posterior(uniform, lik);
    for (int i = 0; i < 4; ++i) CHECK(post.p[i] == doctest::Approx(lik[i]).epsilon(1e-12));

    Distribution prior{{}, {0.8, 0.2}};
    Distribution same = bayes_posterior(prior, {3.0, 3.0});
    CHECK(std::abs(same.p[0] - 0.8) <= 1e-12);
    CHECK(std::abs(same.p[1] - 0.2) <= 1e-12);

    Distribution mixed = bayes_posterior(prior, {0.1, 0.9});
    CHECK(mixed.p[0] == doctest::Approx(0.30769230769).epsilon(1e-9));
    CHECK(mixed.p[1] == doctest::Approx(0.69230769231).epsilon(1e-9));

    CHECK_THROWS_AS(bayes_posterior(prior, {0.0, 0.0}), std::domain_error);
    CHECK_THROWS_AS(bayes_posterior(prior, {-1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("kl divergence values and properties") {
    Distribution p{{}, {0.9, 0.1}};
    Distribution q{{}, {0.5, 0.5}};
    CHECK(kl_divergence(p, p) == 0.0);
    CHECK(kl_divergence(p, q) == doctest::Approx(0.368064).epsilon(1e-5));
    CHECK_THROWS_AS(kl_divergence(Distribution{{}, {1.0, 0.0}}, Distribution{{}, {0.0, 1.0}}),
                    std::domain_error);

    RngStream rng(3);
    for (int rep = 0; rep < 500; ++rep) {
        Distribution a = random_distribution(rng, 6);
        Distribution b = random_distribution(rng, 6);
        double d = kl_divergence(a, b);
        CHECK(d >= 0.0);
        bool equal = true;
        for (int i = 0; i < 6; ++i) equal = equal && std::abs(a.p[i] - b.p[i]) < 1e-15;
        if (!equal) CHECK(d > 0.0);
    }
}

TEST_CASE("nats to bits conversion") {
    CHECK(nats_to_bits(std::log(2.0)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("prior reliance report") {
    Distribution prior{{}, {0.6, 0.4}};
    std::vector<Distribution> same{prior, prior, prior};
    PriorRelianceReport rep = prior_reliance_report(same, prior);
    CHECK(rep.mean_kl == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(rep.gap) <= 1e-12);

    std::vector<Distribution> posts{{{}, {0.9, 0.1}}, {{}, {0.2, 0.8}}};
    PriorRelianceReport r2 = prior_reliance_report(posts, prior);
    double want = (kl_divergence(posts[0], prior) + kl_divergence(posts[1], prior)) / 2.0;
    CHECK(r2.mean_kl == doctest::Approx(want).epsilon(1e-12));
    CHECK(r2.mean_kl >= 0.0);
    // cross-entropy minus posterior entropy recovers the same quantity
    CHECK(std::abs(r2.gap) <= 1e-12);
    CHECK(r2.per_instance_kl.size() == 2);
}

TEST_CASE("confusion matrix from datasets") {
    sg::Vocabulary vocab;
    vocab.objects = {"person", "sofa", "floor"};
    vocab.attention = {"looking_at"};
    vocab.spatial = {"on", "beneath"};
    vocab.contacting = {"sit_on"};

    sg::SceneGraphFrame gtf;
    gtf.video = "v0";
    gtf.frame = 0;
    gtf.entities = {{0, 0, {0, 0, 10, 10}, {}, {}},
                    {1, 1, {5, 5, 20, 20}, {}, {}},
                    {2, 2, {0, 0, 50, 50}, {}, {}}};
    gtf.relations = {{0, 1, 3, 1.0},   // person sit_on sofa
                     {0, 1, 1, 1.0},   // person on sofa
                     {0, 2, 1, 1.0}};  // person on floor

    sg::SceneGraphFrame pf = gtf;
    pf.relations = {{0, 1, 3, 0.9},    // correct sit_on (top-1 for pair 0-1)
                    {0, 1, 1, 0.4},
                    {0, 2, 2, 0.8}};   // beneath instead of on

    auto cm = build_confusion_matrix({pf}, {gtf}, vocab.predicates());
    // pair (0,1) top-1 is sit_on: both GT instances of that pair count it
    CHECK(cm.counts[3][3] == 1);
    CHECK(cm.counts[1][3] == 1);
    CHECK(cm.counts[1][2] == 1);
    CHECK(cm.total() == 3);

    // perfect predictions give a diagonal matrix with GT row sums
    sg::SceneGraphFrame perfect = gtf;
    perfect.relations = {{0, 1, 3, 1.0}, {0, 2, 1, 1.0}};
    sg::SceneGraphFrame single = gtf;
    single.relations = {{0, 1, 3, 1.0}, {0, 2, 1, 1.0}};
    auto dm = build_confusion_matrix({perfect}, {single}, vocab.predicates());
    CHECK(dm.counts[3][3] == 1);
    CHECK(dm.counts[1][1] == 1);
    CHECK(dm.total() == 2);
    auto rows = dm.row_sums();
    CHECK(rows[3] == 1);
    CHECK(rows[1] == 1);

    // class-pair filter keeps only person-sofa instances
    auto fm = build_confusion_matrix({pf}, {gtf}, vocab.predicates(), std::make_pair(0, 1));
    CHECK(fm.total() == 2);
}

TEST_CASE("confusion matrix counts unmatched pairs separately") {
    sg::SceneGraphFrame gtf;
    gtf.video = "v0";
    gtf.frame = 1;
    gtf.entities = {{0, 0, {0, 0, 5, 5}, {}, {}}, {1, 1, {1, 1, 6, 6}, {}, {}}};
    gtf.relations = {{0, 1, 0, 1.0}};
    auto cm = build_confusion_matrix({}, {gtf}, {"a", "b"});
    CHECK(cm.total() == 0);
    CHECK(cm.unmatched == 1);
}
