#pragma once

// Entropy, conditional entropy, Bayes posterior, and KL divergence over
// finite labeled distributions, plus the confusion-matrix and prior-reliance
// reports built on them. Natural log throughout; helpers convert to bits.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "visa/linalg.hpp"
#include "visa/scene_graph.hpp"

namespace visa::infotheory {

constexpr double kDistributionTol = 1e-9;

inline constexpr double nats_to_bits(double nats) { return nats * 1.4426950408889634; }

struct Distribution {
    std::vector<std::string> labels;  // optional, may be empty
    Vec p;

    void validate() const {
        double sum = 0.0;
        for (double x : p) {
            if (!(x >= 0.0)) throw std::invalid_argument("Distribution: negative probability");
            sum += x;
        }
        if (std::abs(sum - 1.0) > kDistributionTol)
            throw std::invalid_argument("Distribution: probabilities sum to " + std::to_string(sum));
        if (!labels.empty() && labels.size() != p.size())
            throw std::invalid_argument("Distribution: label/probability size mismatch");
    }

    static Distribution uniform(std::size_t n) {
        return Distribution{{}, Vec(n, 1.0 / static_cast<double>(n))};
    }
};

// Joint P(r, c): rows are outcomes of R, columns are context buckets.
struct JointTable {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    Matrix p;

    void validate() const {
        double sum = 0.0;
        for (double x : p.data()) {
            if (!(x >= 0.0)) throw std::invalid_argument("JointTable: negative probability");
            sum += x;
        }
        if (std::abs(sum - 1.0) > kDistributionTol)
            throw std::invalid_argument("JointTable: total probability is " + std::to_string(sum));
    }

    Vec marginal_rows() const {
        Vec out(p.rows(), 0.0);
        for (std::size_t r = 0; r < p.rows(); ++r)
            for (std::size_t c = 0; c < p.cols(); ++c) out[r] += p(r, c);
        return out;
    }

    Vec marginal_cols() const {
        Vec out(p.cols(), 0.0);
        for (std::size_t r = 0; r < p.rows(); ++r)
            for (std::size_t c = 0; c < p.cols(); ++c) out[c] += p(r, c);
        return out;
    }
};

// H(p) = -sum p ln p, with 0 ln 0 = 0.
inline double entropy(const Distribution& dist) {
    dist.validate();
    double h = 0.0;
    for (double x : dist.p)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

// H(R|C) = -sum_{r,c} P(r,c) ln P(r|c).
inline double conditional_entropy(const JointTable& joint) {
    joint.validate();
    Vec pc = joint.marginal_cols();
    double h = 0.0;
    for (std::size_t r = 0; r < joint.p.rows(); ++r)
        for (std::size_t c = 0; c < joint.p.cols(); ++c) {
            double prc = joint.p(r, c);
            if (prc > 0.0) h -= prc * std::log(prc / pc[c]);
        }
    return h;
}

// posterior ∝ prior .* likelihood, normalized.
inline Distribution bayes_posterior(const Distribution& prior, const Vec& likelihood) {
    prior.validate();
    require_same_width(prior.p, likelihood, "bayes_posterior");
    Vec post(prior.p.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < post.size(); ++i) {
        if (!(likelihood[i] >= 0.0))
            throw std::invalid_argument("bayes_posterior: negative likelihood");
        post[i] = prior.p[i] * likelihood[i];
        sum += post[i];
    }
    if (sum <= 0.0)
        throw std::domain_error("bayes_posterior: evidence is zero everywhere the prior has mass");
    for (double& x : post) x /= sum;
    return Distribution{prior.labels, std::move(post)};
}

// D_KL(p || q) = sum p ln(p/q). Requires q > 0 wherever p > 0; support
// violations are hard errors, never clamped.
inline double kl_divergence(const Distribution& p, const Distribution& q) {
    p.validate();
    q.validate();
    require_same_width(p.p, q.p, "kl_divergence");
    double d = 0.0;
    for (std::size_t i = 0; i < p.p.size(); ++i) {
        if (p.p[i] > 0.0) {
            if (q.p[i] <= 0.0)
                throw std::domain_error("kl_divergence: support violation at index " +
                                        std::to_string(i));
            d += p.p[i] * std::log(p.p[i] / q.p[i]);
        }
    }
    return d;
}

struct ConfusionMatrix {
    std::vector<std::string> labels;          // predicate vocabulary
    std::vector<std::vector<long>> counts;    // [true][predicted]
    long unmatched = 0;                       // GT instances with no prediction for the pair

    explicit ConfusionMatrix(std::vector<std::string> labels_in = {})
        : labels(std::move(labels_in)),
          counts(labels.size(), std::vector<long>(labels.size(), 0)) {}

    long total() const {
        long t = 0;
        for (const auto& row : counts)
            for (long c : row) t += c;
        return t;
    }

    std::vector<long> row_sums() const {
        std::vector<long> out(counts.size(), 0);
        for (std::size_t r = 0; r < counts.size(); ++r)
            for (long c : counts[r]) out[r] += c;
        return out;
    }
};

// Counts (true predicate, top-1 predicted predicate) per GT relation
// instance. Pairs are matched by entity id; the top-1 prediction for a pair
// is its highest-scored predicate (ties -> lowest predicate id). An optional
// (subject class, object class) filter restricts to one pair type.
inline ConfusionMatrix build_confusion_matrix(
    const sg::Dataset& pred, const sg::Dataset& gt, std::vector<std::string> predicate_labels,
    std::optional<std::pair<int, int>> class_filter = std::nullopt) {
    ConfusionMatrix cm(std::move(predicate_labels));
    const auto n = static_cast<int>(cm.labels.size());

    std::unordered_map<std::string, const sg::SceneGraphFrame*> by_key;
    for (const auto& f : pred) by_key[f.key()] = &f;

    for (const auto& gf : gt) {
        auto it = by_key.find(gf.key());
        const sg::SceneGraphFrame* pf = it == by_key.end() ? nullptr : it->second;
        for (const auto& gr : gf.relations) {
            if (gr.predicate < 0 || gr.predicate >= n)
                throw std::invalid_argument("build_confusion_matrix: predicate vocabulary mismatch");
            if (class_filter) {
                const sg::Entity* s = gf.find_entity(gr.subject);
                const sg::Entity* o = gf.find_entity(gr.object);
                if (!s || !o || s->cls != class_filter->first || o->cls != class_filter->second)
                    continue;
            }
            const sg::Relation* top = nullptr;
            if (pf) {
                for (const auto& pr : pf->relations) {
                    if (pr.subject != gr.subject || pr.object != gr.object) continue;
                    if (!top || pr.score > top->score ||
                        (pr.score == top->score && pr.predicate < top->predicate))
                        top = &pr;
                }
            }
            if (!top) {
                ++cm.unmatched;
                continue;
            }
            if (top->predicate < 0 || top->predicate >= n)
                throw std::invalid_argument("build_confusion_matrix: predicate vocabulary mismatch");
            ++cm.counts[static_cast<std::size_t>(gr.predicate)]
                       [static_cast<std::size_t>(top->predicate)];
        }
    }
    return cm;
}

struct PriorRelianceReport {
    std::vector<double> per_instance_kl;
    double mean_kl = 0.0;
    double cross_entropy_vs_prior = 0.0;  // mean over instances of -sum post ln prior
    double posterior_entropy = 0.0;       // mean over instances of H(posterior)
    // mean_kl and (cross_entropy_vs_prior - posterior_entropy) are computed
    // independently; gap reports the numerical discrepancy between them.
    double entropy_difference = 0.0;
    double gap = 0.0;
};

inline PriorRelianceReport prior_reliance_report(const std::vector<Distribution>& posteriors,
                                                 const Distribution& prior) {
    prior.validate();
    PriorRelianceReport rep;
    if (posteriors.empty()) return rep;
    for (const auto& post : posteriors) {
        rep.per_instance_kl.push_back(kl_divergence(post, prior));
        rep.mean_kl += rep.per_instance_kl.back();
        double ce = 0.0;
        for (std::size_t i = 0; i < post.p.size(); ++i)
            if (post.p[i] > 0.0) ce -= post.p[i] * std::log(prior.p[i]);
        rep.cross_entropy_vs_prior += ce;
        rep.posterior_entropy += entropy(post);
    }
    const double n = static_cast<double>(posteriors.size());
    rep.mean_kl /= n;
    rep.cross_entropy_vs_prior /= n;
    rep.posterior_entropy /= n;
    rep.entropy_difference = rep.cross_entropy_vs_prior - rep.posterior_entropy;
    rep.gap = rep.mean_kl - rep.entropy_difference;
    return rep;
}

}  // namespace visa::infotheory
