#pragma once

// Iterative relation generation: composite pair features, per-category
// predicate heads, integrated triplet embeddings, and the hierarchical
// decompose/fuse loop that re-scores predicates with semantic context.

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "visa/linalg.hpp"
#include "visa/nn.hpp"
#include "visa/rng.hpp"
#include "visa/scene_graph.hpp"

namespace visa::irg {

struct IrgConfig {
    std::size_t d_v = 16;   // visual feature width (input)
    std::size_t d_vp = 8;   // f_v output width
    std::size_t d_u = 8;    // f_u / box-embedding width
    std::size_t d_s = 8;    // semantic embedding width
    std::size_t attn_dim = 8;
    double frame_width = 640.0;
    double frame_height = 480.0;

    std::size_t composite_width() const { return 2 * d_vp + d_u + 2 * d_s; }
    std::size_t triplet_row_width() const { return 2 * d_vp + d_s; }
    std::size_t pooled_width() const { return (composite_width() + 1) / 2; }
    std::size_t hse_out_width() const { return attn_dim + pooled_width(); }
    std::size_t iter_input_width() const { return composite_width() + hse_out_width(); }
};

struct EntityFeature {
    int id = 0;
    int cls = 0;
    sg::Box box;
    Vec visual;
    Vec semantic;
};

// Deterministic unit-norm stand-in for a pretrained word embedding.
inline Vec pseudo_glove(const std::string& label, std::size_t width, std::uint64_t seed) {
    if (width < 1) throw std::invalid_argument("pseudo_glove: width must be >= 1");
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : label) {
        h ^= c;
        h *= 1099511628211ull;
    }
    RngStream rng(detail::splitmix64(h ^ seed));
    Vec v(width);
    for (double& x : v) x = rng.normal();
    double n = norm2(v);
    if (n == 0.0) { v[0] = 1.0; n = 1.0; }  // never happens in practice
    return scale(std::move(v), 1.0 / n);
}

inline sg::Box union_box(const sg::Box& a, const sg::Box& b) {
    return {std::min(a.x1, b.x1), std::min(a.y1, b.y1),
            std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

// RoIAlign stand-in: elementwise feature mean concatenated with the union-box
// geometry normalized by the frame size. Width d_v + 4.
inline Vec union_feature(const sg::Box& b_j, const sg::Box& b_i, const Vec& v_j, const Vec& v_i,
                         double frame_w, double frame_h) {
    if (!b_j.valid() || !b_i.valid())
        throw std::invalid_argument("union_feature: degenerate box");
    require_same_width(v_j, v_i, "union_feature");
    sg::Box u = union_box(b_j, b_i);
    Vec out = scale(add(v_j, v_i), 0.5);
    out.push_back(u.x1 / frame_w);
    out.push_back(u.y1 / frame_h);
    out.push_back(u.x2 / frame_w);
    out.push_back(u.y2 / frame_h);
    return out;
}

// Sinusoidal embedding of the 8 normalized box coordinates, width-matched to
// the f_u output so the two can be summed.
inline Vec box_embed(const sg::Box& b_j, const sg::Box& b_i, std::size_t width,
                     double frame_w, double frame_h) {
    if (!b_j.valid() || !b_i.valid())
        throw std::invalid_argument("box_embed: degenerate box");
    if (width < 1) throw std::invalid_argument("box_embed: width must be >= 1");
    std::array<double, 8> coords = {b_j.x1 / frame_w, b_j.y1 / frame_h, b_j.x2 / frame_w,
                                    b_j.y2 / frame_h, b_i.x1 / frame_w, b_i.y1 / frame_h,
                                    b_i.x2 / frame_w, b_i.y2 / frame_h};
    Vec out(width);
    for (std::size_t m = 0; m < width; ++m) {
        std::size_t k = m % 8;
        double freq = std::pow(100.0, -static_cast<double>(m / 8) * 8.0 / static_cast<double>(width));
        double angle = coords[k] * freq;
        out[m] = (m / 8) % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
    return out;
}

struct PredicateDistributions {
    Vec attention;
    Vec spatial;
    Vec contacting;

    void validate() const {
        for (const Vec* d : {&attention, &spatial, &contacting}) {
            double sum = 0.0;
            for (double x : *d) {
                if (!(x >= 0.0))
                    throw std::invalid_argument("PredicateDistributions: negative probability");
                sum += x;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw std::invalid_argument("PredicateDistributions: category does not sum to 1");
        }
    }
};

// p = f_v(v_j) || f_v(v_i) || (f_u(u) + f_box) || s_j || s_i with recorded
// segment offsets so decomposition is lossless.
struct CompositeFeature {
    Vec data;
    std::array<std::size_t, 6> offsets{};  // 5 segments

    Vec segment(std::size_t i) const {
        return Vec(data.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                   data.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));
    }
};

// Three rows f_v(v_j) || f_k || f_v(v_i), k in {attention, spatial, contacting}.
struct TripletEmbedding {
    Matrix rows;
    std::array<std::size_t, 4> offsets{};  // 3 segments per row
    std::array<int, 3> chosen;             // global predicate id per category

    Vec segment(std::size_t row, std::size_t i) const {
        Vec full = rows.row(row);
        return Vec(full.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                   full.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));
    }
};

struct RelationHeadParams {
    IrgConfig config;
    Matrix f_v;        // d_vp x d_v
    Matrix f_u;        // d_u x (d_v + 4)
    Matrix head_a, head_s, head_c;            // category size x |p|
    Matrix iter_head_a, iter_head_s, iter_head_c;  // category size x (|p| + hse_out)
    Matrix pred_embed;  // predicate count x d_s
    Matrix q_proj;      // attn_dim x pooled(|p|)
    Matrix kv_proj_p;   // attn_dim x (d_vp + d_u + d_s)
    Matrix kv_proj_sc;  // attn_dim x (d_vp + d_s)
    Matrix kv_proj_oc;  // attn_dim x (d_s + d_vp)
    std::array<std::size_t, 3> category_sizes{};  // attention, spatial, contacting

    void validate() const {
        const std::size_t w = config.composite_width();
        if (head_a.cols() != w || head_s.cols() != w || head_c.cols() != w)
            throw std::invalid_argument("RelationHeadParams: head width != composite width");
        if (head_a.rows() != category_sizes[0] || head_s.rows() != category_sizes[1] ||
            head_c.rows() != category_sizes[2])
            throw std::invalid_argument("RelationHeadParams: head size != sub-vocabulary size");
        if (pred_embed.rows() != category_sizes[0] + category_sizes[1] + category_sizes[2] ||
            pred_embed.cols() != config.d_s)
            throw std::invalid_argument("RelationHeadParams: embedding table shape mismatch");
        const std::size_t iw = config.iter_input_width();
        if (iter_head_a.cols() != iw || iter_head_s.cols() != iw || iter_head_c.cols() != iw)
            throw std::invalid_argument("RelationHeadParams: iteration head width mismatch");
    }

    int global_predicate_id(std::size_t category, std::size_t local) const {
        std::size_t off = 0;
        for (std::size_t k = 0; k < category; ++k) off += category_sizes[k];
        return static_cast<int>(off + local);
    }
};

inline Matrix seeded_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
    Matrix m(rows, cols);
    const double s = 1.0 / std::sqrt(static_cast<double>(cols == 0 ? 1 : cols));
    for (double& v : m.data()) v = rng.uniform(-s, s);
    return m;
}

inline RelationHeadParams make_relation_head_params(const IrgConfig& cfg,
                                                    const sg::Vocabulary& vocab,
                                                    std::uint64_t seed) {
    RngStream rng(seed);
    RelationHeadParams p;
    p.config = cfg;
    p.category_sizes = {vocab.attention.size(), vocab.spatial.size(), vocab.contacting.size()};
    const std::size_t w = cfg.composite_width();
    const std::size_t iw = cfg.iter_input_width();
    p.f_v = seeded_matrix(cfg.d_vp, cfg.d_v, rng);
    p.f_u = seeded_matrix(cfg.d_u, cfg.d_v + 4, rng);
    p.head_a = seeded_matrix(p.category_sizes[0], w, rng);
    p.head_s = seeded_matrix(p.category_sizes[1], w, rng);
    p.head_c = seeded_matrix(p.category_sizes[2], w, rng);
    p.iter_head_a = seeded_matrix(p.category_sizes[0], iw, rng);
    p.iter_head_s = seeded_matrix(p.category_sizes[1], iw, rng);
    p.iter_head_c = seeded_matrix(p.category_sizes[2], iw, rng);
    auto names = vocab.predicates();
    p.pred_embed = Matrix(names.size(), cfg.d_s);
    for (std::size_t i = 0; i < names.size(); ++i) {
        Vec e = pseudo_glove(names[i], cfg.d_s, seed);
        for (std::size_t c = 0; c < cfg.d_s; ++c) p.pred_embed(i, c) = e[c];
    }
    p.q_proj = seeded_matrix(cfg.attn_dim, cfg.pooled_width(), rng);
    p.kv_proj_p = seeded_matrix(cfg.attn_dim, cfg.d_vp + cfg.d_u + cfg.d_s, rng);
    p.kv_proj_sc = seeded_matrix(cfg.attn_dim, cfg.d_vp + cfg.d_s, rng);
    p.kv_proj_oc = seeded_matrix(cfg.attn_dim, cfg.d_s + cfg.d_vp, rng);
    p.validate();
    return p;
}

inline CompositeFeature composite_features(const EntityFeature& subj, const EntityFeature& obj,
                                           const RelationHeadParams& params) {
    const IrgConfig& cfg = params.config;
    if (subj.visual.size() != cfg.d_v || obj.visual.size() != cfg.d_v)
        throw std::invalid_argument("composite_features: visual width mismatch");
    if (subj.semantic.size() != cfg.d_s || obj.semantic.size() != cfg.d_s)
        throw std::invalid_argument("composite_features: semantic width mismatch");
    Vec fvj = matvec(params.f_v, subj.visual);
    Vec fvi = matvec(params.f_v, obj.visual);
    Vec u = union_feature(subj.box, obj.box, subj.visual, obj.visual,
                          cfg.frame_width, cfg.frame_height);
    Vec mid = add(matvec(params.f_u, u),
                  box_embed(subj.box, obj.box, cfg.d_u, cfg.frame_width, cfg.frame_height));
    CompositeFeature p;
    p.data = concat(concat(concat(concat(fvj, fvi), mid), subj.semantic), obj.semantic);
    p.offsets = {0, cfg.d_vp, 2 * cfg.d_vp, 2 * cfg.d_vp + cfg.d_u,
                 2 * cfg.d_vp + cfg.d_u + cfg.d_s, cfg.composite_width()};
    return p;
}

inline PredicateDistributions predict_predicates(const CompositeFeature& p,
                                                 const RelationHeadParams& params) {
    params.validate();
    if (p.data.size() != params.config.composite_width())
        throw std::invalid_argument("predict_predicates: composite width mismatch");
    return PredicateDistributions{softmax(matvec(params.head_a, p.data)),
                                  softmax(matvec(params.head_s, p.data)),
                                  softmax(matvec(params.head_c, p.data))};
}

// Ties broken by lowest predicate id.
inline std::size_t argmax_lowest(const Vec& p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

inline TripletEmbedding triplet_embeddings(const EntityFeature& subj, const EntityFeature& obj,
                                           const PredicateDistributions& dists,
                                           const RelationHeadParams& params) {
    dists.validate();
    const IrgConfig& cfg = params.config;
    Vec fvj = matvec(params.f_v, subj.visual);
    Vec fvi = matvec(params.f_v, obj.visual);
    const std::array<const Vec*, 3> cats = {&dists.attention, &dists.spatial, &dists.contacting};
    TripletEmbedding out;
    out.rows = Matrix(3, cfg.triplet_row_width());
    out.offsets = {0, cfg.d_vp, cfg.d_vp + cfg.d_s, cfg.triplet_row_width()};
    for (std::size_t k = 0; k < 3; ++k) {
        if (cats[k]->size() != params.category_sizes[k])
            throw std::invalid_argument("triplet_embeddings: distribution size mismatch");
        std::size_t local = argmax_lowest(*cats[k]);
        int pred = params.global_predicate_id(k, local);
        out.chosen[k] = pred;
        Vec row = concat(concat(fvj, params.pred_embed.row(static_cast<std::size_t>(pred))), fvi);
        for (std::size_t c = 0; c < row.size(); ++c) out.rows(k, c) = row[c];
    }
    return out;
}

// S_p = f_v(v_j) || (f_u + f_box) || s_j; O_p = f_v(v_i) || (f_u + f_box) || s_i.
inline std::pair<Vec, Vec> decompose_composite(const CompositeFeature& p) {
    if (p.offsets.back() != p.data.size())
        throw std::invalid_argument("decompose_composite: malformed offsets");
    Vec s = concat(concat(p.segment(0), p.segment(2)), p.segment(3));
    Vec o = concat(concat(p.segment(1), p.segment(2)), p.segment(4));
    return {std::move(s), std::move(o)};
}

// S_C rows = f_v(v_j) || f_k; O_C rows = f_k || f_v(v_i).
inline std::pair<Matrix, Matrix> decompose_triplets(const TripletEmbedding& c) {
    if (c.offsets.back() != c.rows.cols())
        throw std::invalid_argument("decompose_triplets: malformed offsets");
    std::vector<Vec> s_rows, o_rows;
    for (std::size_t k = 0; k < c.rows.rows(); ++k) {
        s_rows.push_back(concat(c.segment(k, 0), c.segment(k, 1)));
        o_rows.push_back(concat(c.segment(k, 1), c.segment(k, 2)));
    }
    return {Matrix::from_rows(s_rows), Matrix::from_rows(o_rows)};
}

// Stride-two mean pooling; odd widths keep the last element as-is.
inline Vec pool_stride2(const Vec& x) {
    Vec out((x.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < x.size(); i += 2) out[i / 2] = 0.5 * (x[i] + x[i + 1]);
    if (x.size() % 2 == 1) out.back() = x.back();
    return out;
}

// Cross-attention with query = pooled previous embedding; keys/values are the
// projected fine-grained rows. Output = attention result || pooled query.
inline Vec hse_fuse(const Vec& prev_embedding, const Vec& s_p, const Vec& o_p,
                    const Matrix& s_c, const Matrix& o_c, const RelationHeadParams& params) {
    Vec pooled = pool_stride2(prev_embedding);
    if (pooled.size() != params.q_proj.cols())
        throw std::invalid_argument("hse_fuse: pooled query width mismatch");
    Vec q = matvec(params.q_proj, pooled);
    std::vector<Vec> rows;
    rows.push_back(matvec(params.kv_proj_p, s_p));
    rows.push_back(matvec(params.kv_proj_p, o_p));
    for (std::size_t k = 0; k < s_c.rows(); ++k) rows.push_back(matvec(params.kv_proj_sc, s_c.row(k)));
    for (std::size_t k = 0; k < o_c.rows(); ++k) rows.push_back(matvec(params.kv_proj_oc, o_c.row(k)));
    Matrix kv = Matrix::from_rows(rows);
    Vec att = attention(Matrix(1, q.size(), q), kv, kv).row(0);
    return concat(att, pooled);
}

// Round 0 scores the composite feature alone; each later round rebuilds the
// triplet embeddings from the previous round's distributions, fuses them with
// the composite decomposition, and re-scores on p || fused.
inline std::vector<PredicateDistributions> irg_rounds(const EntityFeature& subj,
                                                      const EntityFeature& obj,
                                                      const RelationHeadParams& params,
                                                      std::size_t n) {
    CompositeFeature p = composite_features(subj, obj, params);
    std::vector<PredicateDistributions> rounds;
    rounds.push_back(predict_predicates(p, params));
    auto [s_p, o_p] = decompose_composite(p);
    for (std::size_t r = 1; r <= n; ++r) {
        TripletEmbedding c = triplet_embeddings(subj, obj, rounds.back(), params);
        auto [s_c, o_c] = decompose_triplets(c);
        Vec fused = hse_fuse(p.data, s_p, o_p, s_c, o_c, params);
        Vec x = concat(p.data, fused);
        rounds.push_back(PredicateDistributions{softmax(matvec(params.iter_head_a, x)),
                                                softmax(matvec(params.iter_head_s, x)),
                                                softmax(matvec(params.iter_head_c, x))});
    }
    return rounds;
}

inline PredicateDistributions irg_iterate(const EntityFeature& subj, const EntityFeature& obj,
                                          const RelationHeadParams& params, std::size_t n) {
    return irg_rounds(subj, obj, params, n).back();
}

// ---------------------------------------------------------------------------
// Losses (evaluated, not optimized).

// Sum over the three categories of -ln p[true label].
inline double predicate_loss(const PredicateDistributions& dists,
                             const std::array<std::size_t, 3>& gt_local_labels) {
    dists.validate();
    const std::array<const Vec*, 3> cats = {&dists.attention, &dists.spatial, &dists.contacting};
    double loss = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        if (gt_local_labels[k] >= cats[k]->size())
            throw std::invalid_argument("predicate_loss: label out of range");
        loss += -std::log((*cats[k])[gt_local_labels[k]]);
    }
    return loss;
}

inline double entity_loss(const Vec& class_logits, std::size_t gt_class) {
    if (gt_class >= class_logits.size())
        throw std::invalid_argument("entity_loss: label out of range");
    return -std::log(softmax(class_logits)[gt_class]);
}

// ---------------------------------------------------------------------------
// JSON parameter loading (same schema family as MlpParams).

inline RelationHeadParams relation_head_params_from_json(const nlohmann::json& j,
                                                         const IrgConfig& cfg) {
    auto mat = [](const nlohmann::json& rows) {
        std::vector<Vec> r;
        for (const auto& row : rows) r.push_back(row.get<Vec>());
        return Matrix::from_rows(r);
    };
    RelationHeadParams p;
    p.config = cfg;
    p.f_v = mat(j.at("f_v"));
    p.f_u = mat(j.at("f_u"));
    p.head_a = mat(j.at("head_attention"));
    p.head_s = mat(j.at("head_spatial"));
    p.head_c = mat(j.at("head_contacting"));
    p.iter_head_a = mat(j.at("iter_head_attention"));
    p.iter_head_s = mat(j.at("iter_head_spatial"));
    p.iter_head_c = mat(j.at("iter_head_contacting"));
    p.pred_embed = mat(j.at("predicate_embeddings"));
    p.q_proj = mat(j.at("q_proj"));
    p.kv_proj_p = mat(j.at("kv_proj_composite"));
    p.kv_proj_sc = mat(j.at("kv_proj_subject"));
    p.kv_proj_oc = mat(j.at("kv_proj_object"));
    p.category_sizes = {p.head_a.rows(), p.head_s.rows(), p.head_c.rows()};
    p.validate();
    return p;
}

inline RelationHeadParams load_relation_head_params(const std::string& path, const IrgConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open relation head parameter file: " + path);
    nlohmann::json j;
    in >> j;
    return relation_head_params_from_json(j, cfg);
}

}  // namespace visa::irg
