#pragma once

// Unbiased VidSGG evaluation: constraint filtering, deterministic ranking,
// triplet matching per task mode, R@K / mR@K, and head/body/tail splits.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "visa/scene_graph.hpp"

namespace visa::metrics {

using sg::Box;
using sg::Dataset;
using sg::FrequencyTable;
using sg::Relation;
using sg::SceneGraphFrame;

enum class TaskMode { kPredCls, kSgCls, kSgDet };
enum class ConstraintMode { kWith, kSemi, kNo };

inline const char* task_name(TaskMode m) {
    switch (m) {
        case TaskMode::kPredCls: return "predcls";
        case TaskMode::kSgCls: return "sgcls";
        default: return "sgdet";
    }
}

inline const char* constraint_name(ConstraintMode m) {
    switch (m) {
        case ConstraintMode::kWith: return "with";
        case ConstraintMode::kSemi: return "semi";
        default: return "no";
    }
}

struct EvalConfig {
    TaskMode task = TaskMode::kPredCls;
    ConstraintMode constraint = ConstraintMode::kWith;
    double semi_threshold = 0.9;
    std::vector<int> ks = {10, 20, 50};
    double iou_threshold = 0.5;
    bool macro_per_frame = false;  // per-class recall averaged per frame instead of micro

    void validate() const {
        if (!(semi_threshold > 0.0 && semi_threshold < 1.0))
            throw std::invalid_argument("EvalConfig: semi threshold outside (0,1)");
        if (ks.empty()) throw std::invalid_argument("EvalConfig: no K values");
        for (std::size_t i = 0; i < ks.size(); ++i) {
            if (ks[i] <= 0) throw std::invalid_argument("EvalConfig: K must be positive");
            if (i > 0 && ks[i] <= ks[i - 1])
                throw std::invalid_argument("EvalConfig: K values must be strictly increasing");
        }
        if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
            throw std::invalid_argument("EvalConfig: IoU threshold outside (0,1]");
    }
};

inline double iou(const Box& a, const Box& b) {
    if (!a.valid() || !b.valid())
        throw std::invalid_argument("iou: degenerate box");
    double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return inter / uni;
}

// WITH: top-1 per (subject, object) pair (tie -> lowest predicate id).
// SEMI: predicates with score strictly above the threshold.
// NO:   everything.
inline std::vector<Relation> apply_constraint(const std::vector<Relation>& relations,
                                              ConstraintMode mode, double threshold) {
    switch (mode) {
        case ConstraintMode::kNo:
            return relations;
        case ConstraintMode::kSemi: {
            std::vector<Relation> out;
            for (const auto& r : relations)
                if (r.score > threshold) out.push_back(r);
            return out;
        }
        case ConstraintMode::kWith: {
            std::map<std::pair<int, int>, Relation> best;
            for (const auto& r : relations) {
                auto key = std::make_pair(r.subject, r.object);
                auto it = best.find(key);
                if (it == best.end() || r.score > it->second.score ||
                    (r.score == it->second.score && r.predicate < it->second.predicate))
                    best[key] = r;
            }
            // Preserve original relation order for determinism.
            std::vector<Relation> out;
            for (const auto& r : relations) {
                const Relation& b = best.at({r.subject, r.object});
                if (b.predicate == r.predicate && b.score == r.score) {
                    out.push_back(r);
                    best[{r.subject, r.object}].score = -1.0;  // consume
                }
            }
            return out;
        }
    }
    return {};
}

// Predicted entity id -> GT entity id under the task's matching rule.
// PREDCLS/SGCLS match by entity id (SGCLS also requires the predicted class
// to be correct); SGDET runs greedy highest-IoU-first one-to-one assignment
// over class-equal pairs with IoU >= threshold.
inline std::unordered_map<int, int> entity_correspondence(const SceneGraphFrame& pred,
                                                          const SceneGraphFrame& gt,
                                                          const EvalConfig& cfg) {
    std::unordered_map<int, int> corr;
    if (cfg.task != TaskMode::kSgDet) {
        for (const auto& pe : pred.entities) {
            const sg::Entity* ge = gt.find_entity(pe.id);
            if (!ge) continue;
            if (cfg.task == TaskMode::kSgCls && pe.cls != ge->cls) continue;
            corr[pe.id] = ge->id;
        }
        return corr;
    }

    struct Candidate {
        double overlap;
        std::size_t pi, gi;
    };
    std::vector<Candidate> cands;
    for (std::size_t pi = 0; pi < pred.entities.size(); ++pi)
        for (std::size_t gi = 0; gi < gt.entities.size(); ++gi) {
            if (pred.entities[pi].cls != gt.entities[gi].cls) continue;
            double ov = iou(pred.entities[pi].box, gt.entities[gi].box);
            if (ov >= cfg.iou_threshold) cands.push_back({ov, pi, gi});
        }
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        int ap = pred.entities[a.pi].id, bp = pred.entities[b.pi].id;
        if (ap != bp) return ap < bp;
        return gt.entities[a.gi].id < gt.entities[b.gi].id;
    });
    std::set<std::size_t> used_pred, used_gt;
    for (const auto& c : cands) {
        if (used_pred.count(c.pi) || used_gt.count(c.gi)) continue;
        used_pred.insert(c.pi);
        used_gt.insert(c.gi);
        corr[pred.entities[c.pi].id] = gt.entities[c.gi].id;
    }
    return corr;
}

// Score descending; ties by lowest subject id, then object id, then predicate.
inline void rank_relations(std::vector<Relation>& relations) {
    std::stable_sort(relations.begin(), relations.end(), [](const Relation& a, const Relation& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.subject != b.subject) return a.subject < b.subject;
        if (a.object != b.object) return a.object < b.object;
        return a.predicate < b.predicate;
    });
}

struct FrameResult {
    bool skipped = false;  // no GT relations
    std::size_t gt_count = 0;
    std::vector<int> gt_predicates;
    // matched[k_index][gt_relation_index]
    std::vector<std::vector<bool>> matched;
};

// Top-K hit flags for every GT relation, for each configured K.
inline FrameResult recall_at_k(const SceneGraphFrame& pred, const SceneGraphFrame& gt,
                               const EvalConfig& cfg) {
    cfg.validate();
    if (pred.key() != gt.key() && !pred.entities.empty())
        throw std::invalid_argument("recall_at_k: frame key mismatch (" + pred.key() +
                                    " vs " + gt.key() + ")");
    FrameResult res;
    res.gt_count = gt.relations.size();
    if (gt.relations.empty()) {
        res.skipped = true;
        return res;
    }
    for (const auto& g : gt.relations) res.gt_predicates.push_back(g.predicate);

    auto corr = entity_correspondence(pred, gt, cfg);
    std::vector<Relation> ranked =
        apply_constraint(pred.relations, cfg.constraint, cfg.semi_threshold);
    rank_relations(ranked);

    res.matched.assign(cfg.ks.size(), std::vector<bool>(gt.relations.size(), false));
    for (std::size_t ki = 0; ki < cfg.ks.size(); ++ki) {
        std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(cfg.ks[ki]), ranked.size());
        for (std::size_t pi = 0; pi < top; ++pi) {
            const Relation& pr = ranked[pi];
            auto si = corr.find(pr.subject);
            auto oi = corr.find(pr.object);
            if (si == corr.end() || oi == corr.end()) continue;
            for (std::size_t gi = 0; gi < gt.relations.size(); ++gi) {
                const Relation& gr = gt.relations[gi];
                if (gr.subject == si->second && gr.object == oi->second &&
                    gr.predicate == pr.predicate)
                    res.matched[ki][gi] = true;
            }
        }
    }
    return res;
}

struct MetricReport {
    EvalConfig config;
    std::size_t predicate_count = 0;
    std::size_t frames_evaluated = 0;
    std::size_t frames_skipped = 0;  // zero GT relations
    // [k_index][predicate]
    std::vector<std::vector<long>> matched;
    std::vector<long> gt_instances;  // per predicate
    std::vector<double> recall;      // R@K per k_index
    std::vector<double> mean_recall; // mR@K per k_index

    bool predicate_counted(std::size_t pred) const { return gt_instances[pred] > 0; }

    double per_class_recall(std::size_t ki, std::size_t pred) const {
        return static_cast<double>(matched[ki][pred]) / static_cast<double>(gt_instances[pred]);
    }
};

inline MetricReport mean_recall_at_k(const Dataset& pred, const Dataset& gt,
                                     const EvalConfig& cfg, std::size_t predicate_count) {
    cfg.validate();
    std::unordered_map<std::string, const SceneGraphFrame*> by_key;
    for (const auto& f : pred) by_key[f.key()] = &f;

    MetricReport rep;
    rep.config = cfg;
    rep.predicate_count = predicate_count;
    rep.matched.assign(cfg.ks.size(), std::vector<long>(predicate_count, 0));
    rep.gt_instances.assign(predicate_count, 0);

    const SceneGraphFrame empty;
    bool any_gt = false;
    for (const auto& gf : gt) {
        auto it = by_key.find(gf.key());
        const SceneGraphFrame& pf = it == by_key.end() ? empty : *it->second;
        FrameResult fr = recall_at_k(pf, gf, cfg);
        if (fr.skipped) {
            ++rep.frames_skipped;
            continue;
        }
        any_gt = true;
        ++rep.frames_evaluated;
        for (std::size_t gi = 0; gi < fr.gt_predicates.size(); ++gi) {
            auto p = static_cast<std::size_t>(fr.gt_predicates[gi]);
            if (p >= predicate_count)
                throw std::invalid_argument("mean_recall_at_k: predicate id out of range");
            ++rep.gt_instances[p];
            for (std::size_t ki = 0; ki < cfg.ks.size(); ++ki)
                if (fr.matched[ki][gi]) ++rep.matched[ki][p];
        }
    }
    if (!any_gt)
        throw std::domain_error("mean_recall_at_k: dataset has no GT relation instances");

    long total_gt = 0;
    for (long c : rep.gt_instances) total_gt += c;
    for (std::size_t ki = 0; ki < cfg.ks.size(); ++ki) {
        long total_matched = 0;
        double mr_sum = 0.0;
        std::size_t counted = 0;
        for (std::size_t p = 0; p < predicate_count; ++p) {
            if (rep.gt_instances[p] == 0) continue;
            total_matched += rep.matched[ki][p];
            mr_sum += rep.per_class_recall(ki, p);
            ++counted;
        }
        rep.recall.push_back(static_cast<double>(total_matched) / static_cast<double>(total_gt));
        rep.mean_recall.push_back(mr_sum / static_cast<double>(counted));
    }
    return rep;
}

struct SplitReport {
    // Per split, per k_index: mean of member per-class recalls; NaN-free
    // (splits with no counted predicate carry count 0 and recall 0).
    struct Band {
        std::size_t counted = 0;
        std::vector<double> mean_recall;
    };
    Band head, body, tail;
    std::vector<std::string> predicate_names;
    std::vector<sg::Split> assignment;  // per predicate
};

inline SplitReport split_report(const MetricReport& report, const FrequencyTable& freq) {
    SplitReport out;
    out.assignment.resize(report.predicate_count);
    auto band = [&](sg::Split s) -> SplitReport::Band& {
        switch (s) {
            case sg::Split::kHead: return out.head;
            case sg::Split::kBody: return out.body;
            default: return out.tail;
        }
    };
    for (sg::Split s : {sg::Split::kHead, sg::Split::kBody, sg::Split::kTail})
        band(s).mean_recall.assign(report.config.ks.size(), 0.0);

    for (std::size_t p = 0; p < report.predicate_count; ++p) {
        sg::Split s = sg::frequency_split(freq.at(static_cast<int>(p)));
        out.assignment[p] = s;
        if (!report.predicate_counted(p)) continue;
        SplitReport::Band& b = band(s);
        ++b.counted;
        for (std::size_t ki = 0; ki < report.config.ks.size(); ++ki)
            b.mean_recall[ki] += report.per_class_recall(ki, p);
    }
    for (sg::Split s : {sg::Split::kHead, sg::Split::kBody, sg::Split::kTail}) {
        SplitReport::Band& b = band(s);
        if (b.counted > 0)
            for (double& v : b.mean_recall) v /= static_cast<double>(b.counted);
    }
    return out;
}

using SplitBand = SplitReport::Band;

}  // namespace visa::metrics
