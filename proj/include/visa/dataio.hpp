#pragma once

// Dataset schemas, JSONL loaders with line-addressed errors, the synthetic
// long-tail generator, and report writers (JSON + CSV, 12 significant
// digits, stable key order).

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "visa/infotheory.hpp"
#include "visa/metrics.hpp"
#include "visa/mgsm.hpp"
#include "visa/rng.hpp"
#include "visa/scene_graph.hpp"

namespace visa::io {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Vocabulary

inline sg::Vocabulary vocabulary_from_json(const json& j) {
    sg::Vocabulary v;
    v.objects = j.at("objects").get<std::vector<std::string>>();
    const auto& p = j.at("predicates");
    v.attention = p.at("attention").get<std::vector<std::string>>();
    v.spatial = p.at("spatial").get<std::vector<std::string>>();
    v.contacting = p.at("contacting").get<std::vector<std::string>>();
    v.validate();
    return v;
}

inline sg::Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
    json j;
    in >> j;
    return vocabulary_from_json(j);
}

inline void write_vocabulary(const sg::Vocabulary& v, const std::string& path) {
    ojson j;
    j["objects"] = v.objects;
    j["predicates"]["attention"] = v.attention;
    j["predicates"]["spatial"] = v.spatial;
    j["predicates"]["contacting"] = v.contacting;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
    out << j.dump(2) << "\n";
}

// AG-style default: 35 object classes, 26 predicates (3/6/17).
inline sg::Vocabulary default_vocabulary() {
    sg::Vocabulary v;
    v.objects = {"person",       "bag",          "bed",       "blanket",   "book",
                 "box",          "broom",        "chair",     "closet",    "clothes",
                 "cup",          "dish",         "door",      "doorknob",  "doorway",
                 "floor",        "food",         "groceries", "laptop",    "light",
                 "medicine",     "mirror",       "notebook",  "phone",     "picture",
                 "pillow",       "refrigerator", "sandwich",  "shelf",     "shoe",
                 "sofa",         "table",        "television","towel",     "window"};
    v.attention = {"looking_at", "not_looking_at", "unsure"};
    v.spatial = {"above", "beneath", "in_front_of", "behind", "on", "in"};
    v.contacting = {"carrying",   "covered_by",  "drinking_from", "eating",
                    "holding",    "leaning_on",  "lying_on",      "not_contacting",
                    "other_relationship", "sit_on", "standing_on", "touching",
                    "twisting",   "wearing",     "wiping",        "writing_on",
                    "have_it_on_the_back"};
    v.validate();
    return v;
}

// ---------------------------------------------------------------------------
// Frequency table (JSON map predicate-name -> count)

inline sg::FrequencyTable load_frequency_table(const std::string& path,
                                               const sg::Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open frequency table: " + path);
    json j;
    in >> j;
    sg::FrequencyTable freq;
    freq.counts.resize(vocab.predicate_count());
    auto names = vocab.predicates();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (!j.contains(names[i]))
            throw std::runtime_error("frequency table missing predicate: " + names[i]);
        long c = j.at(names[i]).get<long>();
        if (c < 0) throw std::runtime_error("frequency table has negative count for " + names[i]);
        freq.counts[i] = c;
    }
    return freq;
}

inline void write_frequency_table(const sg::FrequencyTable& freq, const sg::Vocabulary& vocab,
                                  const std::string& path) {
    ojson j;
    auto names = vocab.predicates();
    for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = freq.counts[i];
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write frequency table: " + path);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Scene-graph JSONL

struct ParseError : std::runtime_error {
    std::size_t line;
    ParseError(std::size_t line_in, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_in) + ": " + msg), line(line_in) {}
};

namespace detail {

inline sg::SceneGraphFrame frame_from_json(const json& j, const sg::Vocabulary& vocab,
                                           std::size_t line) {
    sg::SceneGraphFrame f;
    try {
        f.video = j.at("video").get<std::string>();
        f.frame = j.at("frame").get<int>();
        std::set<int> ids;
        for (const auto& ej : j.at("entities")) {
            sg::Entity e;
            e.id = ej.at("id").get<int>();
            if (!ids.insert(e.id).second)
                throw ParseError(line, "duplicate entity id " + std::to_string(e.id));
            e.cls = vocab.object_id(ej.at("class").get<std::string>());
            auto box = ej.at("box").get<std::vector<double>>();
            if (box.size() != 4) throw ParseError(line, "box must have 4 coordinates");
            e.box = {box[0], box[1], box[2], box[3]};
            if (!e.box.valid()) throw ParseError(line, "degenerate box for entity " +
                                                           std::to_string(e.id));
            if (ej.contains("score")) {
                e.score = ej.at("score").get<double>();
                if (!(*e.score >= 0.0 && *e.score <= 1.0))
                    throw ParseError(line, "entity score outside [0,1]");
            }
            if (ej.contains("class_scores"))
                e.class_scores = ej.at("class_scores").get<Vec>();
            f.entities.push_back(std::move(e));
        }
        std::set<std::tuple<int, int, int>> triplets;
        for (const auto& rj : j.at("relations")) {
            sg::Relation r;
            r.subject = rj.at("s").get<int>();
            r.object = rj.at("o").get<int>();
            r.predicate = vocab.predicate_id(rj.at("p").get<std::string>());
            if (!ids.count(r.subject))
                throw ParseError(line, "relation references missing entity id " +
                                           std::to_string(r.subject));
            if (!ids.count(r.object))
                throw ParseError(line, "relation references missing entity id " +
                                           std::to_string(r.object));
            if (rj.contains("score")) {
                r.score = rj.at("score").get<double>();
                if (!(r.score >= 0.0 && r.score <= 1.0))
                    throw ParseError(line, "relation score outside [0,1]");
            } else if (!triplets.insert({r.subject, r.object, r.predicate}).second) {
                // Duplicate triplets are only forbidden in GT (unscored) data.
                throw ParseError(line, "duplicate GT triplet");
            }
            f.relations.push_back(r);
        }
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(line, e.what());
    }
    return f;
}

inline ojson frame_to_json(const sg::SceneGraphFrame& f, const sg::Vocabulary& vocab,
                           bool with_scores) {
    ojson j;
    j["video"] = f.video;
    j["frame"] = f.frame;
    j["entities"] = ojson::array();
    auto preds = vocab.predicates();
    for (const auto& e : f.entities) {
        ojson ej;
        ej["id"] = e.id;
        ej["class"] = vocab.objects.at(static_cast<std::size_t>(e.cls));
        ej["box"] = {e.box.x1, e.box.y1, e.box.x2, e.box.y2};
        if (with_scores && e.score) ej["score"] = *e.score;
        if (e.class_scores) ej["class_scores"] = *e.class_scores;
        j["entities"].push_back(std::move(ej));
    }
    j["relations"] = ojson::array();
    for (const auto& r : f.relations) {
        ojson rj;
        rj["s"] = r.subject;
        rj["o"] = r.object;
        rj["p"] = preds.at(static_cast<std::size_t>(r.predicate));
        if (with_scores) rj["score"] = r.score;
        j["relations"].push_back(std::move(rj));
    }
    return j;
}

}  // namespace detail

// Throws ParseError (with line number) on the first malformed record.
inline sg::Dataset load_scene_graphs(const std::string& path, const sg::Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    sg::Dataset out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const std::exception& e) {
            throw ParseError(line, std::string("invalid JSON: ") + e.what());
        }
        out.push_back(detail::frame_from_json(j, vocab, line));
    }
    return out;
}

struct ValidationReport {
    std::size_t frames = 0;
    std::vector<std::string> errors;  // each prefixed "line N: "

    bool ok() const { return errors.empty(); }
};

// Non-throwing variant: accumulates every malformed line instead of stopping.
inline ValidationReport validate_file(const std::string& path, const sg::Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    ValidationReport rep;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        try {
            json j = json::parse(text);
            detail::frame_from_json(j, vocab, line);
            ++rep.frames;
        } catch (const ParseError& e) {
            rep.errors.emplace_back(e.what());
        } catch (const std::exception& e) {
            rep.errors.emplace_back("line " + std::to_string(line) + ": " + e.what());
        }
    }
    return rep;
}

inline void write_scene_graphs(const sg::Dataset& data, const sg::Vocabulary& vocab,
                               const std::string& path, bool with_scores) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (const auto& f : data) out << detail::frame_to_json(f, vocab, with_scores).dump() << "\n";
}

// ---------------------------------------------------------------------------
// Synthetic long-tail generator

struct SyntheticConfig {
    std::size_t videos = 4;
    std::size_t frames_per_video = 25;
    std::size_t entities_per_frame = 4;
    double zipf_exponent = 1.0;
    double noise = 0.0;  // prediction corruption level in [0,1]
    std::uint64_t seed = 7;

    void validate() const {
        if (videos < 1 || frames_per_video < 1 || entities_per_frame < 1)
            throw std::invalid_argument("SyntheticConfig: counts must be >= 1");
        if (!(zipf_exponent >= 0.0)) throw std::invalid_argument("SyntheticConfig: exponent < 0");
        if (!(noise >= 0.0 && noise <= 1.0))
            throw std::invalid_argument("SyntheticConfig: noise outside [0,1]");
    }
};

struct SyntheticResult {
    sg::Dataset gt;
    sg::Dataset pred;
    sg::FrequencyTable freq;
};

// Zipf(s) over n classes: weight of class i is (i+1)^-s.
class ZipfSampler {
public:
    ZipfSampler(std::size_t n, double s) : cdf_(n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += std::pow(static_cast<double>(i + 1), -s);
            cdf_[i] = acc;
        }
        for (double& c : cdf_) c /= acc;
    }

    std::size_t sample(RngStream& rng) const {
        double u = rng.uniform();
        for (std::size_t i = 0; i < cdf_.size(); ++i)
            if (u < cdf_[i]) return i;
        return cdf_.size() - 1;
    }

private:
    Vec cdf_;
};

// GT predicates follow Zipf(s); predictions are the GT with score
// perturbation, label corruption, and distractors proportional to the noise
// level. At noise 0 the prediction is an exact copy with scores of 1.
inline SyntheticResult generate_synthetic(const SyntheticConfig& cfg, const sg::Vocabulary& vocab) {
    cfg.validate();
    RngStream rng(cfg.seed);
    const std::size_t n_pred = vocab.predicate_count();
    const std::size_t n_obj = vocab.objects.size();
    ZipfSampler zipf(n_pred, cfg.zipf_exponent);

    SyntheticResult out;
    for (std::size_t vi = 0; vi < cfg.videos; ++vi) {
        for (std::size_t fi = 0; fi < cfg.frames_per_video; ++fi) {
            sg::SceneGraphFrame gtf;
            gtf.video = "v" + std::to_string(vi);
            gtf.frame = static_cast<int>(fi);
            for (std::size_t ei = 0; ei < cfg.entities_per_frame; ++ei) {
                sg::Entity e;
                e.id = static_cast<int>(ei);
                e.cls = static_cast<int>(rng.below(n_obj));
                double x = rng.uniform(0.0, 560.0), y = rng.uniform(0.0, 400.0);
                e.box = {x, y, x + rng.uniform(20.0, 80.0), y + rng.uniform(20.0, 80.0)};
                gtf.entities.push_back(e);
            }
            std::set<std::tuple<int, int, int>> seen;
            for (std::size_t a = 0; a < cfg.entities_per_frame; ++a)
                for (std::size_t b = 0; b < cfg.entities_per_frame; ++b) {
                    if (a == b || rng.uniform() < 0.3) continue;
                    std::size_t n_rel = 1 + rng.below(2);
                    for (std::size_t r = 0; r < n_rel; ++r) {
                        sg::Relation rel;
                        rel.subject = static_cast<int>(a);
                        rel.object = static_cast<int>(b);
                        rel.predicate = static_cast<int>(zipf.sample(rng));
                        rel.score = 1.0;
                        if (seen.insert({rel.subject, rel.object, rel.predicate}).second)
                            gtf.relations.push_back(rel);
                    }
                }

            sg::SceneGraphFrame pf = gtf;
            for (auto& e : pf.entities) {
                e.score = 1.0;
                if (cfg.noise > 0.0 && rng.uniform() < cfg.noise * 0.5)
                    e.cls = static_cast<int>(rng.below(n_obj));
                if (cfg.noise > 0.0) {
                    double j = cfg.noise * 8.0;
                    e.box.x1 += rng.uniform(-j, j);
                    e.box.y1 += rng.uniform(-j, j);
                    e.box.x2 += rng.uniform(-j, j);
                    e.box.y2 += rng.uniform(-j, j);
                    if (!e.box.valid()) e.box.x2 = e.box.x1 + 1.0, e.box.y2 = e.box.y1 + 1.0;
                }
            }
            std::set<std::tuple<int, int, int>> pred_seen;
            for (auto& r : pf.relations) {
                if (cfg.noise > 0.0 && rng.uniform() < cfg.noise)
                    r.predicate = static_cast<int>(rng.below(n_pred));
                r.score = cfg.noise > 0.0 ? 1.0 - cfg.noise * rng.uniform() * 0.6 : 1.0;
                pred_seen.insert({r.subject, r.object, r.predicate});
            }
            std::size_t distractors =
                static_cast<std::size_t>(cfg.noise * 2.0 * static_cast<double>(gtf.relations.size()));
            for (std::size_t d = 0; d < distractors; ++d) {
                sg::Relation rel;
                rel.subject = static_cast<int>(rng.below(cfg.entities_per_frame));
                rel.object = static_cast<int>(rng.below(cfg.entities_per_frame));
                if (rel.subject == rel.object) continue;
                rel.predicate = static_cast<int>(rng.below(n_pred));
                rel.score = rng.uniform(0.05, 0.85);
                if (pred_seen.insert({rel.subject, rel.object, rel.predicate}).second)
                    pf.relations.push_back(rel);
            }
            out.gt.push_back(std::move(gtf));
            out.pred.push_back(std::move(pf));
        }
    }

    // Training-count table scaled so the top class clears the HEAD threshold
    // and the tail of the Zipf falls below the TAIL threshold (guaranteed for
    // exponents >= 0.9 over 26 classes).
    out.freq.counts.resize(n_pred);
    for (std::size_t i = 0; i < n_pred; ++i)
        out.freq.counts[i] = std::lround(
            150000.0 * std::pow(static_cast<double>(i + 1), -cfg.zipf_exponent));
    return out;
}

// ---------------------------------------------------------------------------
// Report writers

struct RunContext {
    std::string version;
    std::uint64_t seed = 0;
    ojson resolved_config;  // fully resolved flags for reproducibility
};

inline ojson metric_report_to_json(const metrics::MetricReport& rep,
                                   const std::optional<metrics::SplitReport>& splits,
                                   const sg::Vocabulary& vocab, const RunContext& ctx) {
    ojson j;
    j["toolkit_version"] = ctx.version;
    j["seed"] = ctx.seed;
    j["config"] = ctx.resolved_config;
    j["frames_evaluated"] = rep.frames_evaluated;
    j["frames_skipped_empty_gt"] = rep.frames_skipped;
    auto names = vocab.predicates();
    for (std::size_t ki = 0; ki < rep.config.ks.size(); ++ki) {
        std::string k = std::to_string(rep.config.ks[ki]);
        j["recall"]["R@" + k] = rep.recall[ki];
        j["mean_recall"]["mR@" + k] = rep.mean_recall[ki];
        ojson per;
        for (std::size_t p = 0; p < rep.predicate_count; ++p)
            if (rep.predicate_counted(p)) per[names[p]] = rep.per_class_recall(ki, p);
        j["per_class_recall"]["K" + k] = std::move(per);
    }
    ojson inst;
    for (std::size_t p = 0; p < rep.predicate_count; ++p)
        if (rep.gt_instances[p] > 0) inst[names[p]] = rep.gt_instances[p];
    j["gt_instances"] = std::move(inst);
    if (splits) {
        auto band_json = [&](const metrics::SplitBand& b) {
            ojson bj;
            bj["predicates_counted"] = b.counted;
            for (std::size_t ki = 0; ki < rep.config.ks.size(); ++ki)
                bj["mR@" + std::to_string(rep.config.ks[ki])] = b.mean_recall[ki];
            return bj;
        };
        j["splits"]["HEAD"] = band_json(splits->head);
        j["splits"]["BODY"] = band_json(splits->body);
        j["splits"]["TAIL"] = band_json(splits->tail);
    }
    return j;
}

inline void write_metric_report_csv(const metrics::MetricReport& rep,
                                    const sg::Vocabulary& vocab, std::ostream& out) {
    auto names = vocab.predicates();
    out << "predicate,gt_instances";
    for (int k : rep.config.ks) out << ",recall@" << k;
    out << "\n";
    for (std::size_t p = 0; p < rep.predicate_count; ++p) {
        if (!rep.predicate_counted(p)) continue;
        out << names[p] << "," << rep.gt_instances[p];
        for (std::size_t ki = 0; ki < rep.config.ks.size(); ++ki)
            out << "," << fmt_double(rep.per_class_recall(ki, p));
        out << "\n";
    }
    out << "ALL,";
    long total = 0;
    for (long c : rep.gt_instances) total += c;
    out << total;
    for (std::size_t ki = 0; ki < rep.config.ks.size(); ++ki)
        out << "," << fmt_double(rep.recall[ki]);
    out << "\n";
    out << "MEAN,";
    out << total;
    for (std::size_t ki = 0; ki < rep.config.ks.size(); ++ki)
        out << "," << fmt_double(rep.mean_recall[ki]);
    out << "\n";
}

inline void write_trace_csv(const mgsm::SimulationTrace& trace, std::ostream& out) {
    out << "step";
    for (std::size_t c = 0; c < trace.width; ++c) out << ",mean_" << c;
    for (std::size_t c = 0; c < trace.width; ++c) out << ",variance_" << c;
    for (std::size_t c = 0; c < trace.width; ++c) out << ",bias_" << c;
    out << "\n";
    for (std::size_t t = 0; t < trace.steps; ++t) {
        out << t;
        for (std::size_t c = 0; c < trace.width; ++c) out << "," << fmt_double(trace.mean[t][c]);
        for (std::size_t c = 0; c < trace.width; ++c) out << "," << fmt_double(trace.variance[t][c]);
        for (std::size_t c = 0; c < trace.width; ++c) out << "," << fmt_double(trace.bias[t][c]);
        out << "\n";
    }
}

inline void write_sweep_csv(const std::vector<mgsm::LambdaSweepRow>& rows, std::ostream& out) {
    out << "lambda,bias_sq,variance,total,empirical_bias_sq,empirical_variance,empirical_total\n";
    for (const auto& r : rows) {
        out << fmt_double(r.lambda) << "," << fmt_double(r.bias_sq) << ","
            << fmt_double(r.variance) << "," << fmt_double(r.total);
        for (const auto& v : {r.empirical_bias_sq, r.empirical_variance, r.empirical_total})
            out << "," << (v ? fmt_double(*v) : "");
        out << "\n";
    }
}

inline void write_confusion_csv(const infotheory::ConfusionMatrix& cm, std::ostream& out) {
    out << "true\\pred";
    for (const auto& l : cm.labels) out << "," << l;
    out << "\n";
    for (std::size_t r = 0; r < cm.counts.size(); ++r) {
        out << cm.labels[r];
        for (long c : cm.counts[r]) out << "," << c;
        out << "\n";
    }
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

}  // namespace visa::io
