#pragma once

// Scene-graph data model shared by the evaluation engine, the analytics
// reports, and the dataset loaders.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "visa/linalg.hpp"

namespace visa::sg {

struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    bool valid() const { return x2 > x1 && y2 > y1; }
    double area() const { return (x2 - x1) * (y2 - y1); }
};

struct Entity {
    int id = 0;
    int cls = 0;
    Box box;
    std::optional<double> score;
    std::optional<Vec> class_scores;
};

struct Relation {
    int subject = 0;  // entity id
    int object = 0;   // entity id
    int predicate = 0;
    double score = 1.0;
};

struct SceneGraphFrame {
    std::string video;
    int frame = 0;
    std::vector<Entity> entities;
    std::vector<Relation> relations;

    const Entity* find_entity(int id) const {
        for (const auto& e : entities)
            if (e.id == id) return &e;
        return nullptr;
    }

    std::string key() const { return video + "#" + std::to_string(frame); }
};

using Dataset = std::vector<SceneGraphFrame>;

// Object classes plus the predicate vocabulary partitioned into the three
// predicate categories. Predicate ids are assigned in partition order:
// attention first, then spatial, then contacting.
struct Vocabulary {
    std::vector<std::string> objects;
    std::vector<std::string> attention;
    std::vector<std::string> spatial;
    std::vector<std::string> contacting;

    std::vector<std::string> predicates() const {
        std::vector<std::string> all = attention;
        all.insert(all.end(), spatial.begin(), spatial.end());
        all.insert(all.end(), contacting.begin(), contacting.end());
        return all;
    }

    std::size_t predicate_count() const {
        return attention.size() + spatial.size() + contacting.size();
    }

    int object_id(const std::string& name) const {
        for (std::size_t i = 0; i < objects.size(); ++i)
            if (objects[i] == name) return static_cast<int>(i);
        throw std::invalid_argument("unknown object class: " + name);
    }

    int predicate_id(const std::string& name) const {
        auto all = predicates();
        for (std::size_t i = 0; i < all.size(); ++i)
            if (all[i] == name) return static_cast<int>(i);
        throw std::invalid_argument("unknown predicate: " + name);
    }

    // 0 = attention, 1 = spatial, 2 = contacting.
    int predicate_category(int pred_id) const {
        auto p = static_cast<std::size_t>(pred_id);
        if (p < attention.size()) return 0;
        if (p < attention.size() + spatial.size()) return 1;
        if (p < predicate_count()) return 2;
        throw std::invalid_argument("predicate id out of range: " + std::to_string(pred_id));
    }

    void validate() const {
        std::map<std::string, int> seen;
        for (const auto& n : objects)
            if (++seen[n] > 1) throw std::invalid_argument("duplicate object class: " + n);
        seen.clear();
        for (const auto& n : predicates())
            if (++seen[n] > 1) throw std::invalid_argument("duplicate predicate: " + n);
    }
};

// predicate id -> training-sample count
struct FrequencyTable {
    std::vector<long> counts;

    long at(int pred_id) const {
        auto p = static_cast<std::size_t>(pred_id);
        if (p >= counts.size())
            throw std::invalid_argument("frequency table missing predicate id " +
                                        std::to_string(pred_id));
        return counts[p];
    }
};

enum class Split { kHead, kBody, kTail };

// HEAD >= 100000 (closed), TAIL < 8000, BODY is the residual band.
inline Split frequency_split(long count) {
    if (count >= 100000) return Split::kHead;
    if (count < 8000) return Split::kTail;
    return Split::kBody;
}

inline const char* split_name(Split s) {
    switch (s) {
        case Split::kHead: return "HEAD";
        case Split::kBody: return "BODY";
        default: return "TAIL";
    }
}

}  // namespace visa::sg
