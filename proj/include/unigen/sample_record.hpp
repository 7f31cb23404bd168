#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unigen/errors.hpp"
#include "unigen/label_space.hpp"

namespace unigen {

// Decoding settings and seed that produced one sample.
struct Provenance {
    std::string generator_id;
    std::string template_name; // "universal" or the domain name
    int top_k = 0;
    double top_p = 0.0;
    int max_new_tokens = 0;
    std::uint64_t seed = 0;

    bool operator==(const Provenance& o) const {
        return generator_id == o.generator_id && template_name == o.template_name &&
               top_k == o.top_k && top_p == o.top_p && max_new_tokens == o.max_new_tokens &&
               seed == o.seed;
    }
};

// Lowest class id wins ties; keeps hard labels reproducible.
inline int argmax_lowest_tie(const std::vector<double>& v) {
    int best = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
        if (v[j] > v[best]) best = static_cast<int>(j);
    return best;
}

inline std::string trim_copy(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(first, last - first + 1);
}

struct SampleRecord {
    std::string text;
    int seed_label = 0;
    std::vector<double> soft_label;
    int hard_label = 0;
    std::optional<double> weight;
    Provenance provenance;

    // Throws ValidationError naming the record index on any broken invariant.
    void validate(int num_classes, long index = -1) const {
        const std::string where =
            index >= 0 ? " (record " + std::to_string(index) + ")" : "";
        if (trim_copy(text).empty())
            throw ValidationError("record text is empty after trimming" + where);
        if (static_cast<int>(soft_label.size()) != num_classes)
            throw ValidationError("soft_label length " + std::to_string(soft_label.size()) +
                                  " does not match K=" + std::to_string(num_classes) + where);
        double sum = 0.0;
        for (double p : soft_label) {
            if (!(p >= 0.0))
                throw ValidationError("soft_label entry negative or NaN" + where);
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-6)
            throw ValidationError("soft_label sums to " + std::to_string(sum) +
                                  ", expected 1 within 1e-6" + where);
        if (hard_label != argmax_lowest_tie(soft_label))
            throw ValidationError("hard_label does not equal argmax of soft_label" + where);
        if (seed_label < 0 || seed_label >= num_classes)
            throw ValidationError("seed_label out of range" + where);
        if (weight && (!(*weight >= 0.0) || !(*weight <= 1.0)))
            throw ValidationError("weight outside [0,1]" + where);
    }

    bool operator==(const SampleRecord& o) const {
        return text == o.text && seed_label == o.seed_label && soft_label == o.soft_label &&
               hard_label == o.hard_label && weight == o.weight && provenance == o.provenance;
    }
};

inline std::vector<double> one_hot(int cls, int num_classes) {
    std::vector<double> v(num_classes, 0.0);
    v.at(cls) = 1.0;
    return v;
}

enum class Stage { kGenerated = 0, kRelabeled = 1, kWeighted = 2, kSelected = 3 };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::kGenerated: return "generated";
        case Stage::kRelabeled: return "relabeled";
        case Stage::kWeighted: return "weighted";
        case Stage::kSelected: return "selected";
    }
    return "generated";
}

inline Stage stage_from_name(const std::string& s) {
    if (s == "generated") return Stage::kGenerated;
    if (s == "relabeled") return Stage::kRelabeled;
    if (s == "weighted") return Stage::kWeighted;
    if (s == "selected") return Stage::kSelected;
    throw ValidationError("unknown stage: " + s);
}

struct DatasetManifest {
    std::vector<SampleRecord> records;
    LabelSpace label_space;
    Stage stage = Stage::kGenerated;
    std::string config_hash;

    void validate() const {
        const int k = label_space.num_classes();
        for (std::size_t i = 0; i < records.size(); ++i)
            records[i].validate(k, static_cast<long>(i));
    }

    // Stage transitions are monotone in enum order.
    void advance_stage(Stage next) {
        if (static_cast<int>(next) < static_cast<int>(stage))
            throw ValidationError(std::string("stage cannot move backwards: ") +
                                  stage_name(stage) + " -> " + stage_name(next));
        stage = next;
    }
};

} // namespace unigen
