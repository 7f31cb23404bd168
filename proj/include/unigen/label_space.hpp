#pragma once

#include <set>
#include <string>
#include <vector>

#include "unigen/errors.hpp"

namespace unigen {

// Class ids, display names, and verbalizer words. The verbalizer maps each
// class to the single word whose next-token probability scores the class
// during relabeling and prompting.
class LabelSpace {
public:
    LabelSpace() = default;

    LabelSpace(std::vector<std::string> names, std::vector<std::string> verbalizer)
        : names_(std::move(names)), verbalizer_(std::move(verbalizer)) {
        validate();
    }

    // Names double as verbalizer words; matches the wording used in the
    // generation prompts ("... in positive sentiment ...").
    explicit LabelSpace(std::vector<std::string> names) : names_(names), verbalizer_(names) {
        validate();
    }

    int num_classes() const { return static_cast<int>(names_.size()); }

    std::vector<int> class_ids() const {
        std::vector<int> ids(names_.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
        return ids;
    }

    const std::string& name(int cls) const { return names_.at(cls); }
    const std::string& verbalizer(int cls) const { return verbalizer_.at(cls); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<std::string>& verbalizers() const { return verbalizer_; }

    bool valid_class(int cls) const { return cls >= 0 && cls < num_classes(); }

    // -1 when no name matches.
    int class_of_name(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return static_cast<int>(i);
        return -1;
    }

    bool operator==(const LabelSpace& o) const {
        return names_ == o.names_ && verbalizer_ == o.verbalizer_;
    }

private:
    void validate() const {
        if (names_.size() < 2)
            throw ValidationError("label space needs at least 2 classes, got " +
                                  std::to_string(names_.size()));
        if (verbalizer_.size() != names_.size())
            throw ValidationError("label space has " + std::to_string(names_.size()) +
                                  " names but " + std::to_string(verbalizer_.size()) +
                                  " verbalizer words");
        std::set<std::string> seen;
        for (const auto& w : verbalizer_) {
            if (w.empty()) throw ValidationError("empty verbalizer word");
            if (!seen.insert(w).second)
                throw ValidationError("duplicate verbalizer word: " + w);
        }
    }

    std::vector<std::string> names_;
    std::vector<std::string> verbalizer_;
};

} // namespace unigen
