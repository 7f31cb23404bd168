#pragma once

#include <string>

#include "unigen/errors.hpp"

namespace unigen {

inline constexpr const char* kLabelSlot = "<label>";
inline constexpr const char* kTextSlot = "<text>";

enum class TemplateKind { kUniversal, kDomainSpecific };

// A prompt with exactly one <label> slot and at most one <text> slot.
// Rendered forward for generation (label filled, text slot stripped) and
// backward for relabeling (text first, truncated before the label slot).
class PromptTemplate {
public:
    PromptTemplate() = default;

    PromptTemplate(std::string text, TemplateKind kind, std::string domain_name = "")
        : template_(std::move(text)), kind_(kind), domain_name_(std::move(domain_name)) {
        validate();
    }

    const std::string& text() const { return template_; }
    TemplateKind kind() const { return kind_; }
    const std::string& domain_name() const { return domain_name_; }

    bool has_text_slot() const { return template_.find(kTextSlot) != std::string::npos; }

    std::size_t label_slot_pos() const { return template_.find(kLabelSlot); }

    bool operator==(const PromptTemplate& o) const {
        return template_ == o.template_ && kind_ == o.kind_ && domain_name_ == o.domain_name_;
    }

private:
    void validate() const {
        const auto first = template_.find(kLabelSlot);
        if (first == std::string::npos)
            throw TemplateError("template has no <label> slot: " + template_);
        if (template_.find(kLabelSlot, first + 1) != std::string::npos)
            throw TemplateError("template has more than one <label> slot: " + template_);
        const auto t1 = template_.find(kTextSlot);
        if (t1 != std::string::npos && template_.find(kTextSlot, t1 + 1) != std::string::npos)
            throw TemplateError("template has more than one <text> slot: " + template_);
    }

    std::string template_;
    TemplateKind kind_ = TemplateKind::kUniversal;
    std::string domain_name_;
};

} // namespace unigen
