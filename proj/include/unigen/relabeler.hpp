#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "unigen/errors.hpp"
#include "unigen/label_space.hpp"
#include "unigen/log.hpp"
#include "unigen/prompt_template.hpp"
#include "unigen/sample_record.hpp"
#include "unigen/text_generator.hpp"

namespace unigen {

enum class RelabelMode { kSoft, kHard, kOff };

inline const char* relabel_mode_name(RelabelMode m) {
    switch (m) {
        case RelabelMode::kSoft: return "soft";
        case RelabelMode::kHard: return "hard";
        case RelabelMode::kOff: return "off";
    }
    return "soft";
}

inline RelabelMode relabel_mode_from_name(const std::string& s) {
    if (s == "soft") return RelabelMode::kSoft;
    if (s == "hard") return RelabelMode::kHard;
    if (s == "off") return RelabelMode::kOff;
    throw ConfigError("unknown relabel mode: " + s);
}

struct RelabelConfig {
    double tau_re = 0.1;
    double t_re = 0.2;
    RelabelMode mode = RelabelMode::kSoft;

    void validate(int num_classes) const {
        if (!(tau_re > 0.0)) throw ValidationError("tau_re must be > 0");
        const double upper = 1.0 - 1.0 / num_classes;
        if (t_re < 0.0 || t_re >= upper)
            throw ValidationError("t_re must lie in [0, 1 - 1/K) = [0, " +
                                  std::to_string(upper) + ")");
    }
};

struct RelabelPrompt {
    std::string context;                  // generated text + truncated template
    std::vector<std::string> candidates;  // verbalizer words, space-prefixed
};

// Reorients the shared template for scoring: the generated text comes first,
// then the template truncated immediately before its <label> slot, so the
// verbalizer words are the natural next tokens.
inline RelabelPrompt render_relabel_prompt(const PromptTemplate& tmpl,
                                           const LabelSpace& label_space,
                                           const std::string& text) {
    if (!tmpl.has_text_slot())
        throw TemplateError("relabel prompt needs a template with a <text> slot");
    if (trim_copy(text).empty())
        throw ValidationError("relabel prompt needs non-empty text");
    // Remove the <text> slot, then truncate immediately before <label>.
    std::string s = tmpl.text();
    const auto text_pos = s.find(kTextSlot);
    if (text_pos != std::string::npos) s.erase(text_pos, std::string(kTextSlot).size());
    const auto label_pos = s.find(kLabelSlot);
    if (label_pos == std::string::npos)
        throw TemplateError("template has no <label> slot: " + tmpl.text());
    std::string prefix = s.substr(0, label_pos);
    while (!prefix.empty() && std::isspace(static_cast<unsigned char>(prefix.back())))
        prefix.pop_back();
    if (prefix.empty())
        throw TemplateError("relabel orientation requires context before the <label> slot: " +
                            tmpl.text());
    RelabelPrompt out;
    out.context = text + "\n" + prefix;
    out.candidates.reserve(label_space.num_classes());
    for (int c = 0; c < label_space.num_classes(); ++c)
        out.candidates.push_back(" " + label_space.verbalizer(c));
    return out;
}

// Entry i is the log-probability of class i's verbalizer continuation.
inline std::vector<double> class_logits(TextGenerator& gen, const PromptTemplate& tmpl,
                                        const LabelSpace& label_space, const std::string& text) {
    const RelabelPrompt p = render_relabel_prompt(tmpl, label_space, text);
    std::vector<double> logits = gen.score_next_tokens(p.context, p.candidates);
    if (static_cast<int>(logits.size()) != label_space.num_classes())
        throw ValidationError("scorer returned " + std::to_string(logits.size()) +
                              " logits for K=" + std::to_string(label_space.num_classes()));
    for (double v : logits)
        if (!std::isfinite(v)) throw ValidationError("scorer returned non-finite logit");
    return logits;
}

// Temperature softmax with max subtraction.
inline std::vector<double> soft_relabel(const std::vector<double>& logits, double tau_re) {
    if (!(tau_re > 0.0)) throw ValidationError("tau_re must be > 0");
    if (logits.empty()) throw ValidationError("soft_relabel needs at least one logit");
    double mx = logits[0] / tau_re;
    std::vector<double> scaled(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(logits[i])) throw ValidationError("non-finite logit");
        scaled[i] = logits[i] / tau_re;
        mx = std::max(mx, scaled[i]);
    }
    double sum = 0.0;
    for (auto& v : scaled) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : scaled) v /= sum;
    return scaled;
}

inline std::vector<double> hard_relabel(const std::vector<double>& soft) {
    return one_hot(argmax_lowest_tie(soft), static_cast<int>(soft.size()));
}

// Keep iff max_i soft[i] >= 1/K + t_re. The comparison is inclusive.
inline bool passes_threshold(const std::vector<double>& soft, double t_re) {
    double mx = 0.0;
    for (double p : soft) mx = std::max(mx, p);
    return mx >= 1.0 / static_cast<double>(soft.size()) + t_re;
}

struct RelabelSummary {
    long n_in = 0;
    long n_kept = 0;
    long n_removed = 0;
    RelabelMode mode = RelabelMode::kSoft;
};

// Replaces seed labels with PLM-derived soft labels and drops records whose
// best class is not confident enough. mode=off passes records through
// unchanged (stage still advances).
inline DatasetManifest relabel_dataset(const DatasetManifest& manifest, TextGenerator& gen,
                                       const PromptTemplate& tmpl, const RelabelConfig& config,
                                       RelabelSummary* summary_out = nullptr) {
    if (manifest.stage != Stage::kGenerated)
        throw ValidationError(std::string("relabel_dataset expects stage=generated, got ") +
                              stage_name(manifest.stage));
    config.validate(manifest.label_space.num_classes());

    DatasetManifest out;
    out.label_space = manifest.label_space;
    out.config_hash = manifest.config_hash;
    out.stage = manifest.stage;

    RelabelSummary summary;
    summary.n_in = static_cast<long>(manifest.records.size());
    summary.mode = config.mode;

    if (config.mode == RelabelMode::kOff) {
        out.records = manifest.records;
        summary.n_kept = summary.n_in;
    } else {
        for (const auto& rec : manifest.records) {
            const auto logits = class_logits(gen, tmpl, manifest.label_space, rec.text);
            auto soft = soft_relabel(logits, config.tau_re);
            if (!passes_threshold(soft, config.t_re)) {
                ++summary.n_removed;
                continue;
            }
            SampleRecord r = rec;
            if (config.mode == RelabelMode::kHard) soft = hard_relabel(soft);
            r.hard_label = argmax_lowest_tie(soft);
            r.soft_label = std::move(soft);
            out.records.push_back(std::move(r));
            ++summary.n_kept;
        }
        log_info("relabel: kept " + std::to_string(summary.n_kept) + "/" +
                 std::to_string(summary.n_in) + " records (mode=" +
                 relabel_mode_name(config.mode) + ")");
    }
    out.advance_stage(Stage::kRelabeled);
    out.validate();
    if (summary_out) *summary_out = summary;
    return out;
}

} // namespace unigen
