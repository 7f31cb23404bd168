#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unigen/errors.hpp"
#include "unigen/hash.hpp"
#include "unigen/label_space.hpp"
#include "unigen/log.hpp"
#include "unigen/prompt_template.hpp"
#include "unigen/rng.hpp"
#include "unigen/sample_record.hpp"
#include "unigen/text_generator.hpp"

namespace unigen {

inline int sample_seed_label(const LabelSpace& label_space, Rng& rng) {
    return static_cast<int>(rng.uniform_index(label_space.num_classes()));
}

// Fill the <label> slot with the class name and cut the template at the
// point where generation begins: the <text> slot and any whitespace before
// it are stripped.
inline std::string render_generation_prompt(const PromptTemplate& tmpl,
                                            const LabelSpace& label_space, int label) {
    if (!label_space.valid_class(label))
        throw ValidationError("label " + std::to_string(label) + " outside label space");
    std::string s = tmpl.text();
    const auto label_pos = s.find(kLabelSlot);
    if (label_pos == std::string::npos)
        throw TemplateError("template has no <label> slot: " + s);
    s.replace(label_pos, std::string(kLabelSlot).size(), label_space.name(label));
    const auto text_pos = s.find(kTextSlot);
    if (text_pos != std::string::npos) {
        auto cut = text_pos;
        while (cut > 0 && std::isspace(static_cast<unsigned char>(s[cut - 1]))) --cut;
        s.erase(cut);
    }
    return s;
}

struct GenerateStats {
    long empty_generations = 0; // samples discarded after exhausting retries
    long retries = 0;           // individual empty continuations seen
};

namespace detail {

inline std::string trim_at_stop_sequences(const std::string& text,
                                          const std::vector<std::string>& stops) {
    std::size_t cut = text.size();
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        const auto pos = text.find(stop);
        if (pos != std::string::npos && pos < cut) cut = pos;
    }
    return text.substr(0, cut);
}

} // namespace detail

// One sample from one prompt. Returns an empty optional when the generator
// produced only empty continuations for `max_retries` attempts in a row;
// the caller replaces such samples with fresh draws.
inline std::optional<SampleRecord> generate_sample(TextGenerator& gen,
                                                   const PromptTemplate& tmpl,
                                                   const LabelSpace& label_space,
                                                   const DecodingConfig& decoding,
                                                   std::uint64_t sample_seed,
                                                   GenerateStats& stats, int max_retries = 3) {
    decoding.validate();
    Rng label_rng(seed_split(sample_seed, 0x6c61u /* "la" */));
    const int seed_label = sample_seed_label(label_space, label_rng);
    const std::string prompt = render_generation_prompt(tmpl, label_space, seed_label);

    for (int attempt = 0; attempt < max_retries; ++attempt) {
        const std::uint64_t gen_seed = seed_split(sample_seed, 0x7478u /* "tx" */, attempt);
        std::string text = gen.generate(prompt, decoding, gen_seed);
        text = trim_copy(detail::trim_at_stop_sequences(text, decoding.stop_sequences));
        if (text.empty()) {
            ++stats.retries;
            continue;
        }
        SampleRecord r;
        r.text = std::move(text);
        r.seed_label = seed_label;
        r.soft_label = one_hot(seed_label, label_space.num_classes());
        r.hard_label = seed_label;
        r.provenance.generator_id = gen.id();
        r.provenance.template_name = tmpl.kind() == TemplateKind::kUniversal
                                         ? "universal"
                                         : tmpl.domain_name();
        r.provenance.top_k = decoding.top_k;
        r.provenance.top_p = decoding.top_p;
        r.provenance.max_new_tokens = decoding.max_new_tokens;
        r.provenance.seed = gen_seed;
        return r;
    }
    ++stats.empty_generations;
    return std::nullopt;
}

// Generates exactly `n_samples` records. Each template owns a fixed share of
// output slots (round-robin, remainder to the earliest templates) and an
// independent candidate stream, so discards are replaced within the same
// template and the final per-template counts are exact.
inline DatasetManifest generate_dataset(TextGenerator& gen,
                                        const std::vector<PromptTemplate>& templates,
                                        const LabelSpace& label_space,
                                        const DecodingConfig& decoding, long n_samples,
                                        std::uint64_t master_seed,
                                        GenerateStats* stats_out = nullptr,
                                        int max_retries = 3) {
    if (templates.empty()) throw ValidationError("generate_dataset needs at least one template");
    if (n_samples < 0) throw ValidationError("n_samples must be >= 0");

    const long t_count = static_cast<long>(templates.size());
    GenerateStats stats;
    DatasetManifest manifest;
    manifest.label_space = label_space;
    manifest.stage = Stage::kGenerated;

    // Slot k belongs to template k % T; per-template quota n/T plus one for
    // the first n % T templates.
    std::vector<std::vector<SampleRecord>> per_template(templates.size());
    for (long t = 0; t < t_count; ++t) {
        const long quota = n_samples / t_count + (t < n_samples % t_count ? 1 : 0);
        per_template[t].reserve(quota);
        long candidate = 0;
        while (static_cast<long>(per_template[t].size()) < quota) {
            const std::uint64_t sample_seed =
                seed_split(master_seed, static_cast<std::uint64_t>(t),
                           static_cast<std::uint64_t>(candidate));
            try {
                auto rec = generate_sample(gen, templates[t], label_space, decoding,
                                           sample_seed, stats, max_retries);
                if (rec) per_template[t].push_back(std::move(*rec));
            } catch (const Error& e) {
                throw Error("generator failed at template " + std::to_string(t) +
                            ", candidate " + std::to_string(candidate) + ": " + e.what());
            }
            ++candidate;
            if (candidate > quota * 100 + 1000)
                throw Error("generator produced only empty continuations; giving up after " +
                            std::to_string(candidate) + " candidates");
        }
    }
    // Interleave back into slot order.
    std::vector<std::size_t> next(templates.size(), 0);
    for (long k = 0; k < n_samples; ++k) {
        const long t = k % t_count;
        manifest.records.push_back(std::move(per_template[t][next[t]++]));
    }
    if (stats.empty_generations > 0)
        log_info("generate: replaced " + std::to_string(stats.empty_generations) +
                 " empty-generation samples");
    if (stats_out) *stats_out = stats;
    manifest.validate();
    return manifest;
}

} // namespace unigen
