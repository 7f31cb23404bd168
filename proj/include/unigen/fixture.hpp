#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "unigen/errors.hpp"
#include "unigen/evaluation.hpp"
#include "unigen/featurizer.hpp"
#include "unigen/hash.hpp"
#include "unigen/label_space.hpp"
#include "unigen/rng.hpp"
#include "unigen/text_generator.hpp"

namespace unigen {

// Word pools for the bundled synthetic sentiment fixture. Normal cues carry
// their face polarity everywhere. Subtle cues are honest in real text but
// the fixture PLM scores them inverted, so they are the channel for
// confidently-wrong pseudo-labels that only sample weighting can catch.
// The pools are chosen hash-collision-free at feature dims 64/128/256.
struct FixtureVocab {
    std::vector<std::string> pos = {"wonderful", "excellent", "delightful",
                                    "fantastic", "charming",  "brilliant"};
    std::vector<std::string> neg = {"terrible", "awful",    "dreadful",
                                    "mediocre", "annoying", "horrible"};
    std::vector<std::string> subtle_pos = {"seamless", "sturdy", "graceful", "gleaming"};
    std::vector<std::string> subtle_neg = {"sluggish", "clumsy", "flimsy", "lifeless"};
    std::vector<std::string> filler = {"the", "it", "quite", "and", "overall", "thing", "really"};
    std::map<std::string, std::vector<std::string>> domains = {
        {"movie", {"movie", "plot", "acting", "screen", "director"}},
        {"product", {"product", "packaging", "battery", "seller", "shipping"}},
        {"restaurant", {"restaurant", "menu", "waiter", "flavor", "dish"}},
        {"tweet", {"tweet", "feed", "trending", "hashtag", "follower"}},
    };
};

struct FixtureKnobs {
    double noise_rate = 0.25;        // text polarity opposite to the prompt, normal cues
    double subtle_noise_rate = 0.10; // opposite polarity carried mostly by subtle cues
    double weak_rate = 0.10;         // near-neutral text, below the relabel threshold
    double empty_rate = 0.0;         // empty continuations, exercises the retry path
    double score_sharpness = 0.055;  // scorer scale: cue score -> log-prob gap
    double bias_rate = 0.12;         // texts the scorer reads with a systematic offset
    double bias_magnitude = 2.2;     // offset size; flips weak texts at moderate confidence
};

// Deterministic stand-in for the PLM. Generation draws sentences from the
// fixture grammar conditioned on the label parsed out of the prompt;
// scoring counts cue words in the text with subtle cues inverted.
class FixtureLm final : public TextGenerator {
public:
    FixtureLm(LabelSpace label_space, FixtureKnobs knobs = {}, FixtureVocab vocab = {})
        : labels_(std::move(label_space)), knobs_(std::move(knobs)), vocab_(std::move(vocab)) {
        if (labels_.num_classes() != 2)
            throw ValidationError("fixture LM models a binary sentiment label space");
    }

    std::string id() const override { return "fixture-lm"; }

    const FixtureKnobs& knobs() const { return knobs_; }
    const FixtureVocab& vocab() const { return vocab_; }

    std::string generate(const std::string& prompt, const DecodingConfig&,
                         std::uint64_t seed) override {
        Rng rng(seed);
        if (rng.uniform01() < knobs_.empty_rate) return "";
        const int label = parse_label(prompt);
        const std::string domain = parse_domain(prompt);

        const double u = rng.uniform01();
        int polarity = label;
        bool subtle_only = false;
        bool weak = false;
        if (u < knobs_.noise_rate) {
            polarity = 1 - label;
        } else if (u < knobs_.noise_rate + knobs_.subtle_noise_rate) {
            polarity = 1 - label;
            subtle_only = true;
        } else if (u < knobs_.noise_rate + knobs_.subtle_noise_rate + knobs_.weak_rate) {
            weak = true;
        }
        return compose(rng, polarity, domain, subtle_only, weak);
    }

    std::vector<double> score_next_tokens(const std::string& prompt,
                                          const std::vector<std::string>& candidates) override {
        const auto cut = prompt.find('\n');
        const std::string text = cut == std::string::npos ? prompt : prompt.substr(0, cut);
        double score = 0.0;
        for (const auto& tok : tokenize(text)) {
            if (contains(vocab_.pos, tok)) score += 1.0;
            else if (contains(vocab_.neg, tok)) score -= 1.0;
            else if (contains(vocab_.subtle_pos, tok)) score -= 0.8; // misread
            else if (contains(vocab_.subtle_neg, tok)) score += 0.8; // misread
        }
        const std::uint64_t h = fnv1a64(text);
        const double jitter = (static_cast<double>(h % 1000) / 1000.0 - 0.5) * 0.3;
        // A fraction of texts is read with a systematic offset; on short
        // texts this produces confident mislabels the soft targets discount.
        double bias = 0.0;
        const double u = static_cast<double>((h >> 17) % 10000) / 10000.0;
        if (u < knobs_.bias_rate / 2.0) bias = knobs_.bias_magnitude;
        else if (u < knobs_.bias_rate) bias = -knobs_.bias_magnitude;
        const double s = (score + jitter + bias) * knobs_.score_sharpness;

        std::vector<double> logits(candidates.size(), 0.0);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const std::string word = trim_copy(candidates[i]);
            const int cls = labels_.class_of_name(word);
            if (cls == 1) logits[i] = s;
            else if (cls == 0) logits[i] = -s;
        }
        // Normalize to log-probabilities over the candidate set.
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double sum = 0.0;
        for (double v : logits) sum += std::exp(v - mx);
        const double lse = mx + std::log(sum);
        for (auto& v : logits) v -= lse;
        return logits;
    }

    // Honest sentence in the fixture grammar: used to build eval corpora.
    std::string compose_eval_sentence(Rng& rng, int polarity, const std::string& domain,
                                      bool use_subtle) const {
        std::string out;
        const auto& dpool = vocab_.domains.at(domain);
        const int n_domain = 1 + static_cast<int>(rng.uniform_index(2));
        for (int i = 0; i < n_domain; ++i) append(out, dpool[rng.uniform_index(dpool.size())]);
        const int n_fill = 2 + static_cast<int>(rng.uniform_index(2));
        for (int i = 0; i < n_fill; ++i)
            append(out, vocab_.filler[rng.uniform_index(vocab_.filler.size())]);
        if (use_subtle) {
            const auto& spool = polarity == 1 ? vocab_.subtle_pos : vocab_.subtle_neg;
            append(out, spool[rng.uniform_index(spool.size())]);
            if (rng.uniform01() < 0.5) append_cues(out, rng, polarity, 1);
        } else {
            append_cues(out, rng, polarity, 1 + static_cast<int>(rng.uniform_index(3)));
            // Occasional minority-cue texture; majority stays with `polarity`.
            if (rng.uniform01() < 0.2) append_cues(out, rng, 1 - polarity, 1);
        }
        return out;
    }

private:
    static bool contains(const std::vector<std::string>& pool, const std::string& w) {
        for (const auto& x : pool)
            if (x == w) return true;
        return false;
    }

    static void append(std::string& out, const std::string& w) {
        if (!out.empty()) out += ' ';
        out += w;
    }

    void append_cues(std::string& out, Rng& rng, int polarity, int count) const {
        const auto& pool = polarity == 1 ? vocab_.pos : vocab_.neg;
        for (int i = 0; i < count; ++i) append(out, pool[rng.uniform_index(pool.size())]);
    }

    int parse_label(const std::string& prompt) const {
        for (int c = 0; c < labels_.num_classes(); ++c)
            if (prompt.find(labels_.name(c)) != std::string::npos) return c;
        throw ValidationError("fixture LM could not find a label word in the prompt: " + prompt);
    }

    std::string parse_domain(const std::string& prompt) const {
        for (const auto& [domain, pool] : vocab_.domains)
            if (prompt.find(domain) != std::string::npos) return domain;
        return "";
    }

    std::string compose(Rng& rng, int polarity, const std::string& domain, bool subtle_only,
                        bool weak) const {
        std::string out;
        const int n_fill = 2 + static_cast<int>(rng.uniform_index(3));
        for (int i = 0; i < n_fill; ++i)
            append(out, vocab_.filler[rng.uniform_index(vocab_.filler.size())]);
        if (!domain.empty()) {
            const auto& dpool = vocab_.domains.at(domain);
            const int n_domain = 1 + static_cast<int>(rng.uniform_index(2));
            for (int i = 0; i < n_domain; ++i) append(out, dpool[rng.uniform_index(dpool.size())]);
        }
        if (weak) {
            // One cue of each polarity nets out near zero.
            append_cues(out, rng, 1, 1);
            append_cues(out, rng, 0, 1);
        } else if (subtle_only) {
            // Subtle cues dominate and the scorer reads them inverted, but
            // the single normal cue leaves a detectable feature conflict.
            const auto& spool = polarity == 1 ? vocab_.subtle_pos : vocab_.subtle_neg;
            for (int i = 0; i < 3; ++i) append(out, spool[rng.uniform_index(spool.size())]);
            append_cues(out, rng, polarity, 1);
        } else {
            const int strength = 2 + static_cast<int>(rng.uniform_index(2));
            append_cues(out, rng, polarity, strength);
            // Graded texts: a minority cue moderates the soft label.
            if (rng.uniform01() < 0.4) append_cues(out, rng, 1 - polarity, 1);
            // Subtle cue used honestly alongside normal cues.
            if (rng.uniform01() < 0.35) {
                const auto& spool = polarity == 1 ? vocab_.subtle_pos : vocab_.subtle_neg;
                append(out, spool[rng.uniform_index(spool.size())]);
            }
        }
        return out;
    }

    LabelSpace labels_;
    FixtureKnobs knobs_;
    FixtureVocab vocab_;
};

inline LabelSpace fixture_label_space() { return LabelSpace({"negative", "positive"}); }

// 4 domains x per_domain balanced examples with honest cues; subtle cues
// appear in about a quarter of the sentences.
inline std::map<std::string, EvalCorpus> make_fixture_corpora(int per_domain, std::uint64_t seed,
                                                              double subtle_fraction = 0.3) {
    const FixtureLm lm(fixture_label_space());
    std::map<std::string, EvalCorpus> corpora;
    for (const auto& [domain, pool] : lm.vocab().domains) {
        Rng rng(seed_split(seed, fnv1a64(domain)));
        EvalCorpus corpus;
        for (int i = 0; i < per_domain; ++i) {
            const int label = i % 2;
            const bool subtle = rng.uniform01() < subtle_fraction;
            corpus.items.emplace_back(lm.compose_eval_sentence(rng, label, domain, subtle),
                                      label);
        }
        corpora[domain] = std::move(corpus);
    }
    return corpora;
}

// TSV files (label <TAB> text), one per domain.
inline std::map<std::string, std::string> write_fixture_corpora(const std::string& dir,
                                                                int per_domain,
                                                                std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    const auto corpora = make_fixture_corpora(per_domain, seed);
    std::map<std::string, std::string> paths;
    for (const auto& [domain, corpus] : corpora) {
        const std::string path = (std::filesystem::path(dir) / (domain + ".tsv")).string();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write fixture corpus: " + path);
        for (const auto& [text, label] : corpus.items) out << label << '\t' << text << '\n';
        paths[domain] = path;
    }
    return paths;
}

} // namespace unigen
