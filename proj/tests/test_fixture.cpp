#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "unigen/fixture.hpp"
#include "unigen/generator.hpp"
#include "unigen/relabeler.hpp"

using namespace unigen;

namespace {

PromptTemplate universal() {
    return PromptTemplate("The text in <label> sentiment is: <text>", TemplateKind::kUniversal);
}

} // namespace

TEST_CASE("fixture generation is deterministic and label-conditioned") {
    FixtureLm lm(fixture_label_space());
    const std::string prompt = "The text in positive sentiment is:";
    const DecodingConfig d;
    CHECK(lm.generate(prompt, d, 7) == lm.generate(prompt, d, 7));
    CHECK(lm.generate(prompt, d, 7) != lm.generate(prompt, d, 8));

    // Honest majority: most positive-prompt texts score positive.
    int agree = 0;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
        const std::string text = lm.generate(prompt, d, 1000 + i);
        const auto logits = lm.score_next_tokens(text + "\nThe text in", {" negative", " positive"});
        if (logits[1] > logits[0]) ++agree;
    }
    CHECK(agree > n * 0.55);
    CHECK(agree < n * 0.95); // noise channels leave a real minority
}

TEST_CASE("fixture scorer emits normalized log-probabilities") {
    FixtureLm lm(fixture_label_space());
    // Texts chosen outside the scorer's per-text bias region.
    const auto logits = lm.score_next_tokens("wonderful excellent thing\nThe text in",
                                             {" negative", " positive"});
    REQUIRE(logits.size() == 2);
    CHECK(logits[0] <= 0.0);
    CHECK(logits[1] <= 0.0);
    CHECK(std::exp(logits[0]) + std::exp(logits[1]) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(logits[1] > logits[0]);

    // Subtle cues are scored inverted.
    const auto subtle =
        lm.score_next_tokens("sluggish clumsy lifeless\nThe text in", {" negative", " positive"});
    CHECK(subtle[1] > subtle[0]); // honest-negative text, scorer says positive

    // A fraction of texts carries a deterministic scorer offset.
    int biased = 0;
    const int trials = 500;
    for (int i = 0; i < trials; ++i) {
        const std::string text = "wonderful thing number " + std::to_string(i);
        const auto a = lm.score_next_tokens(text + "\nThe text in", {" negative", " positive"});
        // Unbiased single-cue positive texts land near p ~ 0.52-0.53; the
        // offset pushes them to ~0.59 or ~0.47.
        const double p_pos = std::exp(a[1]);
        if (p_pos > 0.55 || p_pos < 0.49) ++biased;
    }
    CHECK(biased > trials * 0.06);
    CHECK(biased < trials * 0.2);
}

TEST_CASE("domain prompts plant domain tokens") {
    FixtureLm lm(fixture_label_space());
    const DecodingConfig d;
    int with_domain = 0;
    for (int i = 0; i < 50; ++i) {
        const auto text =
            lm.generate("The movie review in positive sentiment is:", d, 100 + i);
        for (const auto& tok : tokenize(text)) {
            if (tok == "movie" || tok == "plot" || tok == "acting" || tok == "screen" ||
                tok == "director") {
                ++with_domain;
                break;
            }
        }
    }
    CHECK(with_domain == 50);

    // Universal prompt yields no domain tokens.
    int with_domain_uni = 0;
    for (int i = 0; i < 50; ++i) {
        const auto text = lm.generate("The text in positive sentiment is:", d, 100 + i);
        for (const auto& tok : tokenize(text))
            if (tok == "movie" || tok == "restaurant" || tok == "tweet" || tok == "product")
                ++with_domain_uni;
    }
    CHECK(with_domain_uni == 0);
}

TEST_CASE("fixture end-to-end generation and relabeling behave statistically") {
    FixtureLm lm(fixture_label_space());
    const auto manifest =
        generate_dataset(lm, {universal()}, fixture_label_space(), DecodingConfig{}, 600, 42);
    CHECK(manifest.records.size() == 600);

    RelabelConfig cfg; // soft, tau 0.1, t_re 0.2
    RelabelSummary summary;
    const auto relabeled = relabel_dataset(manifest, lm, universal(), cfg, &summary);
    // Weak texts and some borderline ones fall below the threshold.
    CHECK(summary.n_removed > 30);
    CHECK(summary.n_removed < 200);

    // Relabeling fixes most plain flips: agreement between hard label and
    // the text's honest polarity should be high after relabeling.
    int honest_agree_before = 0, honest_agree_after = 0;
    const auto honest_polarity = [&lm](const std::string& text) {
        double s = 0.0;
        for (const auto& tok : tokenize(text)) {
            for (const auto& w : lm.vocab().pos)
                if (tok == w) s += 1.0;
            for (const auto& w : lm.vocab().neg)
                if (tok == w) s -= 1.0;
            for (const auto& w : lm.vocab().subtle_pos)
                if (tok == w) s += 0.8;
            for (const auto& w : lm.vocab().subtle_neg)
                if (tok == w) s -= 0.8;
        }
        return s >= 0 ? 1 : 0;
    };
    for (const auto& r : manifest.records)
        if (r.hard_label == honest_polarity(r.text)) ++honest_agree_before;
    for (const auto& r : relabeled.records)
        if (r.hard_label == honest_polarity(r.text)) ++honest_agree_after;
    const double before = double(honest_agree_before) / manifest.records.size();
    const double after = double(honest_agree_after) / relabeled.records.size();
    CHECK(after > before);
    CHECK(after > 0.8);
}

TEST_CASE("fixture corpora are balanced, deterministic, and learnable") {
    const auto corpora = make_fixture_corpora(200, 99);
    REQUIRE(corpora.size() == 4);
    for (const auto& [domain, corpus] : corpora) {
        REQUIRE(corpus.items.size() == 200);
        int pos = 0;
        for (const auto& [text, label] : corpus.items) pos += label;
        CHECK(pos == 100);
    }
    const auto again = make_fixture_corpora(200, 99);
    CHECK(again.at("movie").items == corpora.at("movie").items);
    const auto other = make_fixture_corpora(200, 100);
    CHECK(other.at("movie").items != corpora.at("movie").items);
}

TEST_CASE("fixture corpora files round-trip through the corpus loader") {
    testutil::TempDir tmp("fixture");
    const auto paths = write_fixture_corpora(tmp.root(), 50, 7);
    REQUIRE(paths.size() == 4);
    const auto direct = make_fixture_corpora(50, 7);
    for (const auto& [domain, path] : paths) {
        const auto loaded = load_eval_corpus(path, CorpusFormat::kTsv, fixture_label_space());
        CHECK(loaded.items == direct.at(domain).items);
    }
}

TEST_CASE("empty-generation knob exercises the retry path") {
    FixtureKnobs knobs;
    knobs.empty_rate = 0.3;
    FixtureLm lm(fixture_label_space(), knobs);
    GenerateStats stats;
    const auto manifest = generate_dataset(lm, {universal()}, fixture_label_space(),
                                           DecodingConfig{}, 100, 5, &stats);
    CHECK(manifest.records.size() == 100);
    CHECK(stats.retries > 0);
    for (const auto& r : manifest.records) CHECK_FALSE(r.text.empty());
}
