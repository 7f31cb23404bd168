#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "unigen/evaluation.hpp"
#include "unigen/fixture.hpp"
#include "unigen/trainer.hpp"

using namespace unigen;

namespace {

Checkpoint trained_checkpoint(std::uint64_t seed) {
    auto corpus = testutil::make_planted_corpus(80, 0.0, seed);
    TrainConfig cfg;
    cfg.encoder.arch = "bag";
    cfg.encoder.feature_dim = 128;
    cfg.encoder.hidden = 16;
    cfg.encoder.proj_dim = 8;
    cfg.lr = 0.05;
    cfg.batch_size = 16;
    cfg.epochs = 3;
    const auto result = train(corpus.manifest, cfg, seed);
    return make_checkpoint(result, corpus.manifest.label_space, "h", cfg, seed);
}

} // namespace

TEST_CASE("eval corpus loading") {
    testutil::TempDir tmp("corpus");
    const auto ls = fixture_label_space();

    SUBCASE("tsv with numeric and named labels") {
        std::ofstream(tmp.path("c.tsv"), std::ios::binary)
            << "0\tterrible thing\n"
            << "1\twonderful thing\n"
            << "positive\tquite charming\n";
        const auto c = load_eval_corpus(tmp.path("c.tsv"), CorpusFormat::kTsv, ls);
        REQUIRE(c.items.size() == 3);
        CHECK(c.items[0].first == "terrible thing");
        CHECK(c.items[0].second == 0);
        CHECK(c.items[2].second == 1);
    }
    SUBCASE("jsonl format") {
        std::ofstream(tmp.path("c.jsonl"), std::ios::binary)
            << R"({"text":"awful stuff","label":0})" << "\n"
            << R"({"text":"brilliant stuff","label":1})" << "\n";
        const auto c = load_eval_corpus(tmp.path("c.jsonl"), CorpusFormat::kJsonl, ls);
        REQUIRE(c.items.size() == 2);
        CHECK(c.items[1].first == "brilliant stuff");
    }
    SUBCASE("unknown label reports the line") {
        std::ofstream(tmp.path("bad.tsv"), std::ios::binary)
            << "0\tfine\n"
            << "2\tout of range\n";
        CHECK_THROWS_WITH_AS(load_eval_corpus(tmp.path("bad.tsv"), CorpusFormat::kTsv, ls),
                             doctest::Contains("line 2"), ValidationError);
    }
    SUBCASE("format detection by extension") {
        CHECK(corpus_format_from_path("x.jsonl") == CorpusFormat::kJsonl);
        CHECK(corpus_format_from_path("x.tsv") == CorpusFormat::kTsv);
    }
}

TEST_CASE("evaluate computes exact per-domain accuracy and mean") {
    const auto ckpt = trained_checkpoint(3);

    // Tiny corpora with known content; model trained on the planted cues.
    EvalCorpus easy;
    easy.items = {{"wonderful excellent really", 1},
                  {"terrible awful quite", 0},
                  {"charming delightful", 1},
                  {"dreadful horrible", 0}};
    EvalCorpus half;
    half.items = {{"wonderful brilliant", 1}, {"fantastic excellent", 0}}; // second mislabeled

    const auto report = evaluate(ckpt, {{"easy", easy}, {"half", half}}, {1, 2, 3, 4, 5});
    CHECK(report.per_domain_accuracy.at("easy") == 1.0);
    CHECK(report.per_domain_accuracy.at("half") == 0.5);
    CHECK(report.average == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(report.seeds.size() == 5);
    CHECK(report.per_seed.size() == 5);

    // Average recomputed from per-domain values matches exactly.
    double total = 0.0;
    for (const auto& [d, a] : report.per_domain_accuracy) total += a;
    CHECK(report.average == total / report.per_domain_accuracy.size());

    const auto j = report_to_json(report);
    CHECK(j.at("average").get<double>() == report.average);
    const auto table = report_table(report);
    CHECK(table.find("easy") != std::string::npos);
    CHECK(table.find("average") != std::string::npos);

    SUBCASE("empty corpus rejected") {
        CHECK_THROWS_AS(evaluate(ckpt, {{"empty", EvalCorpus{}}}, {1}), ValidationError);
    }
}

TEST_CASE("prompting baseline agrees with relabel scoring argmax") {
    FixtureLm lm(fixture_label_space());
    const PromptTemplate tmpl("The text in <label> sentiment is: <text>",
                              TemplateKind::kUniversal);
    const auto corpora = make_fixture_corpora(40, 77);
    const auto& corpus = corpora.at("movie");
    const double acc = prompting_baseline(lm, tmpl, fixture_label_space(), corpus);
    CHECK(acc > 0.6); // subtle-cue sentences are scored inverted by design

    // Shared scoring path: baseline accuracy recomputed from class_logits
    // argmax matches exactly.
    long agree = 0;
    for (const auto& [text, label] : corpus.items) {
        const auto logits = class_logits(lm, tmpl, fixture_label_space(), text);
        REQUIRE(logits.size() == 2);
        CHECK(logits[0] <= 0.0);
        CHECK(logits[1] <= 0.0);
        if (argmax_lowest_tie(logits) == label) ++agree;
    }
    CHECK(acc == doctest::Approx(double(agree) / corpus.items.size()).epsilon(1e-15));
}

TEST_CASE("stub scorer baselines") {
    const auto ls = fixture_label_space();
    const PromptTemplate tmpl("The text in <label> sentiment is: <text>",
                              TemplateKind::kUniversal);
    EvalCorpus all_zero;
    all_zero.items = {{"a", 0}, {"b", 0}, {"c", 0}};

    SUBCASE("scorer preferring class 0 is perfect on an all-zero corpus") {
        testutil::StubLm lm("unused", {-0.5, -2.0});
        CHECK(prompting_baseline(lm, tmpl, ls, all_zero) == 1.0);
    }
    SUBCASE("symmetric logits tie-break to class 0") {
        testutil::StubLm lm("unused", {-1.0, -1.0});
        EvalCorpus mixed;
        mixed.items = {{"a", 0}, {"b", 1}, {"c", 0}, {"d", 1}};
        CHECK(prompting_baseline(lm, tmpl, ls, mixed) == 0.5);
    }
}

TEST_CASE("project_2d recovers a planar subspace") {
    const auto ckpt = trained_checkpoint(9);

    SUBCASE("fewer than 3 points is an error") {
        EvalCorpus tiny;
        tiny.items = {{"one", 0}, {"two", 1}};
        CHECK_THROWS_AS(project_2d(ckpt, {{"d", tiny}}), ValidationError);
    }

    SUBCASE("output rows mirror input points; duplicates stay duplicated") {
        EvalCorpus c;
        c.items = {{"wonderful thing", 1}, {"terrible thing", 0}, {"wonderful thing", 1},
                   {"quite brilliant", 1}, {"awful overall", 0}};
        const auto pts = project_2d(ckpt, {{"d", c}});
        REQUIRE(pts.size() == 5);
        CHECK(pts[0].x == pts[2].x);
        CHECK(pts[0].y == pts[2].y);
        for (const auto& p : pts) CHECK(p.domain == "d");
    }

    SUBCASE("exact rank-2 data reconstructs to 1e-8") {
        // Synthetic projections in a 2-D subspace of an 8-D space: run PCA
        // internals through a hand-built matrix by projecting fixture texts,
        // then verifying the library on its own output is consistent.
        Rng rng(4);
        const int n = 10, dim = 8;
        Matrix basis(2, dim);
        for (int j = 0; j < dim; ++j) {
            basis.at(0, j) = rng.normal();
            basis.at(1, j) = rng.normal();
        }
        Matrix x(n, dim);
        std::vector<std::array<double, 2>> coeffs(n);
        for (int i = 0; i < n; ++i) {
            coeffs[i] = {rng.uniform(-3.0, 3.0), rng.uniform(-1.0, 1.0)};
            for (int j = 0; j < dim; ++j)
                x.at(i, j) = coeffs[i][0] * basis.at(0, j) + coeffs[i][1] * basis.at(1, j);
        }
        // Center and compute covariance + top-2 eigenvectors directly.
        std::vector<double> mean(dim, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dim; ++j) mean[j] += x.at(i, j) / n;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dim; ++j) x.at(i, j) -= mean[j];
        Matrix cov(dim, dim);
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < dim; ++a)
                for (int b = 0; b < dim; ++b) cov.at(a, b) += x.at(i, a) * x.at(i, b) / (n - 1);
        double l1 = 0.0;
        const auto v1 = unigen::detail::power_iteration(cov, 0x50ca5eedULL, &l1);
        Matrix defl = cov;
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) defl.at(a, b) -= l1 * v1[a] * v1[b];
        const auto v2 = unigen::detail::power_iteration(defl, 0x50ca5eeeULL, nullptr);
        // Reconstruction from the two components is exact for rank-2 data.
        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            double c1 = 0.0, c2 = 0.0;
            for (int j = 0; j < dim; ++j) {
                c1 += x.at(i, j) * v1[j];
                c2 += x.at(i, j) * v2[j];
            }
            for (int j = 0; j < dim; ++j) {
                const double recon = c1 * v1[j] + c2 * v2[j];
                err += (x.at(i, j) - recon) * (x.at(i, j) - recon);
            }
        }
        CHECK(std::sqrt(err) < 1e-8);
    }

    SUBCASE("refinement is deterministic and keeps the row count") {
        EvalCorpus c;
        c.items = {{"wonderful thing", 1}, {"terrible thing", 0}, {"quite brilliant", 1},
                   {"awful overall", 0},   {"charming really", 1}};
        const auto a = project_2d(ckpt, {{"d", c}}, 20, 5);
        const auto b = project_2d(ckpt, {{"d", c}}, 20, 5);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].x == b[i].x);
            CHECK(a[i].y == b[i].y);
        }
    }

    SUBCASE("csv writer emits one row per point") {
        testutil::TempDir tmp("proj");
        EvalCorpus c;
        c.items = {{"wonderful thing", 1}, {"terrible thing", 0}, {"quite brilliant", 1}};
        const auto pts = project_2d(ckpt, {{"d", c}});
        write_projection_csv(pts, tmp.path("p.csv"));
        const auto content = testutil::slurp(tmp.path("p.csv"));
        CHECK(std::count(content.begin(), content.end(), '\n') == 4);
        CHECK(content.rfind("x,y,domain,label\n", 0) == 0);
    }
}
