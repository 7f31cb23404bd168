#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "test_support.hpp"
#include "unigen/config.hpp"
#include "unigen/dataset_io.hpp"
#include "unigen/label_space.hpp"
#include "unigen/prompt_template.hpp"
#include "unigen/sample_record.hpp"
#include "unigen/sha256.hpp"

using namespace unigen;

namespace {

LabelSpace sentiment() { return LabelSpace({"negative", "positive"}); }

SampleRecord make_record(std::string text, std::vector<double> soft) {
    SampleRecord r;
    r.text = std::move(text);
    r.seed_label = 0;
    r.soft_label = std::move(soft);
    r.hard_label = argmax_lowest_tie(r.soft_label);
    r.provenance.generator_id = "stub";
    r.provenance.template_name = "universal";
    r.provenance.top_k = 40;
    r.provenance.top_p = 0.9;
    r.provenance.max_new_tokens = 64;
    r.provenance.seed = 7;
    return r;
}

} // namespace

TEST_CASE("sha256 known vectors") {
    CHECK(Sha256::hex_digest("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(Sha256::hex_digest("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(Sha256::hex_digest("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    // Multi-block input.
    CHECK(Sha256::hex_digest(std::string(1000, 'a')) ==
          "41edece42d63e8d9bf515a9ba6932e1c20cbc9f5a5d134645adb5db1b9737ea3");
}

TEST_CASE("label space invariants") {
    CHECK_THROWS_AS(LabelSpace({"only"}), ValidationError);
    CHECK_THROWS_AS(LabelSpace({"a", "b"}, {"x", "x"}), ValidationError);
    CHECK_THROWS_AS(LabelSpace({"a", "b"}, {"x", ""}), ValidationError);
    const auto ls = sentiment();
    CHECK(ls.num_classes() == 2);
    CHECK(ls.class_ids() == std::vector<int>{0, 1});
    CHECK(ls.verbalizer(1) == "positive");
    CHECK(ls.class_of_name("negative") == 0);
    CHECK(ls.class_of_name("nope") == -1);
}

TEST_CASE("prompt template slot validation") {
    CHECK_THROWS_AS(PromptTemplate("no slots here", TemplateKind::kUniversal), TemplateError);
    CHECK_THROWS_AS(PromptTemplate("<label> and <label>", TemplateKind::kUniversal),
                    TemplateError);
    CHECK_THROWS_AS(PromptTemplate("<label> <text> <text>", TemplateKind::kUniversal),
                    TemplateError);
    const PromptTemplate t("The text in <label> sentiment is: <text>", TemplateKind::kUniversal);
    CHECK(t.has_text_slot());
}

TEST_CASE("argmax breaks ties toward the lowest class id") {
    CHECK(argmax_lowest_tie({0.5, 0.5}) == 0);
    CHECK(argmax_lowest_tie({0.2, 0.3, 0.3, 0.2}) == 1);
    CHECK(argmax_lowest_tie({0.1, 0.2, 0.7}) == 2);
}

TEST_CASE("record validation catches invariant violations") {
    auto r = make_record("ok", {0.5, 0.5});
    CHECK_NOTHROW(r.validate(2));

    auto bad_sum = r;
    bad_sum.soft_label = {0.5, 0.3};
    CHECK_THROWS_AS(bad_sum.validate(2, 4), ValidationError);
    CHECK_THROWS_WITH_AS(bad_sum.validate(2, 4),
                         doctest::Contains("record 4"), ValidationError);

    auto bad_argmax = r;
    bad_argmax.soft_label = {0.2, 0.8};
    bad_argmax.hard_label = 0;
    CHECK_THROWS_AS(bad_argmax.validate(2), ValidationError);

    auto empty_text = r;
    empty_text.text = "   \t ";
    CHECK_THROWS_AS(empty_text.validate(2), ValidationError);

    auto bad_weight = r;
    bad_weight.weight = 1.5;
    CHECK_THROWS_AS(bad_weight.validate(2), ValidationError);
}

TEST_CASE("stage transitions are monotone") {
    DatasetManifest m;
    m.label_space = sentiment();
    m.stage = Stage::kRelabeled;
    CHECK_NOTHROW(m.advance_stage(Stage::kRelabeled));
    CHECK_NOTHROW(m.advance_stage(Stage::kSelected));
    CHECK_THROWS_AS(m.advance_stage(Stage::kGenerated), ValidationError);
}

TEST_CASE("empty manifest writes header only") {
    testutil::TempDir tmp("io_empty");
    DatasetManifest m;
    m.label_space = sentiment();
    m.config_hash = "deadbeef";
    write_dataset(m, tmp.path("empty.jsonl"));
    const std::string content = testutil::slurp(tmp.path("empty.jsonl"));
    CHECK(std::count(content.begin(), content.end(), '\n') == 1);
    const auto back = read_dataset(tmp.path("empty.jsonl"));
    CHECK(back.records.empty());
    CHECK(back.label_space == m.label_space);
    CHECK(back.config_hash == "deadbeef");
    CHECK(back.stage == Stage::kGenerated);
}

TEST_CASE("single record round trip") {
    testutil::TempDir tmp("io_one");
    DatasetManifest m;
    m.label_space = sentiment();
    m.records.push_back(make_record("Do not buy from this seller.", {0.79, 0.21}));
    write_dataset(m, tmp.path("one.jsonl"));
    const auto back = read_dataset(tmp.path("one.jsonl"));
    REQUIRE(back.records.size() == 1);
    CHECK(back.records[0] == m.records[0]);
    CHECK(back.records[0].hard_label == 0);
}

TEST_CASE("1000 random records round trip field-for-field") {
    testutil::TempDir tmp("io_many");
    Rng rng(20240601);
    DatasetManifest m;
    m.label_space = LabelSpace({"a", "b", "c"});
    m.stage = Stage::kRelabeled;
    m.config_hash = "cafe";
    for (int i = 0; i < 1000; ++i) m.records.push_back(testutil::random_record(rng, 3));
    write_dataset(m, tmp.path("many.jsonl"));
    const auto back = read_dataset(tmp.path("many.jsonl"));
    REQUIRE(back.records.size() == m.records.size());
    for (std::size_t i = 0; i < m.records.size(); ++i) CHECK(back.records[i] == m.records[i]);
    CHECK(back.stage == Stage::kRelabeled);

    SUBCASE("write-read-write is byte identical") {
        write_dataset(back, tmp.path("many2.jsonl"));
        CHECK(testutil::slurp(tmp.path("many.jsonl")) == testutil::slurp(tmp.path("many2.jsonl")));
    }
}

TEST_CASE("read rejects invalid content") {
    testutil::TempDir tmp("io_bad");
    DatasetManifest m;
    m.label_space = sentiment();
    m.records.push_back(make_record("fine", {0.6, 0.4}));
    m.records.push_back(make_record("also fine", {0.3, 0.7}));
    write_dataset(m, tmp.path("data.jsonl"));

    SUBCASE("soft label summing to 0.8 fails validation") {
        std::string content = testutil::slurp(tmp.path("data.jsonl"));
        auto pos = content.find("[0.59999999999999998,0.40000000000000002]");
        if (pos == std::string::npos) pos = content.find("[0.6,0.4]");
        REQUIRE(pos != std::string::npos);
        const auto end = content.find(']', pos);
        content.replace(pos, end - pos + 1, "[0.5,0.3]");
        std::ofstream(tmp.path("bad.jsonl"), std::ios::binary) << content;
        CHECK_THROWS_AS(read_dataset(tmp.path("bad.jsonl")), ValidationError);
    }

    SUBCASE("truncated final line reports its line number") {
        std::string content = testutil::slurp(tmp.path("data.jsonl"));
        content.resize(content.size() - 20);
        std::ofstream(tmp.path("trunc.jsonl"), std::ios::binary) << content;
        try {
            read_dataset(tmp.path("trunc.jsonl"));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
    }

    SUBCASE("unwritable path raises IoError") {
        DatasetManifest empty;
        empty.label_space = sentiment();
        CHECK_THROWS_AS(write_dataset(empty, tmp.path("nodir/out.jsonl")), IoError);
    }

    SUBCASE("writing an invalid record names its index") {
        DatasetManifest bad = m;
        bad.records[1].soft_label = {0.9, 0.9};
        CHECK_THROWS_WITH_AS(write_dataset(bad, tmp.path("x.jsonl")),
                             doctest::Contains("record 1"), ValidationError);
    }
}

TEST_CASE("float formatting round-trips exactly") {
    Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.uniform01();
        const std::string s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.79) == "0.79000000000000004");
}

TEST_CASE("config parsing, canonical text, and hashing") {
    const auto c = Config::from_text(
        "# comment\n"
        "b.key = two words \n"
        "  a.key=1\n"
        "\n"
        "list.key = x, y ,z\n"
        "flag = true\n");
    CHECK(c.get("a.key") == "1");
    CHECK(c.get_int("a.key", -1) == 1);
    CHECK(c.get("b.key") == "two words");
    CHECK(c.get_list("list.key") == std::vector<std::string>{"x", "y", "z"});
    CHECK(c.get_bool("flag", false));
    CHECK(c.get_double("missing", 2.5) == 2.5);
    CHECK_THROWS_AS(c.get("missing"), ConfigError);
    CHECK_THROWS_AS(c.get_int("b.key", 0), ConfigError);

    // Canonical text is sorted and insensitive to input ordering/whitespace.
    const auto c2 = Config::from_text("list.key=x, y ,z\nflag=true\na.key = 1\nb.key=two words\n");
    CHECK(c.canonical_text() == c2.canonical_text());
    CHECK(c.hash() == c2.hash());
    CHECK(c.hash().size() == 64);

    const auto c3 = Config::from_text("a.key = 2\n");
    CHECK(c.hash() != c3.hash());

    CHECK_THROWS_AS(Config::from_text("no equals sign"), ParseError);
}
