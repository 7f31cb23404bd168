#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck.hpp"
#include "scl_oracle.hpp"
#include "test_support.hpp"
#include "unigen/encoder.hpp"
#include "unigen/losses.hpp"
#include "unigen/memory_bank.hpp"

using namespace unigen;

TEST_CASE("soft cross entropy closed forms") {
    SUBCASE("uniform logits, uniform target is ln 2") {
        Matrix logits(1, 2);
        Matrix t(1, 2);
        t.at(0, 0) = 0.5;
        t.at(0, 1) = 0.5;
        CHECK(ce_soft(logits, t) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("one-hot target gives -ln p") {
        Matrix logits(1, 3);
        logits.at(0, 0) = 1.0;
        logits.at(0, 2) = -0.5;
        Matrix t(1, 3);
        t.at(0, 2) = 1.0;
        const auto p = softmax_rows(logits);
        CHECK(ce_soft(logits, t) == doctest::Approx(-std::log(p.at(0, 2))).epsilon(1e-12));
    }
    SUBCASE("logits [2,0], target [0.7,0.3]") {
        Matrix logits(1, 2);
        logits.at(0, 0) = 2.0;
        Matrix t(1, 2);
        t.at(0, 0) = 0.7;
        t.at(0, 1) = 0.3;
        const double expect = 0.3 * 2.0 + std::log(1.0 + std::exp(-2.0));
        CHECK(ce_soft(logits, t) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(expect == doctest::Approx(0.7269).epsilon(1e-4));
    }
    SUBCASE("batch mean") {
        Matrix logits(2, 2);
        Matrix t(2, 2);
        t.at(0, 0) = 1.0;
        t.at(1, 1) = 1.0;
        CHECK(ce_soft(logits, t) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("scl special cases") {
    MemoryBank empty_bank(4);

    SUBCASE("two identical same-class unit vectors give zero") {
        Matrix p(2, 3);
        p.at(0, 0) = 1.0;
        p.at(1, 0) = 1.0;
        CHECK(scl_loss(p, {1, 1}, empty_bank, 0.2) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("single anchor with empty bank returns 0 with a no-positive event") {
        Matrix p(1, 3);
        p.at(0, 1) = 1.0;
        bool no_pos = false;
        CHECK(scl_loss(p, {0}, empty_bank, 0.2, &no_pos) == 0.0);
        CHECK(no_pos);
    }
    SUBCASE("all anchors distinct classes, empty bank: no positives anywhere") {
        Matrix p(2, 2);
        p.at(0, 0) = 1.0;
        p.at(1, 1) = 1.0;
        bool no_pos = false;
        CHECK(scl_loss(p, {0, 1}, empty_bank, 0.2, &no_pos) == 0.0);
        CHECK(no_pos);
    }
    SUBCASE("bank can supply the only positives") {
        Matrix p(1, 2);
        p.at(0, 0) = 1.0;
        MemoryBank bank(4);
        bank.push({{0.0, 1.0}, 0, 1.0});
        bank.push({{1.0, 0.0}, 1, 1.0});
        bool no_pos = true;
        const double v = scl_loss(p, {0}, bank, 0.2, &no_pos);
        CHECK_FALSE(no_pos);
        const double oracle =
            testutil::scl_oracle({{1.0, 0.0}}, {0}, {{0.0, 1.0}, {1.0, 0.0}}, {0, 1}, 0.2);
        CHECK(v == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("scl matches the brute-force oracle on fixed vectors") {
    // Four unit vectors in 2-D with classes [0,0,1,1].
    const std::vector<std::vector<double>> batch = {
        {1.0, 0.0}, {std::sqrt(0.5), std::sqrt(0.5)}, {0.0, 1.0}, {-1.0, 0.0}};
    const std::vector<int> ids = {0, 0, 1, 1};
    MemoryBank bank(4);
    const double mine = scl_loss(testutil::rows_to_matrix(batch), ids, bank, 0.2);
    const double oracle = testutil::scl_oracle(batch, ids, {}, {}, 0.2);
    CHECK(std::fabs(mine - oracle) <= 1e-6);
    CHECK(std::isfinite(mine));
}

TEST_CASE("scl matches the oracle on random batches with banks") {
    Rng rng(2024);
    for (int trial = 0; trial < 120; ++trial) {
        const int dim = 2 + static_cast<int>(rng.uniform_index(3));
        const int batch_n = 1 + static_cast<int>(rng.uniform_index(8));
        const int bank_n = static_cast<int>(rng.uniform_index(9));
        const int k = 2 + static_cast<int>(rng.uniform_index(2));
        const double tau = rng.uniform(0.1, 1.0);

        std::vector<std::vector<double>> batch, bankv;
        std::vector<int> bids, kids;
        for (int i = 0; i < batch_n; ++i) {
            batch.push_back(testutil::random_unit_vector(rng, dim));
            bids.push_back(static_cast<int>(rng.uniform_index(k)));
        }
        MemoryBank bank(16);
        for (int i = 0; i < bank_n; ++i) {
            bankv.push_back(testutil::random_unit_vector(rng, dim));
            kids.push_back(static_cast<int>(rng.uniform_index(k)));
            bank.push({bankv.back(), kids.back(), 1.0});
        }
        const double mine = scl_loss(testutil::rows_to_matrix(batch), bids, bank, tau);
        const double oracle = testutil::scl_oracle(batch, bids, bankv, kids, tau);
        CHECK(std::fabs(mine - oracle) <= 1e-6);
    }
}

TEST_CASE("scl is invariant under a common orthogonal rotation") {
    Rng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        const int dim = 3;
        const int batch_n = 4;
        std::vector<std::vector<double>> batch, bankv;
        std::vector<int> bids = {0, 1, 0, 1};
        for (int i = 0; i < batch_n; ++i) batch.push_back(testutil::random_unit_vector(rng, dim));
        MemoryBank bank(8);
        for (int i = 0; i < 3; ++i) {
            bankv.push_back(testutil::random_unit_vector(rng, dim));
            bank.push({bankv.back(), i % 2, 1.0});
        }
        const double before = scl_loss(testutil::rows_to_matrix(batch), bids, bank, 0.2);

        const Matrix q = testutil::random_orthogonal(rng, dim);
        const auto rotate = [&](const std::vector<double>& v) {
            std::vector<double> out(dim, 0.0);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) out[i] += q.at(i, j) * v[j];
            return out;
        };
        std::vector<std::vector<double>> rb;
        for (const auto& v : batch) rb.push_back(rotate(v));
        MemoryBank bank2(8);
        for (std::size_t i = 0; i < bankv.size(); ++i) {
            auto rv = rotate(bankv[i]);
            double n = 0.0;
            for (double x : rv) n += x * x;
            n = std::sqrt(n);
            for (double& x : rv) x /= n;
            bank2.push({rv, static_cast<int>(i % 2), 1.0});
        }
        const double after = scl_loss(testutil::rows_to_matrix(rb), bids, bank2, 0.2);
        CHECK(std::fabs(before - after) <= 1e-6);
    }
}

TEST_CASE("combined loss composition") {
    const BagEncoder enc([] {
        EncoderSpec s;
        s.arch = "bag";
        s.feature_dim = 16;
        s.hidden = 8;
        s.proj_dim = 4;
        return s;
    }());
    auto params = enc.init_params(13);
    const std::vector<std::string> texts = {"up good", "down bad"};
    Matrix targets(2, 2);
    targets.at(0, 1) = 1.0;
    targets.at(1, 0) = 1.0;
    const std::vector<int> ids = {1, 0};
    MemoryBank bank(4);
    bank.push({{1.0, 0.0, 0.0, 0.0}, 1, 1.0});

    SUBCASE("alpha=0 equals ce exactly") {
        Tape t;
        const auto out = enc.forward(t, texts, params, false, true);
        auto* combined =
            combined_loss_node(t, out.logits, out.projections, targets, ids, bank, 0.0, 0.2);
        Tape t2;
        const auto out2 = enc.forward(t2, texts, params, false, true);
        auto* ce = ce_soft_node(t2, out2.logits, targets);
        CHECK(combined->value.at(0, 0) == ce->value.at(0, 0));
    }
    SUBCASE("alpha=0.5 adds half the scl value") {
        Tape t;
        const auto out = enc.forward(t, texts, params, false, true);
        SclResult scl;
        auto* combined = combined_loss_node(t, out.logits, out.projections, targets, ids, bank,
                                            0.5, 0.2, nullptr, &scl);
        Tape t2;
        const auto out2 = enc.forward(t2, texts, params, false, true);
        auto* ce = ce_soft_node(t2, out2.logits, targets);
        const double scl_value = scl.loss->value.at(0, 0);
        CHECK(combined->value.at(0, 0) ==
              doctest::Approx(ce->value.at(0, 0) + 0.5 * scl_value).epsilon(1e-12));
    }
    SUBCASE("zero scl contribution collapses to ce for any alpha") {
        MemoryBank empty(4);
        Tape t;
        const auto out = enc.forward(t, {"solo text"}, params, false, true);
        Matrix t1(1, 2);
        t1.at(0, 0) = 1.0;
        auto* combined = combined_loss_node(t, out.logits, out.projections, t1, {0}, empty,
                                            0.7, 0.2);
        Tape t2;
        const auto out2 = enc.forward(t2, {"solo text"}, params, false, true);
        auto* ce = ce_soft_node(t2, out2.logits, t1);
        CHECK(combined->value.at(0, 0) == doctest::Approx(ce->value.at(0, 0)).epsilon(1e-12));
    }
}

TEST_CASE("combined loss gradients pass finite differences with a bank") {
    const BagEncoder enc([] {
        EncoderSpec s;
        s.arch = "bag";
        s.feature_dim = 8;
        s.hidden = 6;
        s.proj_dim = 4;
        return s;
    }());
    const std::vector<std::string> texts = {"alpha one", "beta two", "gamma three"};
    Matrix targets(3, 2);
    targets.at(0, 0) = 0.8;
    targets.at(0, 1) = 0.2;
    targets.at(1, 0) = 0.1;
    targets.at(1, 1) = 0.9;
    targets.at(2, 0) = 0.5;
    targets.at(2, 1) = 0.5;
    const std::vector<int> ids = {0, 1, 0};
    Rng rng(5);
    MemoryBank bank(4);
    bank.push({testutil::random_unit_vector(rng, 4), 0, 1.0});
    bank.push({testutil::random_unit_vector(rng, 4), 1, 1.0});

    for (double alpha : {0.0, 0.5}) {
        auto params = enc.init_params(21);
        const auto f = [&](Tape& t, ParamSet& p) {
            const auto out = enc.forward(t, texts, p, true, true);
            return combined_loss_node(t, out.logits, out.projections, targets, ids, bank, alpha,
                                      0.2);
        };
        CHECK(testutil::gradcheck(params, f) < 5e-6);
    }
}

TEST_CASE("weighted ce scales per-sample contributions") {
    Matrix logits(2, 2);
    logits.at(0, 0) = 1.0;
    logits.at(1, 1) = 2.0;
    Matrix targets(2, 2);
    targets.at(0, 0) = 1.0;
    targets.at(1, 1) = 1.0;
    const std::vector<double> w = {1.0, 3.0};
    Tape t;
    auto* n = ce_soft_node(t, t.constant(logits), targets, &w);
    // Manual: (1*l0 + 3*l1) / 4
    const auto p = softmax_rows(logits);
    const double expect = (-std::log(p.at(0, 0)) - 3.0 * std::log(p.at(1, 1))) / 4.0;
    CHECK(n->value.at(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}
