#pragma once

#include <memory>
#include <string>
#include <vector>

#include "unigen/autodiff.hpp"
#include "unigen/errors.hpp"
#include "unigen/featurizer.hpp"
#include "unigen/matrix.hpp"
#include "unigen/params.hpp"
#include "unigen/rng.hpp"

namespace unigen {

struct EncoderSpec {
    std::string arch = "bag"; // bag | transformer
    int num_classes = 2;
    int proj_dim = 256;
    // bag
    int feature_dim = 256;
    int hidden = 64;
    // transformer
    int vocab = 4096;
    int d_model = 32;
    int heads = 2;
    int ffn = 64;
    int layers = 2;
    int max_len = 32;

    void validate() const {
        if (arch != "bag" && arch != "transformer")
            throw ConfigError("unknown encoder arch: " + arch);
        if (num_classes < 2) throw ValidationError("encoder needs K >= 2");
        if (proj_dim < 1) throw ValidationError("proj_dim must be >= 1");
        if (arch == "transformer" && d_model % heads != 0)
            throw ValidationError("d_model must be divisible by heads");
    }
};

struct EncoderForward {
    Tape::Node* logits = nullptr;      // batch x K (null on the momentum path)
    Tape::Node* projections = nullptr; // batch x proj_dim, rows unit-norm
};

// Text encoder with a classification head and an L2-normalized projection
// head. forward() builds onto the caller's tape; with trainable=false the
// parameters enter as constants (the theta_k path).
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual const EncoderSpec& spec() const = 0;
    virtual ParamSet init_params(std::uint64_t seed) const = 0;
    virtual EncoderForward forward(Tape& tape, const std::vector<std::string>& texts,
                                   ParamSet& params, bool trainable,
                                   bool with_class_head) const = 0;

protected:
    static Tape::Node* enter(Tape& tape, Parameter& p, bool trainable) {
        return trainable ? tape.param(p) : tape.constant(p.value);
    }
    static Parameter& need(ParamSet& ps, const std::string& name) {
        Parameter* p = ps.find(name);
        if (!p) throw ValidationError("missing parameter: " + name);
        return *p;
    }
};

// Hashed bag-of-words features -> tanh MLP trunk -> linear heads.
class BagEncoder : public Encoder {
public:
    explicit BagEncoder(EncoderSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    const EncoderSpec& spec() const override { return spec_; }

    ParamSet init_params(std::uint64_t seed) const override {
        Rng rng(seed);
        ParamSet ps;
        const double s_in = 1.0 / std::sqrt(static_cast<double>(spec_.feature_dim));
        const double s_h = 1.0 / std::sqrt(static_cast<double>(spec_.hidden));
        ps.add("trunk.w1", Submodule::kTrunk,
               Matrix::randn(spec_.feature_dim, spec_.hidden, rng, s_in));
        ps.add("trunk.b1", Submodule::kTrunk, Matrix(1, spec_.hidden));
        ps.add("head.w", Submodule::kClassHead,
               Matrix::randn(spec_.hidden, spec_.num_classes, rng, s_h));
        ps.add("head.b", Submodule::kClassHead, Matrix(1, spec_.num_classes));
        ps.add("proj.w", Submodule::kProjHead,
               Matrix::randn(spec_.hidden, spec_.proj_dim, rng, s_h));
        ps.add("proj.b", Submodule::kProjHead, Matrix(1, spec_.proj_dim));
        return ps;
    }

    EncoderForward forward(Tape& tape, const std::vector<std::string>& texts, ParamSet& params,
                           bool trainable, bool with_class_head) const override {
        if (texts.empty()) throw ValidationError("encoder forward needs a non-empty batch");
        Tape::Node* x = tape.constant(hashed_bow_batch(texts, spec_.feature_dim));
        Tape::Node* h = tape.tanh_op(tape.add_row_broadcast(
            tape.matmul(x, enter(tape, need(params, "trunk.w1"), trainable)),
            enter(tape, need(params, "trunk.b1"), trainable)));
        EncoderForward out;
        if (with_class_head) {
            out.logits = tape.add_row_broadcast(
                tape.matmul(h, enter(tape, need(params, "head.w"), trainable)),
                enter(tape, need(params, "head.b"), trainable));
        }
        out.projections = tape.row_l2_normalize(tape.add_row_broadcast(
            tape.matmul(h, enter(tape, need(params, "proj.w"), trainable)),
            enter(tape, need(params, "proj.b"), trainable)));
        return out;
    }

private:
    EncoderSpec spec_;
};

// Two-block pre-LN transformer over hashed token ids, mean-pooled.
class TransformerEncoder : public Encoder {
public:
    explicit TransformerEncoder(EncoderSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        posenc_ = sinusoidal(spec_.max_len, spec_.d_model);
    }

    const EncoderSpec& spec() const override { return spec_; }

    ParamSet init_params(std::uint64_t seed) const override {
        Rng rng(seed);
        ParamSet ps;
        const int d = spec_.d_model;
        const int dh = d / spec_.heads;
        const double s_d = 1.0 / std::sqrt(static_cast<double>(d));
        ps.add("embed", Submodule::kTrunk, Matrix::randn(spec_.vocab, d, rng, 0.5));
        for (int l = 0; l < spec_.layers; ++l) {
            const std::string lp = "l" + std::to_string(l) + ".";
            for (int h = 0; h < spec_.heads; ++h) {
                const std::string hp = lp + "h" + std::to_string(h) + ".";
                ps.add(hp + "wq", Submodule::kTrunk, Matrix::randn(d, dh, rng, s_d));
                ps.add(hp + "wk", Submodule::kTrunk, Matrix::randn(d, dh, rng, s_d));
                ps.add(hp + "wv", Submodule::kTrunk, Matrix::randn(d, dh, rng, s_d));
            }
            ps.add(lp + "wo", Submodule::kTrunk, Matrix::randn(d, d, rng, s_d));
            ps.add(lp + "bo", Submodule::kTrunk, Matrix(1, d));
            ps.add(lp + "ln1.g", Submodule::kTrunk, Matrix::filled(1, d, 1.0));
            ps.add(lp + "ln1.b", Submodule::kTrunk, Matrix(1, d));
            ps.add(lp + "ffn.w1", Submodule::kTrunk, Matrix::randn(d, spec_.ffn, rng, s_d));
            ps.add(lp + "ffn.b1", Submodule::kTrunk, Matrix(1, spec_.ffn));
            ps.add(lp + "ffn.w2", Submodule::kTrunk,
                   Matrix::randn(spec_.ffn, d, rng, 1.0 / std::sqrt(double(spec_.ffn))));
            ps.add(lp + "ffn.b2", Submodule::kTrunk, Matrix(1, d));
            ps.add(lp + "ln2.g", Submodule::kTrunk, Matrix::filled(1, d, 1.0));
            ps.add(lp + "ln2.b", Submodule::kTrunk, Matrix(1, d));
        }
        ps.add("lnf.g", Submodule::kTrunk, Matrix::filled(1, d, 1.0));
        ps.add("lnf.b", Submodule::kTrunk, Matrix(1, d));
        ps.add("head.w", Submodule::kClassHead, Matrix::randn(d, spec_.num_classes, rng, s_d));
        ps.add("head.b", Submodule::kClassHead, Matrix(1, spec_.num_classes));
        ps.add("proj.w", Submodule::kProjHead, Matrix::randn(d, spec_.proj_dim, rng, s_d));
        ps.add("proj.b", Submodule::kProjHead, Matrix(1, spec_.proj_dim));
        return ps;
    }

    EncoderForward forward(Tape& tape, const std::vector<std::string>& texts, ParamSet& params,
                           bool trainable, bool with_class_head) const override {
        if (texts.empty()) throw ValidationError("encoder forward needs a non-empty batch");
        std::vector<Tape::Node*> pooled;
        pooled.reserve(texts.size());
        for (const auto& text : texts)
            pooled.push_back(encode_one(tape, text, params, trainable));
        Tape::Node* h = tape.concat_rows(pooled);
        h = tape.layer_norm_rows(h, enter(tape, need(params, "lnf.g"), trainable),
                                 enter(tape, need(params, "lnf.b"), trainable));
        EncoderForward out;
        if (with_class_head) {
            out.logits = tape.add_row_broadcast(
                tape.matmul(h, enter(tape, need(params, "head.w"), trainable)),
                enter(tape, need(params, "head.b"), trainable));
        }
        out.projections = tape.row_l2_normalize(tape.add_row_broadcast(
            tape.matmul(h, enter(tape, need(params, "proj.w"), trainable)),
            enter(tape, need(params, "proj.b"), trainable)));
        return out;
    }

private:
    Tape::Node* encode_one(Tape& tape, const std::string& text, ParamSet& params,
                           bool trainable) const {
        const auto ids = token_ids(text, spec_.vocab, spec_.max_len);
        const int len = static_cast<int>(ids.size());
        const int d = spec_.d_model;
        const int dh = d / spec_.heads;

        Parameter& table = need(params, "embed");
        Tape::Node* x = trainable ? tape.embedding(table, ids)
                                  : tape.constant(gather_rows(table.value, ids));
        Matrix pe(len, d);
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < d; ++j) pe.at(i, j) = posenc_.at(i, j);
        x = tape.add_const(x, pe);

        for (int l = 0; l < spec_.layers; ++l) {
            const std::string lp = "l" + std::to_string(l) + ".";
            Tape::Node* h = tape.layer_norm_rows(
                x, enter(tape, need(params, lp + "ln1.g"), trainable),
                enter(tape, need(params, lp + "ln1.b"), trainable));
            std::vector<Tape::Node*> head_ctx;
            head_ctx.reserve(spec_.heads);
            for (int hd = 0; hd < spec_.heads; ++hd) {
                const std::string hp = lp + "h" + std::to_string(hd) + ".";
                Tape::Node* q = tape.matmul(h, enter(tape, need(params, hp + "wq"), trainable));
                Tape::Node* k = tape.matmul(h, enter(tape, need(params, hp + "wk"), trainable));
                Tape::Node* v = tape.matmul(h, enter(tape, need(params, hp + "wv"), trainable));
                Tape::Node* scores = tape.scale(tape.matmul_t(q, k), 1.0 / std::sqrt(double(dh)));
                head_ctx.push_back(tape.matmul(tape.softmax_rows_op(scores), v));
            }
            Tape::Node* ctx = spec_.heads == 1 ? head_ctx[0] : tape.concat_cols(head_ctx);
            Tape::Node* attn = tape.add_row_broadcast(
                tape.matmul(ctx, enter(tape, need(params, lp + "wo"), trainable)),
                enter(tape, need(params, lp + "bo"), trainable));
            x = tape.add(x, attn);

            Tape::Node* h2 = tape.layer_norm_rows(
                x, enter(tape, need(params, lp + "ln2.g"), trainable),
                enter(tape, need(params, lp + "ln2.b"), trainable));
            Tape::Node* ff = tape.add_row_broadcast(
                tape.matmul(tape.gelu(tape.add_row_broadcast(
                                tape.matmul(h2, enter(tape, need(params, lp + "ffn.w1"), trainable)),
                                enter(tape, need(params, lp + "ffn.b1"), trainable))),
                            enter(tape, need(params, lp + "ffn.w2"), trainable)),
                enter(tape, need(params, lp + "ffn.b2"), trainable));
            x = tape.add(x, ff);
        }
        return tape.mean_rows(x);
    }

    static Matrix gather_rows(const Matrix& table, const std::vector<int>& ids) {
        Matrix out(static_cast<int>(ids.size()), table.cols);
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < table.cols; ++j)
                out.at(static_cast<int>(i), j) = table.at(ids[i], j);
        return out;
    }

    static Matrix sinusoidal(int max_len, int d) {
        Matrix pe(max_len, d);
        for (int pos = 0; pos < max_len; ++pos) {
            for (int j = 0; j < d; j += 2) {
                const double rate = std::pow(10000.0, -double(j) / d);
                pe.at(pos, j) = std::sin(pos * rate);
                if (j + 1 < d) pe.at(pos, j + 1) = std::cos(pos * rate);
            }
        }
        return pe;
    }

    EncoderSpec spec_;
    Matrix posenc_;
};

inline std::unique_ptr<Encoder> make_encoder(const EncoderSpec& spec) {
    spec.validate();
    if (spec.arch == "bag") return std::make_unique<BagEncoder>(spec);
    return std::make_unique<TransformerEncoder>(spec);
}

// Query encoder parameters plus the momentum copy of the shared submodules.
struct EncoderPair {
    ParamSet theta_q;
    ParamSet theta_k; // trunk + projection head only
    double m = 0.999;

    static EncoderPair init(const Encoder& enc, std::uint64_t seed, double momentum) {
        EncoderPair pair;
        pair.theta_q = enc.init_params(seed);
        pair.theta_k = pair.theta_q.shared_subset();
        pair.m = momentum;
        return pair;
    }

    void momentum_step() { momentum_update(theta_k, theta_q, m); }
};

} // namespace unigen
