#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "unigen/errors.hpp"
#include "unigen/featurizer.hpp"
#include "unigen/hash.hpp"
#include "unigen/log.hpp"
#include "unigen/matrix.hpp"
#include "unigen/rng.hpp"
#include "unigen/sample_record.hpp"

namespace unigen {

// Generalized cross-entropy: (1 - p_target^q) / q. Bounded by 1/q, reduces
// to 1 - p_target at q = 1; the bounded tail is what keeps mislabeled
// samples from dominating the outer objective.
inline double robust_loss(const std::vector<double>& probabilities, int target, double q) {
    if (!(q > 0.0) || q > 1.0) throw ValidationError("gce q must be in (0,1]");
    if (target < 0 || target >= static_cast<int>(probabilities.size()))
        throw ValidationError("robust_loss target out of range");
    const double p = std::max(probabilities[target], 0.0);
    return (1.0 - std::pow(p, q)) / q;
}

struct ProxySpec {
    std::string arch = "linear"; // linear | mlp
    int feature_dim = 64;
    int hidden = 16; // mlp only

    void validate() const {
        if (arch != "linear" && arch != "mlp") throw ConfigError("unknown proxy arch: " + arch);
        if (feature_dim < 1) throw ValidationError("proxy feature_dim must be >= 1");
        if (arch == "mlp" && hidden < 1) throw ValidationError("proxy hidden must be >= 1");
    }
};

struct WeightConfig {
    double outer_lr = 5e-2;
    int outer_epochs = 50;
    int inner_steps_per_outer = 10;
    double inner_lr = 5.0;
    double outer_val_fraction_or_count = 0.25; // < 1: fraction of n, >= 1: count
    double gce_q = 0.7;
    long select_count = 0;
    ProxySpec proxy;

    void validate(long n) const {
        if (!(outer_lr > 0.0)) throw ValidationError("outer_lr must be > 0");
        if (outer_epochs < 1) throw ValidationError("outer_epochs must be >= 1");
        if (inner_steps_per_outer < 1) throw ValidationError("inner steps must be >= 1");
        if (!(inner_lr > 0.0)) throw ValidationError("inner_lr must be > 0");
        if (!(gce_q > 0.0) || gce_q > 1.0) throw ValidationError("gce_q must be in (0,1]");
        if (select_count > n) throw ValidationError("select_count exceeds dataset size");
        proxy.validate();
    }

    long val_count(long n) const {
        if (outer_val_fraction_or_count < 1.0)
            return std::max<long>(1, static_cast<long>(outer_val_fraction_or_count * n));
        return static_cast<long>(outer_val_fraction_or_count);
    }
};

// Unconstrained per-sample parameters; effective weights pass through a
// sigmoid so they live in (0,1) and the bank threshold stays meaningful.
struct SampleWeights {
    std::vector<double> raw;

    double value(std::size_t i) const { return 1.0 / (1.0 + std::exp(-raw[i])); }

    std::vector<double> values() const {
        std::vector<double> out(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) out[i] = value(i);
        return out;
    }
};

struct WeightTracePoint {
    int epoch = 0;
    double outer_loss = 0.0;
    std::vector<double> deciles; // 0%,10%,...,100% of the weight distribution
};

namespace detail {

// Small softmax classifier over frozen hashed features; either linear or one
// tanh hidden layer. Hand-rolled forward/backward: the bi-level update needs
// per-sample gradient dot products, which are cheap to stream this way.
struct Proxy {
    ProxySpec spec;
    Matrix w1, b1; // mlp only
    Matrix w2, b2;

    static Proxy init(const ProxySpec& spec, int num_classes, std::uint64_t seed) {
        Proxy p;
        p.spec = spec;
        Rng rng(seed);
        if (spec.arch == "mlp") {
            p.w1 = Matrix::randn(spec.feature_dim, spec.hidden, rng,
                                 1.0 / std::sqrt(double(spec.feature_dim)));
            p.b1 = Matrix(1, spec.hidden);
            p.w2 = Matrix::randn(spec.hidden, num_classes, rng,
                                 1.0 / std::sqrt(double(spec.hidden)));
        } else {
            p.w2 = Matrix::randn(spec.feature_dim, num_classes, rng,
                                 1.0 / std::sqrt(double(spec.feature_dim)));
        }
        p.b2 = Matrix(1, num_classes);
        return p;
    }

    struct Forward {
        std::vector<double> hidden; // empty for linear
        std::vector<double> probs;
    };

    Forward forward(const double* x) const {
        Forward f;
        const int k = b2.cols;
        std::vector<double> logits(k, 0.0);
        if (spec.arch == "mlp") {
            f.hidden.assign(spec.hidden, 0.0);
            for (int i = 0; i < spec.feature_dim; ++i) {
                const double xv = x[i];
                if (xv == 0.0) continue;
                for (int j = 0; j < spec.hidden; ++j) f.hidden[j] += xv * w1.at(i, j);
            }
            for (int j = 0; j < spec.hidden; ++j) f.hidden[j] = std::tanh(f.hidden[j] + b1.at(0, j));
            for (int j = 0; j < spec.hidden; ++j)
                for (int c = 0; c < k; ++c) logits[c] += f.hidden[j] * w2.at(j, c);
        } else {
            for (int i = 0; i < spec.feature_dim; ++i) {
                const double xv = x[i];
                if (xv == 0.0) continue;
                for (int c = 0; c < k; ++c) logits[c] += xv * w2.at(i, c);
            }
        }
        for (int c = 0; c < k; ++c) logits[c] += b2.at(0, c);
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double sum = 0.0;
        f.probs.assign(k, 0.0);
        for (int c = 0; c < k; ++c) {
            f.probs[c] = std::exp(logits[c] - mx);
            sum += f.probs[c];
        }
        for (auto& v : f.probs) v /= sum;
        return f;
    }

    // Accumulates scale * dL/dparams for dlogits into `into`.
    void backprop(const double* x, const Forward& f, const std::vector<double>& dlogits,
                  double scale, Proxy& into) const {
        const int k = b2.cols;
        for (int c = 0; c < k; ++c) into.b2.at(0, c) += scale * dlogits[c];
        if (spec.arch == "mlp") {
            std::vector<double> dh(spec.hidden, 0.0);
            for (int j = 0; j < spec.hidden; ++j) {
                for (int c = 0; c < k; ++c) {
                    into.w2.at(j, c) += scale * f.hidden[j] * dlogits[c];
                    dh[j] += dlogits[c] * w2.at(j, c);
                }
                dh[j] *= 1.0 - f.hidden[j] * f.hidden[j];
                into.b1.at(0, j) += scale * dh[j];
            }
            for (int i = 0; i < spec.feature_dim; ++i) {
                const double xv = x[i];
                if (xv == 0.0) continue;
                for (int j = 0; j < spec.hidden; ++j) into.w1.at(i, j) += scale * xv * dh[j];
            }
        } else {
            for (int i = 0; i < spec.feature_dim; ++i) {
                const double xv = x[i];
                if (xv == 0.0) continue;
                for (int c = 0; c < k; ++c) into.w2.at(i, c) += scale * xv * dlogits[c];
            }
        }
    }

    // dot(reference_grads, dL/dparams) for one sample without materializing
    // the per-sample gradient.
    double backprop_dot(const double* x, const Forward& f, const std::vector<double>& dlogits,
                        const Proxy& ref) const {
        const int k = b2.cols;
        double dot = 0.0;
        for (int c = 0; c < k; ++c) dot += ref.b2.at(0, c) * dlogits[c];
        if (spec.arch == "mlp") {
            std::vector<double> dh(spec.hidden, 0.0);
            for (int j = 0; j < spec.hidden; ++j) {
                for (int c = 0; c < k; ++c) {
                    dot += ref.w2.at(j, c) * f.hidden[j] * dlogits[c];
                    dh[j] += dlogits[c] * w2.at(j, c);
                }
                dh[j] *= 1.0 - f.hidden[j] * f.hidden[j];
                dot += ref.b1.at(0, j) * dh[j];
            }
            for (int i = 0; i < spec.feature_dim; ++i) {
                const double xv = x[i];
                if (xv == 0.0) continue;
                for (int j = 0; j < spec.hidden; ++j) dot += ref.w1.at(i, j) * xv * dh[j];
            }
        } else {
            for (int i = 0; i < spec.feature_dim; ++i) {
                const double xv = x[i];
                if (xv == 0.0) continue;
                for (int c = 0; c < k; ++c) dot += ref.w2.at(i, c) * xv * dlogits[c];
            }
        }
        return dot;
    }

    Proxy zeros_like() const {
        Proxy z = *this;
        z.w1.zero();
        z.b1.zero();
        z.w2.zero();
        z.b2.zero();
        return z;
    }

    void axpy(double scale, const Proxy& g) {
        const auto add = [scale](Matrix& a, const Matrix& b) {
            for (std::size_t i = 0; i < a.a.size(); ++i) a.a[i] += scale * b.a[i];
        };
        add(w1, g.w1);
        add(b1, g.b1);
        add(w2, g.w2);
        add(b2, g.b2);
    }
};

} // namespace detail

// Alternating bi-level optimization. Inner: the proxy descends the weighted
// empirical CE risk, full batch, for inner_steps_per_outer steps. Outer: the
// raw weights descend the robust validation loss differentiated through the
// last inner step (one-step unrolling), with the step normalized to
// outer_lr in the infinity norm so the schedule is scale-free.
inline SampleWeights learn_weights(const DatasetManifest& manifest, const WeightConfig& config,
                                   std::uint64_t seed,
                                   std::vector<WeightTracePoint>* trace = nullptr) {
    if (manifest.stage != Stage::kRelabeled)
        throw ValidationError(std::string("learn_weights expects stage=relabeled, got ") +
                              stage_name(manifest.stage));
    const long n = static_cast<long>(manifest.records.size());
    if (n < 2) throw ValidationError("learn_weights needs at least 2 records");
    config.validate(n);
    const int k = manifest.label_space.num_classes();
    const int fdim = config.proxy.feature_dim;

    std::vector<std::string> texts;
    texts.reserve(n);
    std::vector<int> labels;
    labels.reserve(n);
    for (const auto& r : manifest.records) {
        texts.push_back(r.text);
        labels.push_back(r.hard_label);
    }
    const Matrix features = hashed_bow_batch(texts, fdim);

    SampleWeights weights;
    weights.raw.assign(n, 0.0);
    auto proxy = detail::Proxy::init(config.proxy, k, seed_split(seed, 0x70u /* proxy */));
    Rng val_rng(seed_split(seed, 0x76u /* val */));
    const long val_n = config.val_count(n);

    std::vector<double> w(n), d(n);
    std::vector<detail::Proxy::Forward> fwd(n);

    for (int epoch = 0; epoch < config.outer_epochs; ++epoch) {
        double wsum = 0.0;
        for (long i = 0; i < n; ++i) {
            w[i] = weights.value(i);
            wsum += w[i];
        }

        detail::Proxy phi_prev = proxy;
        for (int s = 0; s < config.inner_steps_per_outer; ++s) {
            if (s == config.inner_steps_per_outer - 1) phi_prev = proxy;
            auto grad = proxy.zeros_like();
            double inner_loss = 0.0;
            for (long i = 0; i < n; ++i) {
                fwd[i] = proxy.forward(&features.a[i * static_cast<std::size_t>(fdim)]);
                inner_loss -= w[i] * std::log(std::max(fwd[i].probs[labels[i]], 1e-300));
                std::vector<double> dlogits = fwd[i].probs;
                dlogits[labels[i]] -= 1.0;
                proxy.backprop(&features.a[i * static_cast<std::size_t>(fdim)], fwd[i], dlogits,
                               w[i] / wsum, grad);
            }
            if (!std::isfinite(inner_loss))
                throw DivergenceError("proxy diverged at outer epoch " + std::to_string(epoch) +
                                      ", inner step " + std::to_string(s));
            proxy.axpy(-config.inner_lr, grad);
        }

        // Fresh validation subset from the synthetic data itself.
        std::vector<long> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        val_rng.shuffle(pool);
        std::vector<long> val;
        val.reserve(val_n);
        for (long i = 0; i < val_n; ++i) val.push_back(pool[i % n]);

        auto g_outer = proxy.zeros_like();
        double outer_loss = 0.0;
        for (long vi : val) {
            const auto f = proxy.forward(&features.a[vi * static_cast<std::size_t>(fdim)]);
            outer_loss += robust_loss(f.probs, labels[vi], config.gce_q);
            // d/dz of (1 - p_t^q)/q is p_t^q * (p - e_t).
            const double pt = std::max(f.probs[labels[vi]], 1e-12);
            const double scale_t = std::pow(pt, config.gce_q);
            std::vector<double> dlogits = f.probs;
            dlogits[labels[vi]] -= 1.0;
            for (auto& v : dlogits) v *= scale_t;
            proxy.backprop(&features.a[vi * static_cast<std::size_t>(fdim)], f, dlogits,
                           1.0 / static_cast<double>(val.size()), g_outer);
        }
        outer_loss /= static_cast<double>(val.size());
        if (!std::isfinite(outer_loss))
            throw DivergenceError("outer objective diverged at outer epoch " +
                                  std::to_string(epoch) + ", inner step " +
                                  std::to_string(config.inner_steps_per_outer - 1));

        // One-step unrolling through phi' = phi_prev - lr * grad(phi_prev):
        // dL/dw_i = -(lr / W) * g_outer . (grad_i - weighted mean grad).
        double common = 0.0;
        for (long i = 0; i < n; ++i) {
            const auto f = phi_prev.forward(&features.a[i * static_cast<std::size_t>(fdim)]);
            std::vector<double> dlogits = f.probs;
            dlogits[labels[i]] -= 1.0;
            d[i] = phi_prev.backprop_dot(&features.a[i * static_cast<std::size_t>(fdim)], f,
                                         dlogits, g_outer);
            common += w[i] * d[i];
        }
        common /= wsum;

        // Normalize the step so the mean |raw| movement per epoch is
        // outer_lr; the raw gradient scale carries an 1/n factor that would
        // otherwise make the 50-epoch schedule a no-op.
        double gsum = 0.0;
        std::vector<double> draw(n);
        for (long i = 0; i < n; ++i) {
            const double dldw = -(config.inner_lr / wsum) * (d[i] - common);
            draw[i] = dldw * w[i] * (1.0 - w[i]);
            gsum += std::fabs(draw[i]);
        }
        const double gmean = gsum / static_cast<double>(n);
        if (gmean > 1e-15)
            for (long i = 0; i < n; ++i) weights.raw[i] -= config.outer_lr * draw[i] / gmean;

        if (trace) {
            WeightTracePoint pt;
            pt.epoch = epoch;
            pt.outer_loss = outer_loss;
            auto sorted = weights.values();
            std::sort(sorted.begin(), sorted.end());
            for (int q = 0; q <= 10; ++q) {
                const std::size_t idx =
                    std::min<std::size_t>(sorted.size() - 1, (q * (sorted.size() - 1)) / 10);
                pt.deciles.push_back(sorted[idx]);
            }
            trace->push_back(std::move(pt));
        }
    }
    return weights;
}

// Records with weights attached on every record; no selection.
inline DatasetManifest attach_weights(const DatasetManifest& manifest,
                                      const SampleWeights& weights) {
    if (weights.raw.size() != manifest.records.size())
        throw ValidationError("attach_weights: size mismatch");
    DatasetManifest out = manifest;
    for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].weight = weights.value(i);
    out.advance_stage(Stage::kWeighted);
    return out;
}

// Keeps the select_count highest-weight records (ties to the lower index),
// preserving the original order among survivors.
inline DatasetManifest select_top(const DatasetManifest& manifest, const SampleWeights& weights,
                                  long select_count) {
    const long n = static_cast<long>(manifest.records.size());
    if (weights.raw.size() != manifest.records.size())
        throw ValidationError("select_top: weight vector size mismatch");
    if (select_count < 0 || select_count > n)
        throw ValidationError("select_count must lie in [0, dataset size]");

    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
        const double wa = weights.value(a), wb = weights.value(b);
        if (wa != wb) return wa > wb;
        return a < b;
    });
    std::vector<bool> keep(n, false);
    for (long i = 0; i < select_count; ++i) keep[order[i]] = true;

    DatasetManifest out;
    out.label_space = manifest.label_space;
    out.config_hash = manifest.config_hash;
    out.stage = manifest.stage;
    for (long i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        SampleRecord r = manifest.records[i];
        r.weight = weights.value(i);
        out.records.push_back(std::move(r));
    }
    out.advance_stage(Stage::kSelected);
    return out;
}

} // namespace unigen
