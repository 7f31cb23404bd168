#pragma once

#include <string>
#include <vector>

#include "unigen/errors.hpp"
#include "unigen/matrix.hpp"

namespace unigen {

// Submodule a parameter belongs to. The momentum encoder mirrors trunk and
// projection head only; the classification head is query-side only.
enum class Submodule { kTrunk, kClassHead, kProjHead };

struct Parameter {
    std::string name;
    Submodule submodule = Submodule::kTrunk;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Submodule s, Matrix v)
        : name(std::move(n)), submodule(s), value(std::move(v)), grad(value.rows, value.cols) {}
};

struct ParamSet {
    std::vector<Parameter> items;

    Parameter& add(const std::string& name, Submodule s, Matrix v) {
        items.emplace_back(name, s, std::move(v));
        return items.back();
    }

    Parameter* find(const std::string& name) {
        for (auto& p : items)
            if (p.name == name) return &p;
        return nullptr;
    }
    const Parameter* find(const std::string& name) const {
        for (const auto& p : items)
            if (p.name == name) return &p;
        return nullptr;
    }

    void zero_grads() {
        for (auto& p : items) p.grad.zero();
    }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& p : items) n += p.value.size();
        return n;
    }

    // Shared-submodule copy used to initialize the momentum encoder.
    ParamSet shared_subset() const {
        ParamSet out;
        for (const auto& p : items)
            if (p.submodule != Submodule::kClassHead)
                out.add(p.name, p.submodule, p.value);
        return out;
    }
};

// theta_k <- m * theta_k + (1 - m) * theta_q over every parameter present in
// theta_k. theta_k is only ever written here, never by gradient descent.
inline void momentum_update(ParamSet& theta_k, const ParamSet& theta_q, double m) {
    if (m < 0.0 || m > 1.0) throw ValidationError("momentum coefficient must be in [0,1]");
    for (auto& pk : theta_k.items) {
        const Parameter* pq = theta_q.find(pk.name);
        if (!pq) throw ValidationError("momentum_update: no query parameter named " + pk.name);
        if (!pk.value.same_shape(pq->value))
            throw ValidationError("momentum_update: shape mismatch on " + pk.name);
        for (std::size_t i = 0; i < pk.value.a.size(); ++i)
            pk.value.a[i] = m * pk.value.a[i] + (1.0 - m) * pq->value.a[i];
    }
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ParamSet& params) {
        if (m_.empty()) {
            for (const auto& p : params.items) {
                m_.emplace_back(p.value.rows, p.value.cols);
                v_.emplace_back(p.value.rows, p.value.cols);
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (std::size_t pi = 0; pi < params.items.size(); ++pi) {
            auto& p = params.items[pi];
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (std::size_t i = 0; i < p.value.a.size(); ++i) {
                const double g = p.grad.a[i];
                m.a[i] = cfg_.beta1 * m.a[i] + (1.0 - cfg_.beta1) * g;
                v.a[i] = cfg_.beta2 * v.a[i] + (1.0 - cfg_.beta2) * g * g;
                const double mh = m.a[i] / bc1;
                const double vh = v.a[i] / bc2;
                p.value.a[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
            }
        }
    }

private:
    AdamConfig cfg_;
    std::vector<Matrix> m_, v_;
    long t_ = 0;
};

} // namespace unigen
