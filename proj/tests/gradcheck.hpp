#pragma once

#include <cmath>
#include <functional>

#include "unigen/autodiff.hpp"
#include "unigen/params.hpp"

namespace testutil {

// Central-difference gradient check for a scalar function of a ParamSet.
// `f` rebuilds the forward pass on a fresh tape each call. Returns the
// relative L2 error between analytic and numeric gradients.
inline double gradcheck(
    unigen::ParamSet& params,
    const std::function<unigen::Tape::Node*(unigen::Tape&, unigen::ParamSet&)>& f,
    double h = 1e-4) {
    using namespace unigen;

    params.zero_grads();
    {
        Tape tape;
        Tape::Node* root = f(tape, params);
        tape.backward(root);
    }
    std::vector<double> analytic;
    for (const auto& p : params.items)
        analytic.insert(analytic.end(), p.grad.a.begin(), p.grad.a.end());

    std::vector<double> numeric;
    numeric.reserve(analytic.size());
    const auto eval = [&]() {
        Tape tape;
        return f(tape, params)->value.at(0, 0);
    };
    for (auto& p : params.items) {
        for (auto& x : p.value.a) {
            const double keep = x;
            x = keep + h;
            const double up = eval();
            x = keep - h;
            const double down = eval();
            x = keep;
            numeric.push_back((up - down) / (2.0 * h));
        }
    }

    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double d = analytic[i] - numeric[i];
        diff2 += d * d;
        a2 += analytic[i] * analytic[i];
        n2 += numeric[i] * numeric[i];
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    return std::sqrt(diff2) / denom;
}

} // namespace testutil
