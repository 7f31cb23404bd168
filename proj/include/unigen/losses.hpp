#pragma once

#include <optional>
#include <vector>

#include "unigen/autodiff.hpp"
#include "unigen/errors.hpp"
#include "unigen/log.hpp"
#include "unigen/matrix.hpp"
#include "unigen/memory_bank.hpp"

namespace unigen {

// Mean over the batch of -sum_c target_c * log softmax(logits)_c. Targets
// are probability vectors; per-sample weights optionally rescale the mean
// (weighted sum over weight total).
inline Tape::Node* ce_soft_node(Tape& tape, Tape::Node* logits, const Matrix& soft_targets,
                                const std::vector<double>* sample_weights = nullptr) {
    if (!logits || !logits->value.same_shape(soft_targets))
        throw ValidationError("ce_soft: logits/targets shape mismatch");
    const int batch = soft_targets.rows;
    Matrix w = soft_targets;
    if (sample_weights) {
        double total = 0.0;
        for (double x : *sample_weights) total += x;
        if (!(total > 0.0)) throw ValidationError("ce_soft: nonpositive weight total");
        for (int i = 0; i < batch; ++i)
            for (int j = 0; j < w.cols; ++j) w.at(i, j) *= -(*sample_weights)[i] / total;
    } else {
        for (auto& x : w.a) x *= -1.0 / batch;
    }
    return tape.weighted_sum(tape.log_softmax_rows(logits), std::move(w));
}

inline double ce_soft(const Matrix& logits, const Matrix& soft_targets) {
    Tape tape;
    return ce_soft_node(tape, tape.constant(logits), soft_targets)->value.at(0, 0);
}

struct SclResult {
    Tape::Node* loss = nullptr;
    int contributing_anchors = 0;
    bool no_positive_event = false;
};

// Supervised contrastive loss over batch u bank. For anchor i,
// A(i) = (batch u bank) \ {i} and P(i) = same-class members of A(i); each
// anchor contributes the mean over its positives of
// -log( exp(z_i.z_p / tau) / sum_{a in A(i)} exp(z_i.z_a / tau) ), and the
// loss averages the anchors that have at least one positive. Bank entries
// never act as anchors and receive no gradient.
inline SclResult scl_loss_node(Tape& tape, Tape::Node* projections,
                               const std::vector<int>& class_ids, const MemoryBank& bank,
                               double tau) {
    if (!(tau > 0.0)) throw ValidationError("scl temperature must be > 0");
    const int batch = projections->value.rows;
    if (batch != static_cast<int>(class_ids.size()))
        throw ValidationError("scl: batch/class id size mismatch");
    if (batch < 2 && bank.empty())
        log_debug("scl: single anchor with empty bank contributes nothing");

    const int bank_n = bank.size();
    const int total = batch + bank_n;

    std::vector<int> all_ids = class_ids;
    Tape::Node* all;
    if (bank_n > 0) {
        const auto bank_ids = bank.class_ids();
        all_ids.insert(all_ids.end(), bank_ids.begin(), bank_ids.end());
        all = tape.concat_rows({projections, tape.constant(bank.projection_matrix())});
    } else {
        all = projections;
    }

    std::vector<int> pos_count(batch, 0);
    for (int i = 0; i < batch; ++i)
        for (int j = 0; j < total; ++j)
            if (j != i && all_ids[j] == class_ids[i]) ++pos_count[i];

    int contributing = 0;
    for (int c : pos_count)
        if (c > 0) ++contributing;

    SclResult result;
    result.contributing_anchors = contributing;
    if (contributing == 0) {
        result.loss = tape.constant(Matrix(1, 1));
        result.no_positive_event = true;
        return result;
    }

    Tape::Node* sims = tape.scale(tape.matmul_t(projections, all), 1.0 / tau);
    // Self-similarity removed from every anchor's denominator.
    Matrix mask(batch, total);
    for (int i = 0; i < batch; ++i) mask.at(i, i) = -1e30;
    Tape::Node* masked = tape.add_const(sims, mask);
    Tape::Node* lse = tape.logsumexp_rows(masked);

    Matrix pair_w(batch, total);
    Matrix row_w(batch, 1);
    for (int i = 0; i < batch; ++i) {
        if (pos_count[i] == 0) continue;
        const double w = 1.0 / (static_cast<double>(pos_count[i]) * contributing);
        for (int j = 0; j < total; ++j)
            if (j != i && all_ids[j] == class_ids[i]) pair_w.at(i, j) = w;
        row_w.at(i, 0) = 1.0 / contributing;
    }
    result.loss = tape.sub(tape.weighted_sum(lse, std::move(row_w)),
                           tape.weighted_sum(masked, std::move(pair_w)));
    return result;
}

inline double scl_loss(const Matrix& projections, const std::vector<int>& class_ids,
                       const MemoryBank& bank, double tau, bool* no_positive = nullptr) {
    Tape tape;
    const auto r = scl_loss_node(tape, tape.constant(projections), class_ids, bank, tau);
    if (no_positive) *no_positive = r.no_positive_event;
    if (r.no_positive_event) log_debug("scl: no-positive event");
    return r.loss->value.at(0, 0);
}

// L = L_CE + alpha * L_SCL.
inline Tape::Node* combined_loss_node(Tape& tape, Tape::Node* logits, Tape::Node* projections,
                                      const Matrix& soft_targets,
                                      const std::vector<int>& class_ids, const MemoryBank& bank,
                                      double alpha, double tau_scl,
                                      const std::vector<double>* sample_weights = nullptr,
                                      SclResult* scl_out = nullptr) {
    Tape::Node* ce = ce_soft_node(tape, logits, soft_targets, sample_weights);
    if (alpha == 0.0) {
        if (scl_out) *scl_out = SclResult{nullptr, 0, false};
        return ce;
    }
    SclResult scl = scl_loss_node(tape, projections, class_ids, bank, tau_scl);
    if (scl_out) *scl_out = scl;
    return tape.add(ce, tape.scale(scl.loss, alpha));
}

} // namespace unigen
