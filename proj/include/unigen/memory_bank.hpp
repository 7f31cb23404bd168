#pragma once

#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "unigen/errors.hpp"
#include "unigen/log.hpp"
#include "unigen/matrix.hpp"

namespace unigen {

struct BankEntry {
    std::vector<double> projection; // unit norm
    int class_id = 0;
    double weight = 1.0;
};

// Bounded FIFO of momentum-encoder projections. Entries only ever serve as
// positives/negatives for the contrastive loss, never as anchors, and no
// gradient flows through them.
class MemoryBank {
public:
    explicit MemoryBank(int capacity) : capacity_(capacity) {
        if (capacity < 1) throw ValidationError("bank capacity must be >= 1");
    }

    int capacity() const { return capacity_; }
    int size() const { return static_cast<int>(entries_.size()); }
    bool empty() const { return entries_.empty(); }
    const std::deque<BankEntry>& entries() const { return entries_; }

    void push(BankEntry e) {
        double norm = 0.0;
        for (double v : e.projection) norm += v * v;
        norm = std::sqrt(norm);
        if (std::fabs(norm - 1.0) > 1e-6)
            throw ValidationError("bank projection norm " + std::to_string(norm) +
                                  " is not unit");
        entries_.push_back(std::move(e));
        while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
    }

    // Dense matrix view of the stored projections, row per entry.
    Matrix projection_matrix() const {
        if (entries_.empty()) return Matrix();
        Matrix m(size(), static_cast<int>(entries_.front().projection.size()));
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) m.at(i, j) = entries_[i].projection[j];
        return m;
    }

    std::vector<int> class_ids() const {
        std::vector<int> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.class_id);
        return out;
    }

private:
    int capacity_;
    std::deque<BankEntry> entries_;
};

struct BankUpdateStats {
    long admitted = 0;
    long rejected = 0;
    long weightless_admitted = 0;
};

// Enqueues, in batch order, the samples whose weight exceeds t_mb. Samples
// without a weight (pipeline ran without the weighting stage) are admitted
// unconditionally and the condition is logged once.
inline BankUpdateStats bank_update(MemoryBank& bank, const Matrix& projections,
                                   const std::vector<int>& class_ids,
                                   const std::vector<std::optional<double>>& weights,
                                   double t_mb) {
    if (projections.rows != static_cast<int>(class_ids.size()) ||
        projections.rows != static_cast<int>(weights.size()))
        throw ValidationError("bank_update: batch size mismatch");
    BankUpdateStats stats;
    static bool warned_weightless = false;
    for (int i = 0; i < projections.rows; ++i) {
        double stored_weight;
        if (weights[i].has_value()) {
            if (!(*weights[i] > t_mb)) {
                ++stats.rejected;
                continue;
            }
            stored_weight = *weights[i];
        } else {
            stored_weight = 1.0;
            ++stats.weightless_admitted;
            if (!warned_weightless) {
                log_info("bank_update: records carry no weights; admitting unconditionally");
                warned_weightless = true;
            }
        }
        BankEntry e;
        e.projection.assign(&projections.a[static_cast<std::size_t>(i) * projections.cols],
                            &projections.a[static_cast<std::size_t>(i + 1) * projections.cols]);
        e.class_id = class_ids[i];
        e.weight = stored_weight;
        bank.push(std::move(e));
        ++stats.admitted;
    }
    return stats;
}

} // namespace unigen
