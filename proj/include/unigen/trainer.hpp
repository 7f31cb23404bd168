#pragma once

#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "unigen/checkpoint.hpp"
#include "unigen/dataset_io.hpp"
#include "unigen/encoder.hpp"
#include "unigen/errors.hpp"
#include "unigen/hash.hpp"
#include "unigen/log.hpp"
#include "unigen/losses.hpp"
#include "unigen/memory_bank.hpp"
#include "unigen/rng.hpp"
#include "unigen/sample_record.hpp"

namespace unigen {

struct TrainConfig {
    double alpha = 0.5;
    double tau_scl = 0.2;
    int bank_capacity = 64;
    double momentum = 0.999;
    double t_mb = 0.8;
    int epochs = 3;
    int batch_size = 32;
    double lr = 2e-5;
    bool weight_loss_scaling = false; // multiply per-sample CE by learned weights
    EncoderSpec encoder;

    void validate() const {
        if (!(tau_scl > 0.0)) throw ValidationError("tau_scl must be > 0");
        if (alpha < 0.0) throw ValidationError("alpha must be >= 0");
        if (bank_capacity < 1) throw ValidationError("bank capacity must be >= 1");
        if (momentum < 0.0 || momentum > 1.0) throw ValidationError("momentum must be in [0,1]");
        if (t_mb < 0.0 || t_mb > 1.0) throw ValidationError("t_mb must be in [0,1]");
        if (epochs < 1 || batch_size < 1) throw ValidationError("epochs/batch_size must be >= 1");
        if (!(lr > 0.0)) throw ValidationError("lr must be > 0");
        encoder.validate();
    }
};

struct TrainStepLog {
    long step = 0;
    double ce = 0.0;
    double scl = 0.0;
    double total = 0.0;
    int bank_size = 0;
};

struct TrainResult {
    EncoderPair pair;
    EncoderSpec spec;
    std::vector<TrainStepLog> log;
    long no_positive_events = 0;
    long bank_admitted = 0;
    long bank_rejected = 0;
    long weightless_admitted = 0;
};

// Per step: forward theta_q, combined loss, Adam step on theta_q, momentum
// update, then bank admission from theta_k projections. With alpha=0 the
// bank is never consulted and the trace equals plain soft-CE training.
inline TrainResult train(const DatasetManifest& manifest, const TrainConfig& config,
                         std::uint64_t seed) {
    if (manifest.records.empty()) throw ValidationError("train needs a non-empty manifest");
    config.validate();
    EncoderSpec spec = config.encoder;
    spec.num_classes = manifest.label_space.num_classes();
    const auto encoder = make_encoder(spec);

    const long n = static_cast<long>(manifest.records.size());
    bool weights_present = true;
    for (const auto& r : manifest.records)
        if (!r.weight.has_value()) weights_present = false;
    if (!weights_present)
        log_info("train: records lack weights; bank admission degenerates to always-pass");

    TrainResult result;
    result.spec = spec;
    result.pair = EncoderPair::init(*encoder, seed_split(seed, 0x696e6974u), config.momentum);
    Adam opt(AdamConfig{.lr = config.lr});
    MemoryBank bank(config.bank_capacity);

    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0);

    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(seed_split(seed, 0x6570u /* epoch */, epoch));
        shuffle_rng.shuffle(order);
        for (long start = 0; start < n; start += config.batch_size) {
            const long end = std::min(n, start + config.batch_size);
            const int bsz = static_cast<int>(end - start);
            std::vector<std::string> texts(bsz);
            Matrix targets(bsz, spec.num_classes);
            std::vector<int> hard_ids(bsz);
            std::vector<std::optional<double>> weights(bsz);
            std::vector<double> weight_values(bsz, 1.0);
            for (int b = 0; b < bsz; ++b) {
                const auto& rec = manifest.records[order[start + b]];
                texts[b] = rec.text;
                for (int c = 0; c < spec.num_classes; ++c) targets.at(b, c) = rec.soft_label[c];
                hard_ids[b] = rec.hard_label;
                weights[b] = rec.weight;
                weight_values[b] = rec.weight.value_or(1.0);
            }

            result.pair.theta_q.zero_grads();
            Tape tape;
            const auto fwd = encoder->forward(tape, texts, result.pair.theta_q, true, true);
            const std::vector<double>* loss_weights =
                (config.weight_loss_scaling && weights_present) ? &weight_values : nullptr;
            Tape::Node* ce = ce_soft_node(tape, fwd.logits, targets, loss_weights);
            Tape::Node* total = ce;
            double scl_value = 0.0;
            if (config.alpha > 0.0) {
                const SclResult scl =
                    scl_loss_node(tape, fwd.projections, hard_ids, bank, config.tau_scl);
                if (scl.no_positive_event) ++result.no_positive_events;
                scl_value = scl.loss->value.at(0, 0);
                total = tape.add(ce, tape.scale(scl.loss, config.alpha));
            }
            const double total_value = total->value.at(0, 0);
            if (!std::isfinite(total_value))
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                                      ", step " + std::to_string(step));
            tape.backward(total);
            opt.step(result.pair.theta_q);
            result.pair.momentum_step();

            if (config.alpha > 0.0) {
                Tape ktape;
                const auto kfwd =
                    encoder->forward(ktape, texts, result.pair.theta_k, false, false);
                const auto stats =
                    bank_update(bank, kfwd.projections->value, hard_ids, weights, config.t_mb);
                result.bank_admitted += stats.admitted;
                result.bank_rejected += stats.rejected;
                result.weightless_admitted += stats.weightless_admitted;
            }

            result.log.push_back(
                {step, ce->value.at(0, 0), scl_value, total_value, bank.size()});
            ++step;
        }
    }
    return result;
}

inline void write_train_log(const std::vector<TrainStepLog>& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open training log for writing: " + path);
    out << "step,ce,scl,total,bank_size\n";
    for (const auto& row : log)
        out << row.step << ',' << format_double(row.ce) << ',' << format_double(row.scl) << ','
            << format_double(row.total) << ',' << row.bank_size << '\n';
}

inline Checkpoint make_checkpoint(const TrainResult& result, const LabelSpace& label_space,
                                  const std::string& config_hash, const TrainConfig& config,
                                  std::uint64_t seed) {
    Checkpoint ckpt;
    ckpt.spec = result.spec;
    ckpt.label_space = label_space;
    ckpt.config_hash = config_hash;
    ckpt.theta_q = result.pair.theta_q;
    ckpt.train_config = {{"alpha", config.alpha},
                         {"tau_scl", config.tau_scl},
                         {"bank_capacity", config.bank_capacity},
                         {"momentum", config.momentum},
                         {"t_mb", config.t_mb},
                         {"epochs", config.epochs},
                         {"batch_size", config.batch_size},
                         {"lr", config.lr},
                         {"weight_loss_scaling", config.weight_loss_scaling},
                         {"seed", seed}};
    return ckpt;
}

} // namespace unigen
