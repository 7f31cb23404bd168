#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "unigen/config.hpp"
#include "unigen/dataset_io.hpp"
#include "unigen/errors.hpp"
#include "unigen/evaluation.hpp"
#include "unigen/fixture.hpp"
#include "unigen/generator.hpp"
#include "unigen/http_lm.hpp"
#include "unigen/relabeler.hpp"
#include "unigen/trainer.hpp"
#include "unigen/weighting.hpp"

namespace unigen {

// ---- config -> typed settings -------------------------------------------

inline LabelSpace label_space_from_config(const Config& cfg) {
    auto names = cfg.get_list("label.names");
    if (names.empty()) names = {"negative", "positive"};
    auto verbalizer = cfg.get_list("label.verbalizer");
    if (verbalizer.empty()) return LabelSpace(names);
    return LabelSpace(names, verbalizer);
}

inline PromptTemplate universal_template_from_config(const Config& cfg) {
    return PromptTemplate(
        cfg.get_or("template.universal", "The text in <label> sentiment is: <text>"),
        TemplateKind::kUniversal);
}

inline std::map<std::string, PromptTemplate> domain_templates_from_config(const Config& cfg) {
    std::map<std::string, PromptTemplate> out;
    for (const auto& [name, text] : cfg.with_prefix("template.domain."))
        out.emplace(name, PromptTemplate(text, TemplateKind::kDomainSpecific, name));
    return out;
}

inline DecodingConfig decoding_from_config(const Config& cfg) {
    DecodingConfig d;
    d.top_k = static_cast<int>(cfg.get_int("decoding.top_k", 40));
    d.top_p = cfg.get_double("decoding.top_p", 0.9);
    d.max_new_tokens = static_cast<int>(cfg.get_int("decoding.max_new_tokens", 64));
    if (cfg.has("decoding.stop")) {
        d.stop_sequences.clear();
        for (auto s : cfg.get_list("decoding.stop")) {
            std::string unescaped;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
                    unescaped += '\n';
                    ++i;
                } else {
                    unescaped += s[i];
                }
            }
            d.stop_sequences.push_back(unescaped);
        }
    }
    d.validate();
    return d;
}

inline std::unique_ptr<TextGenerator> generator_from_config(const Config& cfg,
                                                            const LabelSpace& label_space) {
    const std::string kind = cfg.get_or("generator.kind", "fixture");
    if (kind == "fixture") {
        FixtureKnobs knobs;
        knobs.noise_rate = cfg.get_double("generator.noise_rate", knobs.noise_rate);
        knobs.subtle_noise_rate =
            cfg.get_double("generator.subtle_noise_rate", knobs.subtle_noise_rate);
        knobs.weak_rate = cfg.get_double("generator.weak_rate", knobs.weak_rate);
        knobs.empty_rate = cfg.get_double("generator.empty_rate", knobs.empty_rate);
        knobs.score_sharpness =
            cfg.get_double("generator.score_sharpness", knobs.score_sharpness);
        knobs.bias_rate = cfg.get_double("generator.bias_rate", knobs.bias_rate);
        knobs.bias_magnitude = cfg.get_double("generator.bias_magnitude", knobs.bias_magnitude);
        return std::make_unique<FixtureLm>(label_space, knobs);
    }
    if (kind == "http") return std::make_unique<HttpLm>(cfg.get("generator.url"));
    throw ConfigError("unknown generator.kind: " + kind);
}

inline RelabelConfig relabel_config_from(const Config& cfg) {
    RelabelConfig r;
    r.tau_re = cfg.get_double("relabel.tau_re", 0.1);
    r.t_re = cfg.get_double("relabel.t_re", 0.2);
    r.mode = relabel_mode_from_name(cfg.get_or("relabel.mode", "soft"));
    return r;
}

inline WeightConfig weight_config_from(const Config& cfg) {
    WeightConfig w;
    w.outer_lr = cfg.get_double("weight.outer_lr", 5e-2);
    w.outer_epochs = static_cast<int>(cfg.get_int("weight.outer_epochs", 50));
    w.inner_steps_per_outer = static_cast<int>(cfg.get_int("weight.inner_steps", 10));
    w.inner_lr = cfg.get_double("weight.inner_lr", 5.0);
    w.outer_val_fraction_or_count = cfg.get_double("weight.val_size", 0.25);
    w.gce_q = cfg.get_double("weight.gce_q", 0.7);
    w.select_count = cfg.get_int("weight.select", 0);
    w.proxy.arch = cfg.get_or("weight.proxy.arch", "linear");
    w.proxy.feature_dim = static_cast<int>(cfg.get_int("weight.proxy.feature_dim", 128));
    w.proxy.hidden = static_cast<int>(cfg.get_int("weight.proxy.hidden", 16));
    return w;
}

inline TrainConfig train_config_from(const Config& cfg) {
    TrainConfig t;
    t.alpha = cfg.get_double("train.alpha", 0.5);
    t.tau_scl = cfg.get_double("train.tau_scl", 0.2);
    t.bank_capacity = static_cast<int>(cfg.get_int("train.bank", 64));
    t.momentum = cfg.get_double("train.momentum", 0.999);
    t.t_mb = cfg.get_double("train.t_mb", 0.8);
    t.epochs = static_cast<int>(cfg.get_int("train.epochs", 3));
    t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 32));
    t.lr = cfg.get_double("train.lr", 2e-5);
    t.weight_loss_scaling = cfg.get_bool("train.weight_loss_scaling", false);
    t.encoder.arch = cfg.get_or("train.arch", "transformer");
    t.encoder.proj_dim = static_cast<int>(cfg.get_int("train.proj_dim", 256));
    t.encoder.feature_dim = static_cast<int>(cfg.get_int("train.feature_dim", 256));
    t.encoder.hidden = static_cast<int>(cfg.get_int("train.hidden", 64));
    t.encoder.vocab = static_cast<int>(cfg.get_int("train.tf.vocab", 4096));
    t.encoder.d_model = static_cast<int>(cfg.get_int("train.tf.d_model", 32));
    t.encoder.heads = static_cast<int>(cfg.get_int("train.tf.heads", 2));
    t.encoder.ffn = static_cast<int>(cfg.get_int("train.tf.ffn", 64));
    t.encoder.layers = static_cast<int>(cfg.get_int("train.tf.layers", 2));
    t.encoder.max_len = static_cast<int>(cfg.get_int("train.tf.max_len", 32));
    return t;
}

inline std::vector<PromptTemplate> generation_templates(const Config& cfg,
                                                        const std::string& mode,
                                                        const std::string& domain) {
    if (mode == "unigen") return {universal_template_from_config(cfg)};
    const auto domains = domain_templates_from_config(cfg);
    if (mode == "zerogen") {
        const auto it = domains.find(domain);
        if (it == domains.end())
            throw ConfigError("no template.domain." + domain + " configured for zerogen mode");
        return {it->second};
    }
    if (mode == "combined") {
        if (domains.size() < 2)
            throw ConfigError("combined mode needs at least 2 domain templates");
        std::vector<PromptTemplate> out;
        for (const auto& [name, t] : domains) out.push_back(t);
        return out;
    }
    throw ConfigError("unknown generation mode: " + mode);
}

inline std::map<std::string, EvalCorpus> eval_corpora_from_config(const Config& cfg,
                                                                  const LabelSpace& ls) {
    std::map<std::string, EvalCorpus> out;
    for (const auto& [domain, path] : cfg.with_prefix("eval.corpus.")) {
        const std::string fmt = cfg.get_or("eval.format", "auto");
        const CorpusFormat format = fmt == "jsonl"  ? CorpusFormat::kJsonl
                                    : fmt == "tsv" ? CorpusFormat::kTsv
                                                   : corpus_format_from_path(path);
        out[domain] = load_eval_corpus(path, format, ls);
    }
    return out;
}

inline std::vector<std::uint64_t> eval_seeds_from_config(const Config& cfg) {
    std::vector<std::uint64_t> seeds;
    for (const auto& s : cfg.get_list("eval.seeds"))
        seeds.push_back(std::strtoull(s.c_str(), nullptr, 10));
    if (seeds.empty()) seeds = {1, 2, 3, 4, 5};
    return seeds;
}

// ---- artifact hash gating -------------------------------------------------

inline DatasetManifest read_dataset_checked(const std::string& path,
                                            const std::string& expected_hash,
                                            bool allow_mismatch) {
    auto m = read_dataset(path);
    if (!m.config_hash.empty() && !expected_hash.empty() && m.config_hash != expected_hash) {
        if (!allow_mismatch)
            throw ValidationError("config hash mismatch for " + path + ": artifact " +
                                  m.config_hash + " vs current " + expected_hash +
                                  " (pass --allow-hash-mismatch to override)");
        log_warn("config hash mismatch for " + path + " overridden");
    }
    return m;
}

// ---- the full pipeline ------------------------------------------------------

struct PipelineOptions {
    std::string out_dir;
    std::set<std::string> skip; // subset of {"relabel", "weight"}
    std::uint64_t seed = 1;
};

struct PipelineArtifacts {
    std::string generated_path;
    std::string relabeled_path;
    std::string weighted_path;
    std::string checkpoint_path;
    std::string train_log_path;
    std::string weight_trace_path;
    std::string report_path;
    bool evaluated = false;
    EvalReport report;
};

inline void write_weight_trace(const std::vector<WeightTracePoint>& trace,
                               const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open weight trace for writing: " + path);
    out << "epoch,outer_loss";
    for (int q = 0; q <= 10; ++q) out << ",d" << q * 10;
    out << '\n';
    for (const auto& pt : trace) {
        out << pt.epoch << ',' << format_double(pt.outer_loss);
        for (double d : pt.deciles) out << ',' << format_double(d);
        out << '\n';
    }
}

// generate -> relabel -> weight/select -> train -> evaluate, with stage
// skipping and every artifact stamped with the config hash. Rerunning with
// an identical config and seed reproduces every artifact byte for byte.
inline PipelineArtifacts run_pipeline(const Config& cfg, const PipelineOptions& options) {
    namespace fs = std::filesystem;
    fs::create_directories(options.out_dir);
    const auto path_of = [&](const char* name) {
        return (fs::path(options.out_dir) / name).string();
    };
    const std::string hash = cfg.hash();
    const LabelSpace label_space = label_space_from_config(cfg);
    const auto generator = generator_from_config(cfg, label_space);
    const DecodingConfig decoding = decoding_from_config(cfg);
    const PromptTemplate universal = universal_template_from_config(cfg);

    PipelineArtifacts artifacts;

    // generate
    const std::string mode = cfg.get_or("generate.mode", "unigen");
    const auto templates = generation_templates(cfg, mode, cfg.get_or("generate.domain", ""));
    const long n = cfg.get_int("generate.n", 2000);
    const int retries = static_cast<int>(cfg.get_int("generate.retries", 3));
    log_info("pipeline: generating " + std::to_string(n) + " samples (mode=" + mode + ")");
    auto generated = generate_dataset(*generator, templates, label_space, decoding, n,
                                      options.seed, nullptr, retries);
    generated.config_hash = hash;
    artifacts.generated_path = path_of("generated.jsonl");
    write_dataset(generated, artifacts.generated_path);

    // relabel
    RelabelConfig relabel_cfg = relabel_config_from(cfg);
    if (options.skip.count("relabel")) relabel_cfg.mode = RelabelMode::kOff;
    RelabelSummary relabel_summary;
    auto relabeled = relabel_dataset(generated, *generator, universal, relabel_cfg,
                                     &relabel_summary);
    log_info("pipeline: relabel kept " + std::to_string(relabel_summary.n_kept) + "/" +
             std::to_string(relabel_summary.n_in) + " (mode=" +
             relabel_mode_name(relabel_cfg.mode) + ")");
    artifacts.relabeled_path = path_of("relabeled.jsonl");
    write_dataset(relabeled, artifacts.relabeled_path);

    // weight + select
    DatasetManifest train_input = relabeled;
    if (!options.skip.count("weight")) {
        WeightConfig weight_cfg = weight_config_from(cfg);
        const long n_rel = static_cast<long>(relabeled.records.size());
        if (weight_cfg.select_count <= 0 || weight_cfg.select_count > n_rel)
            weight_cfg.select_count = n_rel;
        std::vector<WeightTracePoint> trace;
        const auto weights =
            learn_weights(relabeled, weight_cfg, seed_split(options.seed, 0x77u), &trace);
        train_input = select_top(relabeled, weights, weight_cfg.select_count);
        artifacts.weighted_path = path_of("weighted.jsonl");
        write_dataset(train_input, artifacts.weighted_path);
        artifacts.weight_trace_path = path_of("weight_trace.csv");
        write_weight_trace(trace, artifacts.weight_trace_path);
        log_info("pipeline: selected " + std::to_string(train_input.records.size()) +
                 " high-weight records");
    } else {
        log_info("pipeline: weighting skipped; bank admission degenerates to always-pass");
    }

    // train
    const TrainConfig train_cfg = train_config_from(cfg);
    const auto result = train(train_input, train_cfg, seed_split(options.seed, 0x74u));
    artifacts.train_log_path = path_of("train_log.csv");
    write_train_log(result.log, artifacts.train_log_path);
    const auto ckpt = make_checkpoint(result, label_space, hash, train_cfg, options.seed);
    artifacts.checkpoint_path = path_of("checkpoint.json");
    save_checkpoint(ckpt, artifacts.checkpoint_path);

    // evaluate
    const auto corpora = eval_corpora_from_config(cfg, label_space);
    if (!corpora.empty()) {
        artifacts.report = evaluate(ckpt, corpora, eval_seeds_from_config(cfg));
        artifacts.evaluated = true;
        artifacts.report_path = path_of("report.json");
        std::ofstream out(artifacts.report_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write report: " + artifacts.report_path);
        out << report_to_json(artifacts.report).dump(2) << '\n';
        log_info("pipeline: average accuracy " + format_double(artifacts.report.average));
    }
    return artifacts;
}

} // namespace unigen
