// Command-line front end for the dataset-generation and training pipeline.
//
// Subcommands: generate, relabel, weight, train, evaluate, prompt-baseline,
// project, pipeline, fixture. A flat key=value config file supplies the
// hyperparameters; explicit flags override config values and the effective
// config's SHA-256 stamps every artifact.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "unigen/pipeline.hpp"

using namespace unigen;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string log_level = "info";
};

Config load_config(const GlobalArgs& g) {
    if (g.config_path.empty()) return Config();
    return Config::from_file(g.config_path);
}

// Applies an explicitly-passed CLI option to the config so artifact hashes
// reflect the parameters that actually ran.
template <typename T>
void overlay(Config& cfg, const CLI::Option* opt, const std::string& key, const T& value) {
    if (opt && opt->count() > 0) {
        if constexpr (std::is_same_v<T, std::string>) {
            cfg.set(key, value);
        } else {
            std::ostringstream os;
            os << std::setprecision(17) << value;
            cfg.set(key, os.str());
        }
    }
}

std::map<std::string, EvalCorpus> corpora_from_args(const std::vector<std::string>& specs,
                                                    const LabelSpace& ls,
                                                    const std::string& format) {
    std::map<std::string, EvalCorpus> out;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--corpus expects name=path, got: " + s);
        const std::string name = s.substr(0, eq);
        const std::string path = s.substr(eq + 1);
        const CorpusFormat fmt = format == "jsonl"  ? CorpusFormat::kJsonl
                                 : format == "tsv" ? CorpusFormat::kTsv
                                                   : corpus_format_from_path(path);
        out[name] = load_eval_corpus(path, fmt, ls);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot dataset generation, denoising, and TAM training"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "flat key=value config file")->envname("UNIGEN_CONFIG");
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--log-level", g.log_level, "error|warn|info|debug");

    // generate
    auto* cmd_gen = app.add_subcommand("generate", "sample a synthetic dataset from the LM");
    std::string gen_out = "generated.jsonl";
    long gen_n = 2000;
    std::string gen_mode = "unigen";
    std::string gen_domain;
    cmd_gen->add_option("--out", gen_out, "output JSONL path");
    auto* o_gen_n = cmd_gen->add_option("--n", gen_n, "number of samples");
    auto* o_gen_mode =
        cmd_gen->add_option("--mode", gen_mode, "unigen|zerogen|combined")->check(
            CLI::IsMember({"unigen", "zerogen", "combined"}));
    auto* o_gen_domain = cmd_gen->add_option("--domain", gen_domain, "domain for zerogen mode");

    // relabel
    auto* cmd_rel = app.add_subcommand("relabel", "assign PLM soft labels and filter");
    std::string rel_in, rel_out = "relabeled.jsonl";
    std::string rel_mode = "soft";
    double rel_tau = 0.1, rel_t = 0.2;
    bool rel_allow_mismatch = false;
    cmd_rel->add_option("--in", rel_in, "input JSONL")->required();
    cmd_rel->add_option("--out", rel_out, "output JSONL");
    auto* o_rel_mode = cmd_rel->add_option("--mode", rel_mode, "soft|hard|off")
                           ->check(CLI::IsMember({"soft", "hard", "off"}));
    auto* o_rel_tau = cmd_rel->add_option("--tau-re", rel_tau, "softmax temperature");
    auto* o_rel_t = cmd_rel->add_option("--t-re", rel_t, "confidence threshold");
    cmd_rel->add_flag("--allow-hash-mismatch", rel_allow_mismatch,
                      "read artifacts produced by a different config");

    // weight
    auto* cmd_w = app.add_subcommand("weight", "learn sample weights and select the top subset");
    std::string w_in, w_out = "weighted.jsonl", w_trace;
    double w_outer_lr = 5e-2;
    long w_epochs = 50, w_select = 0;
    bool w_allow_mismatch = false;
    cmd_w->add_option("--in", w_in, "input JSONL")->required();
    cmd_w->add_option("--out", w_out, "output JSONL");
    auto* o_w_lr = cmd_w->add_option("--outer-lr", w_outer_lr, "outer learning rate");
    auto* o_w_ep = cmd_w->add_option("--outer-epochs", w_epochs, "outer epochs");
    auto* o_w_sel = cmd_w->add_option("--select", w_select, "records to keep (0 = all)");
    cmd_w->add_option("--trace", w_trace, "weight trace CSV path");
    cmd_w->add_flag("--allow-hash-mismatch", w_allow_mismatch);

    // train
    auto* cmd_t = app.add_subcommand("train", "train the task-agnostic model");
    std::string t_in, t_out = "checkpoint.json", t_log;
    double t_alpha = 0.5, t_tau = 0.2, t_momentum = 0.999, t_tmb = 0.8, t_lr = 2e-5;
    long t_proj = 256, t_bank = 64, t_epochs = 3;
    bool t_no_scl = false, t_no_bank_denoise = false, t_allow_mismatch = false;
    cmd_t->add_option("--in", t_in, "input JSONL")->required();
    cmd_t->add_option("--out", t_out, "checkpoint path");
    auto* o_t_alpha = cmd_t->add_option("--alpha", t_alpha, "contrastive loss weight");
    auto* o_t_tau = cmd_t->add_option("--tau-scl", t_tau, "contrastive temperature");
    auto* o_t_proj = cmd_t->add_option("--proj-dim", t_proj, "projection dimension");
    auto* o_t_bank = cmd_t->add_option("--bank", t_bank, "memory bank capacity");
    auto* o_t_m = cmd_t->add_option("--momentum", t_momentum, "momentum coefficient");
    auto* o_t_tmb = cmd_t->add_option("--t-mb", t_tmb, "bank admission threshold");
    auto* o_t_ep = cmd_t->add_option("--epochs", t_epochs, "training epochs");
    auto* o_t_lr = cmd_t->add_option("--lr", t_lr, "learning rate");
    cmd_t->add_flag("--no-scl", t_no_scl, "disable the contrastive loss (alpha=0)");
    cmd_t->add_flag("--no-bank-denoise", t_no_bank_denoise, "admit every sample to the bank (t_mb=0)");
    cmd_t->add_option("--log", t_log, "training log CSV path");
    cmd_t->add_flag("--allow-hash-mismatch", t_allow_mismatch);

    // evaluate
    auto* cmd_e = app.add_subcommand("evaluate", "multi-domain accuracy of a checkpoint");
    std::string e_ckpt, e_out, e_format = "auto";
    std::vector<std::string> e_corpora;
    std::vector<std::uint64_t> e_seeds;
    cmd_e->add_option("--ckpt", e_ckpt, "checkpoint path")->required();
    cmd_e->add_option("--corpus", e_corpora, "name=path (repeatable)");
    cmd_e->add_option("--seeds", e_seeds, "evaluation seeds")->delimiter(',');
    cmd_e->add_option("--format", e_format, "jsonl|tsv|auto");
    cmd_e->add_option("--out", e_out, "report JSON path");

    // prompt-baseline
    auto* cmd_p = app.add_subcommand("prompt-baseline", "zero-shot PLM classification accuracy");
    std::string p_corpus, p_format = "auto";
    cmd_p->add_option("--corpus", p_corpus, "corpus path")->required();
    cmd_p->add_option("--format", p_format, "jsonl|tsv|auto");

    // project
    auto* cmd_j = app.add_subcommand("project", "2-D projection of encoded representations");
    std::string j_ckpt, j_out = "projection.csv", j_format = "auto";
    std::vector<std::string> j_corpora;
    long j_refine = 0;
    cmd_j->add_option("--ckpt", j_ckpt, "checkpoint path")->required();
    cmd_j->add_option("--corpus", j_corpora, "name=path (repeatable)")->required();
    cmd_j->add_option("--out", j_out, "output CSV path");
    cmd_j->add_option("--refine-iters", j_refine, "neighbor-embedding refinement iterations");
    cmd_j->add_option("--format", j_format, "jsonl|tsv|auto");

    // pipeline
    auto* cmd_pl = app.add_subcommand("pipeline", "run generate -> relabel -> weight -> train -> evaluate");
    std::string pl_out_dir = "pipeline_out";
    std::vector<std::string> pl_skip;
    cmd_pl->add_option("--out-dir", pl_out_dir, "artifact directory");
    cmd_pl->add_option("--skip", pl_skip, "stages to skip: relabel, weight")
        ->check(CLI::IsMember({"relabel", "weight"}));

    // fixture
    auto* cmd_f = app.add_subcommand("fixture", "emit the bundled 4-domain evaluation corpora");
    std::string f_out_dir = "fixture";
    long f_per_domain = 200;
    cmd_f->add_option("--out-dir", f_out_dir, "output directory");
    cmd_f->add_option("--per-domain", f_per_domain, "examples per domain");

    CLI11_PARSE(app, argc, argv);
    set_log_level(g.log_level);

    try {
        Config cfg = load_config(g);

        if (app.got_subcommand(cmd_gen)) {
            overlay(cfg, o_gen_n, "generate.n", gen_n);
            overlay(cfg, o_gen_mode, "generate.mode", gen_mode);
            overlay(cfg, o_gen_domain, "generate.domain", gen_domain);
            const auto ls = label_space_from_config(cfg);
            const auto gen = generator_from_config(cfg, ls);
            const auto templates = generation_templates(cfg, cfg.get_or("generate.mode", "unigen"),
                                                        cfg.get_or("generate.domain", ""));
            GenerateStats stats;
            auto manifest = generate_dataset(
                *gen, templates, ls, decoding_from_config(cfg), cfg.get_int("generate.n", 2000),
                g.seed, &stats, static_cast<int>(cfg.get_int("generate.retries", 3)));
            manifest.config_hash = cfg.hash();
            write_dataset(manifest, gen_out);
            std::printf("{\"n\": %zu, \"empty_generations\": %ld, \"out\": \"%s\"}\n",
                        manifest.records.size(), stats.empty_generations, gen_out.c_str());
        } else if (app.got_subcommand(cmd_rel)) {
            overlay(cfg, o_rel_mode, "relabel.mode", rel_mode);
            overlay(cfg, o_rel_tau, "relabel.tau_re", rel_tau);
            overlay(cfg, o_rel_t, "relabel.t_re", rel_t);
            const auto ls = label_space_from_config(cfg);
            const auto gen = generator_from_config(cfg, ls);
            const auto manifest = read_dataset_checked(rel_in, cfg.hash(), rel_allow_mismatch);
            RelabelSummary summary;
            auto out = relabel_dataset(manifest, *gen, universal_template_from_config(cfg),
                                       relabel_config_from(cfg), &summary);
            out.config_hash = cfg.hash();
            write_dataset(out, rel_out);
            std::printf("{\"n_in\": %ld, \"n_kept\": %ld, \"n_removed\": %ld, \"mode\": \"%s\"}\n",
                        summary.n_in, summary.n_kept, summary.n_removed,
                        relabel_mode_name(summary.mode));
        } else if (app.got_subcommand(cmd_w)) {
            overlay(cfg, o_w_lr, "weight.outer_lr", w_outer_lr);
            overlay(cfg, o_w_ep, "weight.outer_epochs", w_epochs);
            overlay(cfg, o_w_sel, "weight.select", w_select);
            const auto manifest = read_dataset_checked(w_in, cfg.hash(), w_allow_mismatch);
            auto wcfg = weight_config_from(cfg);
            const long n = static_cast<long>(manifest.records.size());
            if (wcfg.select_count <= 0 || wcfg.select_count > n) wcfg.select_count = n;
            std::vector<WeightTracePoint> trace;
            const auto weights = learn_weights(manifest, wcfg, g.seed, &trace);
            auto out = select_top(manifest, weights, wcfg.select_count);
            out.config_hash = cfg.hash();
            write_dataset(out, w_out);
            if (!w_trace.empty()) write_weight_trace(trace, w_trace);
            std::printf("{\"n_in\": %ld, \"n_selected\": %zu, \"out\": \"%s\"}\n", n,
                        out.records.size(), w_out.c_str());
        } else if (app.got_subcommand(cmd_t)) {
            overlay(cfg, o_t_alpha, "train.alpha", t_alpha);
            overlay(cfg, o_t_tau, "train.tau_scl", t_tau);
            overlay(cfg, o_t_proj, "train.proj_dim", t_proj);
            overlay(cfg, o_t_bank, "train.bank", t_bank);
            overlay(cfg, o_t_m, "train.momentum", t_momentum);
            overlay(cfg, o_t_tmb, "train.t_mb", t_tmb);
            overlay(cfg, o_t_ep, "train.epochs", t_epochs);
            overlay(cfg, o_t_lr, "train.lr", t_lr);
            if (t_no_scl) cfg.set("train.alpha", "0");
            if (t_no_bank_denoise) cfg.set("train.t_mb", "0");
            const auto manifest = read_dataset_checked(t_in, cfg.hash(), t_allow_mismatch);
            const auto tcfg = train_config_from(cfg);
            const auto result = train(manifest, tcfg, g.seed);
            if (!t_log.empty()) write_train_log(result.log, t_log);
            save_checkpoint(
                make_checkpoint(result, manifest.label_space, cfg.hash(), tcfg, g.seed), t_out);
            std::printf("{\"steps\": %zu, \"final_loss\": %s, \"out\": \"%s\"}\n",
                        result.log.size(),
                        format_double(result.log.empty() ? 0.0 : result.log.back().total).c_str(),
                        t_out.c_str());
        } else if (app.got_subcommand(cmd_e)) {
            const auto ckpt = load_checkpoint(e_ckpt);
            auto corpora = corpora_from_args(e_corpora, ckpt.label_space, e_format);
            if (corpora.empty()) corpora = eval_corpora_from_config(cfg, ckpt.label_space);
            if (corpora.empty()) throw ConfigError("no evaluation corpora given");
            std::vector<std::uint64_t> seeds = e_seeds;
            if (seeds.empty()) seeds = eval_seeds_from_config(cfg);
            const auto report = evaluate(ckpt, corpora, seeds);
            std::cout << report_table(report);
            if (!e_out.empty()) {
                std::ofstream out(e_out, std::ios::binary | std::ios::trunc);
                out << report_to_json(report).dump(2) << '\n';
            } else {
                std::cout << report_to_json(report).dump(2) << '\n';
            }
        } else if (app.got_subcommand(cmd_p)) {
            const auto ls = label_space_from_config(cfg);
            const auto gen = generator_from_config(cfg, ls);
            const CorpusFormat fmt = p_format == "jsonl"  ? CorpusFormat::kJsonl
                                     : p_format == "tsv" ? CorpusFormat::kTsv
                                                         : corpus_format_from_path(p_corpus);
            const auto corpus = load_eval_corpus(p_corpus, fmt, ls);
            const double acc =
                prompting_baseline(*gen, universal_template_from_config(cfg), ls, corpus);
            std::printf("{\"accuracy\": %s, \"n\": %zu}\n", format_double(acc).c_str(),
                        corpus.items.size());
        } else if (app.got_subcommand(cmd_j)) {
            const auto ckpt = load_checkpoint(j_ckpt);
            const auto corpora = corpora_from_args(j_corpora, ckpt.label_space, j_format);
            const auto points =
                project_2d(ckpt, corpora, static_cast<int>(j_refine), g.seed);
            write_projection_csv(points, j_out);
            std::printf("{\"points\": %zu, \"out\": \"%s\"}\n", points.size(), j_out.c_str());
        } else if (app.got_subcommand(cmd_pl)) {
            PipelineOptions opts;
            opts.out_dir = pl_out_dir;
            opts.seed = g.seed;
            for (const auto& s : pl_skip) opts.skip.insert(s);
            const auto artifacts = run_pipeline(cfg, opts);
            if (artifacts.evaluated) std::cout << report_table(artifacts.report);
            std::printf("{\"out_dir\": \"%s\", \"config_hash\": \"%s\"}\n", pl_out_dir.c_str(),
                        cfg.hash().c_str());
        } else if (app.got_subcommand(cmd_f)) {
            const auto paths = write_fixture_corpora(f_out_dir, static_cast<int>(f_per_domain),
                                                     g.seed);
            std::printf("{\"domains\": %zu, \"per_domain\": %ld, \"out_dir\": \"%s\"}\n",
                        paths.size(), f_per_domain, f_out_dir.c_str());
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 2;
    }
    return 0;
}
