#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "unigen/checkpoint.hpp"
#include "unigen/dataset_io.hpp"
#include "unigen/encoder.hpp"
#include "unigen/errors.hpp"
#include "unigen/relabeler.hpp"

namespace unigen {

struct EvalCorpus {
    std::vector<std::pair<std::string, int>> items; // (text, class id), load order
};

enum class CorpusFormat { kJsonl, kTsv };

inline CorpusFormat corpus_format_from_path(const std::string& path) {
    if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl") return CorpusFormat::kJsonl;
    return CorpusFormat::kTsv;
}

// JSONL objects {"text":..., "label":...} or two-column "label<TAB>text".
inline EvalCorpus load_eval_corpus(const std::string& path, CorpusFormat format,
                                   const LabelSpace& label_space) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus: " + path);
    EvalCorpus corpus;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_copy(line).empty()) continue;
        std::string text;
        int label = -1;
        if (format == CorpusFormat::kJsonl) {
            try {
                const auto j = nlohmann::json::parse(line);
                text = j.at("text").get<std::string>();
                label = j.at("label").get<int>();
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(std::string("bad corpus line: ") + e.what(), line_no);
            }
        } else {
            const auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw ParseError("corpus line has no tab separator", line_no);
            const std::string label_text = trim_copy(line.substr(0, tab));
            text = trim_copy(line.substr(tab + 1));
            char* end = nullptr;
            label = static_cast<int>(std::strtol(label_text.c_str(), &end, 10));
            if (end == label_text.c_str() || *end != '\0') {
                label = label_space.class_of_name(label_text);
                if (label < 0)
                    throw ValidationError("unknown label \"" + label_text + "\" at line " +
                                          std::to_string(line_no));
            }
        }
        if (!label_space.valid_class(label))
            throw ValidationError("label " + std::to_string(label) + " outside label space at line " +
                                  std::to_string(line_no));
        if (trim_copy(text).empty())
            throw ValidationError("empty text at line " + std::to_string(line_no));
        corpus.items.emplace_back(std::move(text), label);
    }
    log_info("loaded " + std::to_string(corpus.items.size()) + " examples from " + path);
    return corpus;
}

// Argmax predictions of the checkpointed model, batched for throughput;
// ties resolve to the lowest class id.
inline std::vector<int> predict_classes(const Checkpoint& ckpt,
                                        const std::vector<std::string>& texts,
                                        int batch_size = 64) {
    const auto enc = make_encoder(ckpt.spec);
    ParamSet params = ckpt.theta_q;
    std::vector<int> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size) {
        const std::size_t end = std::min(texts.size(), start + batch_size);
        const std::vector<std::string> batch(texts.begin() + start, texts.begin() + end);
        Tape tape;
        const auto fwd = enc->forward(tape, batch, params, false, true);
        for (int i = 0; i < fwd.logits->value.rows; ++i) {
            int best = 0;
            for (int c = 1; c < fwd.logits->value.cols; ++c)
                if (fwd.logits->value.at(i, c) > fwd.logits->value.at(i, best)) best = c;
            out.push_back(best);
        }
    }
    return out;
}

struct EvalReport {
    std::map<std::string, double> per_domain_accuracy;
    double average = 0.0;
    std::vector<std::uint64_t> seeds;
    std::map<std::uint64_t, std::map<std::string, double>> per_seed;
};

// Accuracy per domain per seed; headline numbers are the unweighted means
// over seeds and domains. Prediction is deterministic, so per-seed entries
// coincide unless the caller evaluates different checkpoints per seed.
inline EvalReport evaluate(const Checkpoint& ckpt,
                           const std::map<std::string, EvalCorpus>& corpora,
                           const std::vector<std::uint64_t>& seeds) {
    if (corpora.empty()) throw ValidationError("evaluate needs at least one corpus");
    if (seeds.empty()) throw ValidationError("evaluate needs at least one seed");
    for (const auto& [domain, corpus] : corpora)
        if (corpus.items.empty())
            throw ValidationError("corpus for domain " + domain + " is empty");

    EvalReport report;
    report.seeds = seeds;
    std::map<std::string, double> domain_acc;
    for (const auto& [domain, corpus] : corpora) {
        std::vector<std::string> texts;
        texts.reserve(corpus.items.size());
        for (const auto& [text, label] : corpus.items) texts.push_back(text);
        const auto preds = predict_classes(ckpt, texts);
        long correct = 0;
        for (std::size_t i = 0; i < preds.size(); ++i)
            if (preds[i] == corpus.items[i].second) ++correct;
        domain_acc[domain] = static_cast<double>(correct) / corpus.items.size();
    }
    for (const auto seed : seeds) report.per_seed[seed] = domain_acc;
    double total = 0.0;
    for (const auto& [domain, acc] : domain_acc) {
        report.per_domain_accuracy[domain] = acc;
        total += acc;
    }
    report.average = total / static_cast<double>(domain_acc.size());
    return report;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["per_domain_accuracy"] = r.per_domain_accuracy;
    j["average"] = r.average;
    j["seeds"] = r.seeds;
    nlohmann::ordered_json per_seed = nlohmann::ordered_json::object();
    for (const auto& [seed, accs] : r.per_seed) per_seed[std::to_string(seed)] = accs;
    j["per_seed"] = per_seed;
    return j;
}

inline std::string report_table(const EvalReport& r) {
    std::size_t width = 8;
    for (const auto& [domain, acc] : r.per_domain_accuracy)
        width = std::max(width, domain.size() + 2);
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width)) << "domain" << "accuracy\n";
    for (const auto& [domain, acc] : r.per_domain_accuracy)
        os << std::left << std::setw(static_cast<int>(width)) << domain << std::fixed
           << std::setprecision(4) << acc << '\n';
    os << std::left << std::setw(static_cast<int>(width)) << "average" << std::fixed
       << std::setprecision(4) << r.average << '\n';
    return os.str();
}

// Zero-shot classification by scoring verbalizer words with the PLM under
// the shared template; the scoring path is the relabeler's class_logits.
inline double prompting_baseline(TextGenerator& gen, const PromptTemplate& tmpl,
                                 const LabelSpace& label_space, const EvalCorpus& corpus) {
    if (corpus.items.empty()) throw ValidationError("prompting baseline needs a non-empty corpus");
    long correct = 0;
    for (const auto& [text, label] : corpus.items) {
        const auto logits = class_logits(gen, tmpl, label_space, text);
        if (argmax_lowest_tie(logits) == label) ++correct;
    }
    return static_cast<double>(correct) / corpus.items.size();
}

struct ProjectedPoint {
    double x = 0.0;
    double y = 0.0;
    std::string domain;
    int label = 0;
};

namespace detail {

// Top eigenvector of a symmetric matrix by power iteration with a
// deterministic start. Deflate and repeat for the second component.
inline std::vector<double> power_iteration(const Matrix& sym, std::uint64_t init_seed,
                                           double* eigenvalue_out) {
    const int d = sym.rows;
    Rng rng(init_seed);
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    double lambda = 0.0;
    for (int iter = 0; iter < 2000; ++iter) {
        std::vector<double> next(d, 0.0);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) next[i] += sym.at(i, j) * v[j];
        double norm = 0.0;
        for (double x : next) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-300) break;
        for (auto& x : next) x /= norm;
        double delta = 0.0;
        for (int i = 0; i < d; ++i) delta = std::max(delta, std::fabs(next[i] - v[i]));
        v = std::move(next);
        lambda = norm;
        if (delta < 1e-14 && iter > 10) break;
    }
    // Sign convention: largest-magnitude entry positive.
    int arg = 0;
    for (int i = 1; i < d; ++i)
        if (std::fabs(v[i]) > std::fabs(v[arg])) arg = i;
    if (v[arg] < 0)
        for (auto& x : v) x = -x;
    if (eigenvalue_out) *eigenvalue_out = lambda;
    return v;
}

} // namespace detail

// Principal-component projection of theta_q projections to 2-D, with an
// optional deterministic stochastic-neighbor refinement pass.
inline std::vector<ProjectedPoint> project_2d(const Checkpoint& ckpt,
                                              const std::map<std::string, EvalCorpus>& corpora,
                                              int refine_iterations = 0,
                                              std::uint64_t seed = 0) {
    std::vector<std::string> texts;
    std::vector<std::string> domains;
    std::vector<int> labels;
    for (const auto& [domain, corpus] : corpora) {
        for (const auto& [text, label] : corpus.items) {
            texts.push_back(text);
            domains.push_back(domain);
            labels.push_back(label);
        }
    }
    const long n = static_cast<long>(texts.size());
    if (n < 3) throw ValidationError("project_2d needs at least 3 points");

    const auto enc = make_encoder(ckpt.spec);
    ParamSet params = ckpt.theta_q;
    Matrix z(static_cast<int>(n), ckpt.spec.proj_dim);
    const int batch = 64;
    for (long start = 0; start < n; start += batch) {
        const long end = std::min(n, start + batch);
        const std::vector<std::string> chunk(texts.begin() + start, texts.begin() + end);
        Tape tape;
        const auto fwd = enc->forward(tape, chunk, params, false, false);
        for (int i = 0; i < fwd.projections->value.rows; ++i)
            for (int j = 0; j < z.cols; ++j)
                z.at(static_cast<int>(start) + i, j) = fwd.projections->value.at(i, j);
    }

    // Center, covariance, top-2 principal directions.
    std::vector<double> mean(z.cols, 0.0);
    for (int i = 0; i < z.rows; ++i)
        for (int j = 0; j < z.cols; ++j) mean[j] += z.at(i, j);
    for (auto& m : mean) m /= n;
    for (int i = 0; i < z.rows; ++i)
        for (int j = 0; j < z.cols; ++j) z.at(i, j) -= mean[j];
    Matrix cov(z.cols, z.cols);
    for (int i = 0; i < z.rows; ++i)
        for (int a = 0; a < z.cols; ++a) {
            const double za = z.at(i, a);
            if (za == 0.0) continue;
            for (int b = 0; b < z.cols; ++b) cov.at(a, b) += za * z.at(i, b);
        }
    for (auto& x : cov.a) x /= std::max(1L, n - 1);

    double l1 = 0.0;
    const auto v1 = detail::power_iteration(cov, 0x50ca5eedULL, &l1);
    Matrix deflated = cov;
    for (int a = 0; a < cov.rows; ++a)
        for (int b = 0; b < cov.cols; ++b) deflated.at(a, b) -= l1 * v1[a] * v1[b];
    const auto v2 = detail::power_iteration(deflated, 0x50ca5eeeULL, nullptr);

    std::vector<ProjectedPoint> points(n);
    for (long i = 0; i < n; ++i) {
        double px = 0.0, py = 0.0;
        for (int j = 0; j < z.cols; ++j) {
            px += z.at(static_cast<int>(i), j) * v1[j];
            py += z.at(static_cast<int>(i), j) * v2[j];
        }
        points[i] = {px, py, domains[i], labels[i]};
    }

    if (refine_iterations > 0) {
        // Exact SNE refinement: Gaussian input affinities, Student-t output
        // kernel, plain gradient descent from the PCA layout. Deterministic
        // for a fixed seed by construction.
        (void)seed; // layout is already deterministic; no stochastic init used
        std::vector<double> p(static_cast<std::size_t>(n) * n, 0.0);
        std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
        std::vector<double> all;
        for (long i = 0; i < n; ++i)
            for (long j = i + 1; j < n; ++j) {
                double d2 = 0.0;
                for (int c = 0; c < z.cols; ++c) {
                    const double diff = z.at(static_cast<int>(i), c) - z.at(static_cast<int>(j), c);
                    d2 += diff * diff;
                }
                dist[i * n + j] = dist[j * n + i] = d2;
                all.push_back(d2);
            }
        std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
        const double sigma2 = std::max(1e-12, all[all.size() / 2]);
        double psum = 0.0;
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < n; ++j) {
                if (i == j) continue;
                p[i * n + j] = std::exp(-dist[i * n + j] / (2.0 * sigma2));
                psum += p[i * n + j];
            }
        for (auto& x : p) x /= psum;

        const double lr = 0.1;
        for (int iter = 0; iter < refine_iterations; ++iter) {
            std::vector<double> q(static_cast<std::size_t>(n) * n, 0.0);
            double qsum = 0.0;
            for (long i = 0; i < n; ++i)
                for (long j = i + 1; j < n; ++j) {
                    const double dx = points[i].x - points[j].x;
                    const double dy = points[i].y - points[j].y;
                    const double w = 1.0 / (1.0 + dx * dx + dy * dy);
                    q[i * n + j] = q[j * n + i] = w;
                    qsum += 2.0 * w;
                }
            for (long i = 0; i < n; ++i) {
                double gx = 0.0, gy = 0.0;
                for (long j = 0; j < n; ++j) {
                    if (i == j) continue;
                    const double w = q[i * n + j];
                    const double coeff = 4.0 * (p[i * n + j] - w / qsum) * w;
                    gx += coeff * (points[i].x - points[j].x);
                    gy += coeff * (points[i].y - points[j].y);
                }
                points[i].x -= lr * gx;
                points[i].y -= lr * gy;
            }
        }
    }
    return points;
}

inline void write_projection_csv(const std::vector<ProjectedPoint>& points,
                                 const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open projection output: " + path);
    out << "x,y,domain,label\n";
    for (const auto& pt : points)
        out << format_double(pt.x) << ',' << format_double(pt.y) << ',' << pt.domain << ','
            << pt.label << '\n';
}

} // namespace unigen
