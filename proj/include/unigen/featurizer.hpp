#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "unigen/hash.hpp"
#include "unigen/matrix.hpp"

namespace unigen {

// Lowercased alphanumeric runs (apostrophes kept inside words).
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || (c == '\'' && !cur.empty())) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

// Hashing trick: token t adds +1 to bucket hash(t) % dim, so colliding
// tokens merge rather than cancel. Rows are L2-normalized.
inline void hashed_bow_into(const std::string& text, int dim, double* row) {
    const auto tokens = tokenize(text);
    for (const auto& t : tokens) {
        const std::uint64_t h = fnv1a64(t);
        row[h % static_cast<std::uint64_t>(dim)] += 1.0;
    }
    double norm = 0.0;
    for (int j = 0; j < dim; ++j) norm += row[j] * row[j];
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (int j = 0; j < dim; ++j) row[j] /= norm;
    }
}

inline Matrix hashed_bow_batch(const std::vector<std::string>& texts, int dim) {
    Matrix out(static_cast<int>(texts.size()), dim);
    for (std::size_t i = 0; i < texts.size(); ++i)
        hashed_bow_into(texts[i], dim, &out.a[i * static_cast<std::size_t>(dim)]);
    return out;
}

// Hashed token ids for the transformer path; id 0 is reserved for the empty
// fallback so every sequence has at least one position.
inline std::vector<int> token_ids(const std::string& text, int vocab, int max_len) {
    std::vector<int> ids;
    for (const auto& t : tokenize(text)) {
        if (static_cast<int>(ids.size()) >= max_len) break;
        ids.push_back(1 + static_cast<int>(fnv1a64(t) % static_cast<std::uint64_t>(vocab - 1)));
    }
    if (ids.empty()) ids.push_back(0);
    return ids;
}

} // namespace unigen
