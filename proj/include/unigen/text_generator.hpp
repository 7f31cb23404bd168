#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unigen/errors.hpp"

namespace unigen {

struct DecodingConfig {
    int top_k = 40;
    double top_p = 0.9;
    int max_new_tokens = 64;
    std::vector<std::string> stop_sequences = {"\n"};

    void validate() const {
        if (top_k < 1) throw ValidationError("top_k must be >= 1");
        if (!(top_p > 0.0) || top_p > 1.0) throw ValidationError("top_p must be in (0,1]");
        if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be >= 1");
    }
};

// Causal language model boundary. Implementations must be deterministic for
// a fixed (prompt, decoding, seed) and stateless across calls.
class TextGenerator {
public:
    virtual ~TextGenerator() = default;

    virtual std::string id() const = 0;

    // Returns the continuation only, without the prompt.
    virtual std::string generate(const std::string& prompt, const DecodingConfig& decoding,
                                 std::uint64_t seed) = 0;

    // Log-probability of each candidate's first token as the next token
    // after `prompt`. Values are finite and <= 0.
    virtual std::vector<double> score_next_tokens(const std::string& prompt,
                                                  const std::vector<std::string>& candidates) = 0;
};

} // namespace unigen
