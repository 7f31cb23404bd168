#pragma once

#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "unigen/errors.hpp"
#include "unigen/text_generator.hpp"

namespace unigen {

// Bridges the generator interface to an external model server, so a real
// PLM can sit behind the pipeline as a sidecar process.
//
//   POST /generate {"prompt", "top_k", "top_p", "max_new_tokens", "stop", "seed"}
//     -> {"text": "<continuation>"}
//   POST /score {"prompt", "candidates": [...]}
//     -> {"log_probs": [...]}  (one finite value <= 0 per candidate)
class HttpLm final : public TextGenerator {
public:
    explicit HttpLm(std::string base_url, int timeout_seconds = 60)
        : base_url_(std::move(base_url)), client_(base_url_) {
        client_.set_read_timeout(timeout_seconds, 0);
        client_.set_connection_timeout(timeout_seconds, 0);
    }

    std::string id() const override { return "http:" + base_url_; }

    std::string generate(const std::string& prompt, const DecodingConfig& decoding,
                         std::uint64_t seed) override {
        nlohmann::json req;
        req["prompt"] = prompt;
        req["top_k"] = decoding.top_k;
        req["top_p"] = decoding.top_p;
        req["max_new_tokens"] = decoding.max_new_tokens;
        req["stop"] = decoding.stop_sequences;
        req["seed"] = seed;
        const auto body = post("/generate", req);
        return body.at("text").get<std::string>();
    }

    std::vector<double> score_next_tokens(const std::string& prompt,
                                          const std::vector<std::string>& candidates) override {
        nlohmann::json req;
        req["prompt"] = prompt;
        req["candidates"] = candidates;
        const auto body = post("/score", req);
        auto out = body.at("log_probs").get<std::vector<double>>();
        if (out.size() != candidates.size())
            throw ValidationError("LM server returned " + std::to_string(out.size()) +
                                  " log-probs for " + std::to_string(candidates.size()) +
                                  " candidates");
        for (double v : out)
            if (!std::isfinite(v) || v > 0.0)
                throw ValidationError("LM server returned an invalid log-probability");
        return out;
    }

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& req) {
        const auto res = client_.Post(path, req.dump(), "application/json");
        if (!res)
            throw IoError("LM server unreachable at " + base_url_ + path);
        if (res->status != 200)
            throw IoError("LM server error " + std::to_string(res->status) + " at " + base_url_ +
                          path);
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad LM server response: ") + e.what());
        }
    }

    std::string base_url_;
    httplib::Client client_;
};

} // namespace unigen
