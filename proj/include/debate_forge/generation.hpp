#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "debate_forge/corpus.hpp"
#include "debate_forge/error.hpp"
#include "debate_forge/text.hpp"

namespace debate_forge {

struct GenerationRequest {
    Tokens prompt;
    int max_tokens = 60;
    double temperature = 1.0;
    std::uint64_t seed = 0;
};

inline void validate_request(const GenerationRequest& req) {
    if (req.prompt.empty()) throw BackendError(BackendError::Kind::InvalidRequest, "prompt is empty");
    if (req.max_tokens < 1) throw BackendError(BackendError::Kind::InvalidRequest, "max_tokens must be at least 1");
    if (!(req.temperature >= 0.0)) {
        throw BackendError(BackendError::Kind::InvalidRequest, "temperature must be non-negative");
    }
}

// Cuts at the first <eos>, keeps at most `max_tokens` tokens and appends a
// single <eos>.
inline Tokens ensure_eos(Tokens tokens, int max_tokens) {
    auto eos = std::find(tokens.begin(), tokens.end(), special::kEos);
    tokens.erase(eos, tokens.end());
    if (max_tokens >= 0 && tokens.size() > static_cast<std::size_t>(max_tokens)) tokens.resize(max_tokens);
    tokens.push_back(special::kEos);
    return tokens;
}

inline Tokens strip_eos(Tokens tokens) {
    if (!tokens.empty() && tokens.back() == special::kEos) tokens.pop_back();
    return tokens;
}

class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;

    // Response ending in exactly one <eos>.
    virtual Tokens generate(const GenerationRequest& req) = 0;
    virtual std::string describe() const = 0;
    // Same request and seed give the same response.
    virtual bool deterministic() const { return true; }
};

// Replies with the prompt itself.
class EchoBackend : public GeneratorBackend {
public:
    Tokens generate(const GenerationRequest& req) override {
        validate_request(req);
        return ensure_eos(req.prompt, req.max_tokens);
    }
    std::string describe() const override { return "echo"; }
};

}  // namespace debate_forge
