#pragma once

#include <memory>
#include <optional>
#include <string>

namespace cglp {

struct LlmSettings {
    std::string url;    // OpenAI-compatible chat-completions endpoint
    std::string key;    // bearer token, may be empty
    std::string model = "llama3-8b";
    double temperature = 0.2;
    int timeout_seconds = 60;
};

// Chat-completion client. complete() returns nullopt on any transport or
// protocol failure; callers fall back to the deterministic offline path.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::optional<std::string> complete(const std::string& system_prompt,
                                                const std::string& user_prompt) = 0;
    virtual const LlmSettings& settings() const = 0;
};

std::unique_ptr<LlmClient> make_http_llm_client(LlmSettings settings);

// Reads CGLP_LLM_URL / CGLP_LLM_KEY; returns nullptr when no URL is set.
std::unique_ptr<LlmClient> make_llm_client_from_env();

}  // namespace cglp
