#include "cglp/llm_client.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

namespace cglp {

namespace {

// Split an http(s) URL into (scheme://host[:port], path).
bool split_url(const std::string& url, std::string& origin, std::string& path) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return false;
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        origin = url;
        path = "/v1/chat/completions";
    } else {
        origin = url.substr(0, path_start);
        path = url.substr(path_start);
    }
    return true;
}

class HttpLlmClient final : public LlmClient {
public:
    explicit HttpLlmClient(LlmSettings settings) : settings_(std::move(settings)) {}

    std::optional<std::string> complete(const std::string& system_prompt,
                                        const std::string& user_prompt) override {
        std::string origin, path;
        if (!split_url(settings_.url, origin, path)) return std::nullopt;
        httplib::Client cli(origin);
        cli.set_connection_timeout(settings_.timeout_seconds);
        cli.set_read_timeout(settings_.timeout_seconds);
        httplib::Headers headers;
        if (!settings_.key.empty())
            headers.emplace("Authorization", "Bearer " + settings_.key);
        nlohmann::json body = {
            {"model", settings_.model},
            {"messages",
             {{{"role", "system"}, {"content", system_prompt}},
              {{"role", "user"}, {"content", user_prompt}}}},
            {"temperature", settings_.temperature},
        };
        auto res = cli.Post(path, headers, body.dump(), "application/json");
        if (!res || res->status != 200) return std::nullopt;
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;
        }
    }

    const LlmSettings& settings() const override { return settings_; }

private:
    LlmSettings settings_;
};

}  // namespace

std::unique_ptr<LlmClient> make_http_llm_client(LlmSettings settings) {
    return std::make_unique<HttpLlmClient>(std::move(settings));
}

std::unique_ptr<LlmClient> make_llm_client_from_env() {
    const char* url = std::getenv("CGLP_LLM_URL");
    if (!url || !*url) return nullptr;
    LlmSettings s;
    s.url = url;
    if (const char* key = std::getenv("CGLP_LLM_KEY")) s.key = key;
    return make_http_llm_client(std::move(s));
}

}  // namespace cglp
