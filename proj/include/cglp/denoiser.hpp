#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cglp/errors.hpp"
#include "cglp/llm_client.hpp"

namespace cglp {

struct RawCti {
    std::string id;
    std::string source;
    std::string body;

    RawCti() = default;
    RawCti(std::string id_, std::string source_, std::string body_)
        : id(std::move(id_)), source(std::move(source_)), body(std::move(body_)) {
        if (body.empty()) throw ValidationError("CTI body must be non-empty: " + id);
    }
};

struct DenoisedCti {
    std::string id;
    std::string body;
    // Per-stage texts when an LLM produced them; absent in offline mode.
    std::optional<std::string> entities;
    std::optional<std::string> interactions;
    std::optional<std::string> narrative;
};

// Three-stage chain-of-thought prompt; the raw body rides in a fenced input
// section with collision-safe delimiters.
std::string build_cot_prompt(const RawCti& raw);

// Recover the input body from a rendered prompt (round-trip check).
std::string extract_prompt_body(const std::string& prompt);

// With a client: LLM completion becomes the body. Without (or on transport
// failure): deterministic rule-based stripping. Never fails.
DenoisedCti denoise(const RawCti& raw, LlmClient* client, std::string* warning = nullptr);

// Offline stripping: URLs, e-mail addresses, boilerplate lines, collapsed
// whitespace. Idempotent.
std::string rule_based_strip(const std::string& body);

// Compiled IoC/TTP pattern set. Load from a pattern file (`ioc:` / `ttp:`
// prefixed lines) or use the built-in defaults.
class FilterRules {
public:
    static FilterRules defaults();
    static FilterRules from_file(const std::string& path);
    static FilterRules from_lines(const std::vector<std::string>& lines);

    bool matches(const std::string& body) const;  // >=1 IoC AND >=1 TTP pattern
    size_t ioc_count() const;
    size_t ttp_count() const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

// Keeps reports matching the rules, input order preserved.
std::vector<RawCti> filter_corpus(const std::vector<RawCti>& raws, const FilterRules& rules);

}  // namespace cglp
