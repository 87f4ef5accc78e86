#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cglp/denoiser.hpp"
#include "cglp/rng.hpp"

using namespace cglp;

namespace {

struct FakeLlm : LlmClient {
    std::optional<std::string> reply;
    std::string last_user_prompt;
    LlmSettings cfg;
    std::optional<std::string> complete(const std::string&, const std::string& user) override {
        last_user_prompt = user;
        return reply;
    }
    const LlmSettings& settings() const override { return cfg; }
};

}  // namespace

TEST_CASE("empty bodies are rejected at construction") {
    CHECK_THROWS_AS(RawCti("r1", "feed", ""), ValidationError);
}

TEST_CASE("CoT prompt names all three stages and round-trips the body") {
    RawCti raw("r1", "feed", "The malware beaconed to 10.1.2.3 and ran implant.exe.");
    std::string prompt = build_cot_prompt(raw);
    CHECK(prompt.find("Entity Identification") != std::string::npos);
    CHECK(prompt.find("Interaction Extraction") != std::string::npos);
    CHECK(prompt.find("Knowledge Distillation") != std::string::npos);
    CHECK(extract_prompt_body(prompt) == raw.body);
}

TEST_CASE("fence grows past bodies that contain the delimiter") {
    RawCti raw("r2", "feed", "weird body with ===CTI=== and ====CTI==== inside\nsecond line");
    std::string prompt = build_cot_prompt(raw);
    CHECK(extract_prompt_body(prompt) == raw.body);
    CHECK_THROWS_AS(extract_prompt_body("no fence here"), ValidationError);
}

TEST_CASE("rule-based stripping removes urls, emails, and boilerplate") {
    std::string body =
        "Attackers used spear phishing.\n"
        "Read more at https://vendor.example/blog/post?id=1 now.\n"
        "Contact press@vendor.example for details.\n"
        "Subscribe to our newsletter for updates!\n"
        "Copyright 2024 Vendor. All rights reserved.\n"
        "The   implant   persisted\tvia a registry key.\n";
    std::string clean = rule_based_strip(body);
    CHECK(clean ==
          "Attackers used spear phishing. Read more at now. Contact for details. The implant "
          "persisted via a registry key.");
    // Idempotent.
    CHECK(rule_based_strip(clean) == clean);
}

TEST_CASE("denoise prefers the llm and falls back to stripping") {
    RawCti raw("r3", "feed", "Noise https://x.example noise. The backdoor connected to 1.2.3.4.");
    FakeLlm llm;
    llm.reply = "The backdoor connected to 1.2.3.4.";
    std::string warning;
    DenoisedCti viaLlm = denoise(raw, &llm, &warning);
    CHECK(viaLlm.body == *llm.reply);
    CHECK(viaLlm.narrative.has_value());
    CHECK(warning.empty());
    CHECK(llm.last_user_prompt.find(raw.body) != std::string::npos);

    llm.reply = std::nullopt;
    DenoisedCti fallback = denoise(raw, &llm, &warning);
    CHECK(fallback.body == rule_based_strip(raw.body));
    CHECK(!warning.empty());
    CHECK(!fallback.narrative.has_value());
    CHECK(denoise(raw, nullptr).body == fallback.body);
}

TEST_CASE("denoise never erases a report entirely") {
    // Everything is boilerplate; stripping would leave nothing.
    RawCti raw("r4", "feed", "Subscribe to our newsletter\nAll rights reserved\n");
    DenoisedCti out = denoise(raw, nullptr);
    CHECK(out.body == raw.body);
}

TEST_CASE("default rules require one IoC and one TTP") {
    FilterRules rules = FilterRules::defaults();
    CHECK(rules.ioc_count() >= 5);
    CHECK(rules.ttp_count() >= 8);
    CHECK(rules.matches("Phishing campaign delivered payload.exe to victims."));
    CHECK(rules.matches("Exfiltration to 198.51.100.77 was observed."));
    CHECK(rules.matches("HKEY_LOCAL_MACHINE\\Software run key ensured persistence."));
    // TTP word without any IoC.
    CHECK_FALSE(rules.matches("The campaign relied on phishing and social engineering."));
    // IoC without any TTP word.
    CHECK_FALSE(rules.matches("Traffic went to 10.0.0.1 on port 443."));
    CHECK_FALSE(rules.matches("Nothing interesting here."));
}

TEST_CASE("custom pattern files parse and validate") {
    FilterRules rules = FilterRules::from_lines({"# comment", "ioc:evil\\.exe", "ttp:ransom"});
    CHECK(rules.matches("the dropper evil.exe began ransom negotiations"));
    CHECK_FALSE(rules.matches("evil.exe alone"));
    CHECK_THROWS_AS(FilterRules::from_lines({"ioc:x"}), ValidationError);
    CHECK_THROWS_AS(FilterRules::from_lines({"bogus:x", "ioc:a", "ttp:b"}), ValidationError);
    CHECK_THROWS_AS(FilterRules::from_lines({"ioc:[", "ttp:b"}), ValidationError);
}

TEST_CASE("filter_corpus agrees with a per-doc rescan oracle over 1000 synthetic docs") {
    FilterRules rules = FilterRules::defaults();
    Rng rng(777);
    std::vector<RawCti> corpus;
    std::vector<bool> oracle;
    for (int i = 0; i < 1000; ++i) {
        bool plant_ioc = rng.next_below(2) == 0;
        bool plant_ttp = rng.next_below(2) == 0;
        std::string body = "Routine advisory number " + std::to_string(i) + ".";
        if (plant_ioc) body += " The sample beaconed to 203.0.113." + std::to_string(i % 250) + ".";
        if (plant_ttp) body += " Analysts observed lateral movement across hosts.";
        corpus.emplace_back("doc" + std::to_string(i), "synth", body);
        // Independent verdict: rescan the final body rather than trusting the
        // planting flags (guards against accidental pattern hits).
        oracle.push_back(rules.matches(body));
    }
    auto kept = filter_corpus(corpus, rules);
    std::vector<std::string> expected_ids;
    for (size_t i = 0; i < corpus.size(); ++i)
        if (oracle[i]) expected_ids.push_back(corpus[i].id);
    REQUIRE(kept.size() == expected_ids.size());
    for (size_t i = 0; i < kept.size(); ++i) CHECK(kept[i].id == expected_ids[i]);
    // Sanity: the planted corpus actually exercises both outcomes.
    CHECK(kept.size() > 100);
    CHECK(kept.size() < 900);
}
