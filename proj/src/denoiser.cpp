#include "cglp/denoiser.hpp"

#include <fstream>
#include <regex>
#include <sstream>

namespace cglp {

namespace {

// Fence that never occurs in the body: grow the '=' runs until it is unique.
std::string make_fence(const std::string& body) {
    std::string fence = "===CTI===";
    size_t pad = 3;
    while (body.find(fence) != std::string::npos) {
        ++pad;
        fence = std::string(pad, '=') + "CTI" + std::string(pad, '=');
    }
    return fence;
}

const char* kCotStages =
    "Follow these three reasoning stages in order and label each one:\n"
    "1. Entity Identification: list the core system entities (processes, "
    "files, sockets, payloads) involved in the attack.\n"
    "2. Interaction Extraction: infer the explicit and implicit interactions "
    "among those entities, mapped to system-audit verbs (read, write, "
    "execute, fork, open, close, delete, connect, send, receive).\n"
    "3. Knowledge Distillation: consolidate the interactions into a concise, "
    "temporally ordered attack narrative.\n";

}  // namespace

std::string build_cot_prompt(const RawCti& raw) {
    std::string fence = make_fence(raw.body);
    std::ostringstream os;
    os << "You are a threat analyst distilling a noisy CTI report into an "
          "actionable narrative.\n\n"
       << kCotStages << "\nInput report (between " << fence << " markers):\n"
       << fence << "\n"
       << raw.body << "\n"
       << fence << "\n";
    return os.str();
}

std::string extract_prompt_body(const std::string& prompt) {
    static const std::regex fence_re(R"(^=+CTI=+$)");
    std::istringstream is(prompt);
    std::string line, fence;
    size_t open_end = std::string::npos;
    size_t offset = 0;
    while (std::getline(is, line)) {
        size_t line_start = offset;
        offset += line.size() + 1;
        if (fence.empty()) {
            if (std::regex_match(line, fence_re)) {
                fence = line;
                open_end = offset;
            }
        } else if (line == fence) {
            return prompt.substr(open_end, line_start - open_end - 1);
        }
    }
    throw ValidationError("prompt has no fenced input section");
}

std::string rule_based_strip(const std::string& body) {
    static const std::regex url_re(R"((https?://|www\.)[^\s]+)", std::regex::icase);
    static const std::regex email_re(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})");
    static const std::regex boilerplate_re(
        R"(copyright|all rights reserved|subscribe|newsletter|cookie|privacy policy|terms of (use|service)|follow us)",
        std::regex::icase);

    std::istringstream is(body);
    std::string line;
    std::ostringstream kept;
    while (std::getline(is, line)) {
        if (std::regex_search(line, boilerplate_re)) continue;
        line = std::regex_replace(line, url_re, "");
        line = std::regex_replace(line, email_re, "");
        kept << line << '\n';
    }
    // Collapse whitespace runs and trim.
    std::string flat = kept.str();
    std::string out;
    out.reserve(flat.size());
    bool in_space = true;  // also trims leading whitespace
    for (char c : flat) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(c);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

DenoisedCti denoise(const RawCti& raw, LlmClient* client, std::string* warning) {
    DenoisedCti out;
    out.id = raw.id;
    if (client) {
        auto completion = client->complete(
            "You distill noisy CTI reports into concise attack narratives.",
            build_cot_prompt(raw));
        if (completion && !completion->empty()) {
            out.body = *completion;
            out.narrative = *completion;
            return out;
        }
        if (warning) *warning = "llm denoise failed for " + raw.id + "; using rule-based fallback";
    }
    out.body = rule_based_strip(raw.body);
    if (out.body.empty()) out.body = raw.body;  // stripping must never erase a report
    return out;
}

struct FilterRules::Impl {
    std::vector<std::regex> ioc;
    std::vector<std::regex> ttp;
};

static std::regex compile_pattern(const std::string& pat) {
    try {
        return std::regex(pat, std::regex::icase);
    } catch (const std::regex_error& e) {
        throw ValidationError("invalid filter pattern '" + pat + "': " + e.what());
    }
}

FilterRules FilterRules::from_lines(const std::vector<std::string>& lines) {
    auto impl = std::make_shared<Impl>();
    for (const auto& raw_line : lines) {
        std::string line = raw_line;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("ioc:", 0) == 0)
            impl->ioc.push_back(compile_pattern(line.substr(4)));
        else if (line.rfind("ttp:", 0) == 0)
            impl->ttp.push_back(compile_pattern(line.substr(4)));
        else
            throw ValidationError("pattern line must start with 'ioc:' or 'ttp:': " + line);
    }
    if (impl->ioc.empty() || impl->ttp.empty())
        throw ValidationError("filter rules need at least one ioc: and one ttp: pattern");
    FilterRules r;
    r.impl_ = std::move(impl);
    return r;
}

FilterRules FilterRules::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open pattern file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return from_lines(lines);
}

FilterRules FilterRules::defaults() {
    // Approximations of the published filter classes, not reproductions.
    return from_lines({
        R"(ioc:\b(?:\d{1,3}\.){3}\d{1,3}\b)",           // IPv4
        R"(ioc:\b[0-9a-f]{64}\b)",                      // SHA-256
        R"(ioc:\b[0-9a-f]{32}\b)",                      // MD5
        R"(ioc:\bHKEY_[A-Z_]+\\)",                      // registry path
        R"(ioc:\b[\w.-]+\.(exe|dll|ps1|bat|sh|bin)\b)", // executable / payload names
        "ttp:phishing",
        "ttp:living[- ]off[- ]the[- ]land",
        "ttp:backdoor",
        "ttp:lateral movement",
        "ttp:exfiltrat",
        "ttp:privilege escalation",
        "ttp:persistence",
        "ttp:command[- ]and[- ]control|\\bC2\\b",
    });
}

bool FilterRules::matches(const std::string& body) const {
    auto any = [&](const std::vector<std::regex>& res) {
        for (const auto& re : res)
            if (std::regex_search(body, re)) return true;
        return false;
    };
    return any(impl_->ioc) && any(impl_->ttp);
}

size_t FilterRules::ioc_count() const { return impl_->ioc.size(); }
size_t FilterRules::ttp_count() const { return impl_->ttp.size(); }

std::vector<RawCti> filter_corpus(const std::vector<RawCti>& raws, const FilterRules& rules) {
    std::vector<RawCti> out;
    for (const auto& r : raws)
        if (rules.matches(r.body)) out.push_back(r);
    return out;
}

}  // namespace cglp
