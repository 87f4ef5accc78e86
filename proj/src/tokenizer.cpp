#include "cglp/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <json.hpp>

#include "cglp/provenance.hpp"  // fnv1a64

namespace cglp {

static const char* kSpecialNames[Tokenizer::kSpecialCount] = {"[CLS]", "[MASK]", "[PAD]",
                                                              "[UNK]"};

std::vector<std::string> Tokenizer::split(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus, size_t max_len) {
    if (max_len < 2) throw ValidationError("max_len must be at least 2");
    std::set<std::string> words;
    for (const auto& text : corpus)
        for (auto& w : split(text)) words.insert(std::move(w));
    Tokenizer t;
    t.max_len_ = max_len;
    t.vocab_.assign(kSpecialNames, kSpecialNames + kSpecialCount);
    for (const auto& w : words) t.vocab_.push_back(w);
    for (size_t i = 0; i < t.vocab_.size(); ++i) t.ids_[t.vocab_[i]] = static_cast<int>(i);
    return t;
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
    std::vector<int> out{kCls};
    for (const auto& w : split(text)) {
        if (out.size() >= max_len_) break;
        auto it = ids_.find(w);
        out.push_back(it == ids_.end() ? kUnk : it->second);
    }
    return out;
}

std::vector<std::vector<int>> Tokenizer::encode_batch(const std::vector<std::string>& texts) const {
    std::vector<std::vector<int>> out;
    size_t longest = 0;
    for (const auto& t : texts) {
        out.push_back(encode(t));
        longest = std::max(longest, out.back().size());
    }
    for (auto& ids : out) ids.resize(longest, kPad);
    return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (is_special(id)) continue;
        if (id < 0 || static_cast<size_t>(id) >= vocab_.size())
            throw ValidationError("token id out of range: " + std::to_string(id));
        if (!out.empty()) out += ' ';
        out += vocab_[id];
    }
    return out;
}

const std::string& Tokenizer::token(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= vocab_.size())
        throw ValidationError("token id out of range: " + std::to_string(id));
    return vocab_[id];
}

uint64_t Tokenizer::digest() const {
    std::string joined;
    for (const auto& w : vocab_) {
        joined += w;
        joined += '\n';
    }
    joined += std::to_string(max_len_);
    return fnv1a64(joined);
}

void Tokenizer::save(const std::string& path) const {
    nlohmann::json j;
    j["max_len"] = max_len_;
    j["vocab"] = std::vector<std::string>(vocab_.begin() + kSpecialCount, vocab_.end());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write tokenizer file: " + path);
    out << j.dump();
}

Tokenizer Tokenizer::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open tokenizer file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad tokenizer file: ") + e.what());
    }
    Tokenizer t;
    t.max_len_ = j.at("max_len").get<size_t>();
    t.vocab_.assign(kSpecialNames, kSpecialNames + kSpecialCount);
    for (const auto& w : j.at("vocab")) t.vocab_.push_back(w.get<std::string>());
    for (size_t i = 0; i < t.vocab_.size(); ++i) t.ids_[t.vocab_[i]] = static_cast<int>(i);
    return t;
}

}  // namespace cglp
