#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cglp/errors.hpp"

namespace cglp {

// Whitespace word tokenizer with a corpus-built vocabulary. Special ids are
// fixed: [CLS]=0, [MASK]=1, [PAD]=2, [UNK]=3. Encoding then decoding
// in-vocabulary text round-trips up to whitespace normalization and case.
class Tokenizer {
public:
    static constexpr int kCls = 0;
    static constexpr int kMask = 1;
    static constexpr int kPad = 2;
    static constexpr int kUnk = 3;
    static constexpr int kSpecialCount = 4;

    Tokenizer() = default;

    static Tokenizer build(const std::vector<std::string>& corpus, size_t max_len = 256);

    // Lowercased whitespace-delimited words.
    static std::vector<std::string> split(const std::string& text);

    // Leading [CLS], truncation to max_len. Never fails; OOV maps to [UNK].
    std::vector<int> encode(const std::string& text) const;

    // encode() each text, then right-pad with [PAD] to the longest.
    std::vector<std::vector<int>> encode_batch(const std::vector<std::string>& texts) const;

    // Specials are skipped; words joined by single spaces.
    std::string decode(const std::vector<int>& ids) const;

    const std::string& token(int id) const;
    size_t vocab_size() const { return vocab_.size(); }
    size_t max_len() const { return max_len_; }
    static bool is_special(int id) { return id >= 0 && id < kSpecialCount; }

    uint64_t digest() const;

    void save(const std::string& path) const;
    static Tokenizer load(const std::string& path);

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> ids_;
    size_t max_len_ = 256;
};

}  // namespace cglp
