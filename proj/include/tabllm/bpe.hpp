#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabllm/error.hpp"
#include "tabllm/unicode.hpp"

namespace tabllm {

using TokenId = int32_t;

// Fixed-length model input: right-padded ids plus a prefix-of-ones mask.
struct TokenSequence {
    std::vector<TokenId> ids;
    std::vector<uint8_t> attention_mask;
    size_t true_length = 0;
};

inline constexpr size_t kMaxContextLength = 1024;

class BpeVocabulary {
public:
    std::unordered_map<std::string, TokenId> token_to_id;
    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, int> merge_ranks;  // key "A B", value = priority
    TokenId end_of_text = 0;
    TokenId pad = 0;

    size_t size() const { return id_to_token.size(); }

    // GPT-2's byte-to-unicode bijection: printable bytes map to themselves,
    // the rest are shifted into the 0x100+ plane.
    static const std::vector<uint32_t>& byte_encoder() {
        static const std::vector<uint32_t> table = [] {
            std::vector<uint32_t> t(256, 0);
            std::vector<bool> direct(256, false);
            for (int b = '!'; b <= '~'; ++b) direct[b] = true;
            for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
            for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
            uint32_t next = 256;
            for (int b = 0; b < 256; ++b)
                t[b] = direct[b] ? static_cast<uint32_t>(b) : next++;
            return t;
        }();
        return table;
    }

    static const std::unordered_map<uint32_t, uint8_t>& byte_decoder() {
        static const std::unordered_map<uint32_t, uint8_t> table = [] {
            std::unordered_map<uint32_t, uint8_t> t;
            const auto& enc = byte_encoder();
            for (int b = 0; b < 256; ++b) t[enc[b]] = static_cast<uint8_t>(b);
            return t;
        }();
        return table;
    }
};

inline BpeVocabulary load_bpe(const std::string& vocab_path, const std::string& merges_path) {
    BpeVocabulary vocab;

    std::ifstream vin(vocab_path);
    if (!vin) fail(errc::io_failure, "cannot open " + vocab_path);
    nlohmann::json j;
    try {
        vin >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::malformed_vocab, e.what());
    }
    if (!j.is_object() || j.empty()) fail(errc::malformed_vocab, "vocab must be a non-empty JSON object");
    TokenId max_id = -1;
    for (const auto& [token, idj] : j.items()) {
        if (!idj.is_number_integer()) fail(errc::malformed_vocab, "non-integer id for '" + token + "'");
        TokenId id = idj.get<TokenId>();
        if (id < 0) fail(errc::malformed_vocab, "negative id for '" + token + "'");
        if (id > max_id) max_id = id;
    }
    vocab.id_to_token.assign(static_cast<size_t>(max_id) + 1, {});
    for (const auto& [token, idj] : j.items()) {
        TokenId id = idj.get<TokenId>();
        if (!vocab.id_to_token[id].empty() && vocab.id_to_token[id] != token)
            fail(errc::malformed_vocab, "duplicate id " + std::to_string(id));
        vocab.id_to_token[id] = token;
        vocab.token_to_id[token] = id;
    }
    if (vocab.token_to_id.size() != vocab.id_to_token.size())
        fail(errc::malformed_vocab, "vocab ids are not contiguous from 0");

    std::ifstream min(merges_path);
    if (!min) fail(errc::io_failure, "cannot open " + merges_path);
    std::string line;
    int rank = 0;
    bool first = true;
    while (std::getline(min, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first && line.rfind("#version", 0) == 0) { first = false; continue; }
        first = false;
        if (line.empty()) continue;
        size_t sp = line.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size() ||
            line.find(' ', sp + 1) != std::string::npos)
            fail(errc::malformed_merges, "bad merge line: '" + line + "'");
        std::string a = line.substr(0, sp), b = line.substr(sp + 1);
        if (!vocab.token_to_id.count(a + b))
            fail(errc::inconsistent_assets, "merge product '" + a + b + "' missing from vocab");
        vocab.merge_ranks.emplace(line, rank++);
    }

    auto eot = vocab.token_to_id.find("<|endoftext|>");
    vocab.end_of_text = eot != vocab.token_to_id.end() ? eot->second : 0;
    vocab.pad = vocab.end_of_text;  // GPT-2 has no pad token; alias to end-of-text
    return vocab;
}

namespace detail {

// GPT-2 pre-tokenizer, equivalent to the reference pattern
//   's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
// evaluated over codepoints with Unicode letter/number/whitespace classes.
inline std::vector<std::string> pre_tokenize(std::string_view text) {
    using namespace unicode;
    std::vector<uint32_t> cps = decode_utf8(text);
    std::vector<std::string> out;
    const size_t n = cps.size();
    size_t i = 0;

    auto emit = [&](size_t begin, size_t end) {
        std::string tok;
        for (size_t k = begin; k < end; ++k) append_utf8(tok, cps[k]);
        out.push_back(std::move(tok));
    };

    static const char* contractions[] = {"'s", "'t", "'re", "'ve", "'m", "'ll", "'d"};

    while (i < n) {
        // contractions
        if (cps[i] == '\'') {
            size_t matched = 0;
            for (const char* c : contractions) {
                size_t len = std::char_traits<char>::length(c);
                if (i + len <= n) {
                    bool ok = true;
                    for (size_t k = 0; k < len; ++k)
                        if (cps[i + k] != static_cast<uint32_t>(c[k])) { ok = false; break; }
                    if (ok && len > matched) matched = len;
                }
            }
            // alternation order: 's and 't before 're etc., all length<=3 and
            // mutually prefix-free after the apostrophe, so longest match works
            if (matched) {
                emit(i, i + matched);
                i += matched;
                continue;
            }
        }
        size_t j = i;
        if (cps[j] == ' ' && j + 1 < n &&
            (is_letter(cps[j + 1]) || is_number(cps[j + 1]) ||
             (!is_whitespace(cps[j + 1]) && cps[j + 1] != ' ')))
            ++j;  // optional leading space
        if (j < n && is_letter(cps[j])) {
            size_t e = j;
            while (e < n && is_letter(cps[e])) ++e;
            emit(i, e);
            i = e;
            continue;
        }
        if (j < n && is_number(cps[j])) {
            size_t e = j;
            while (e < n && is_number(cps[e])) ++e;
            emit(i, e);
            i = e;
            continue;
        }
        if (j < n && !is_whitespace(cps[j]) && !is_letter(cps[j]) && !is_number(cps[j])) {
            size_t e = j;
            while (e < n && !is_whitespace(cps[e]) && !is_letter(cps[e]) && !is_number(cps[e])) ++e;
            emit(i, e);
            i = e;
            continue;
        }
        // whitespace run: \s+(?!\S) leaves the last whitespace char to prefix
        // the following token when a non-space follows
        size_t e = i;
        while (e < n && is_whitespace(cps[e])) ++e;
        if (e < n && e - i > 1) --e;
        if (e == i) ++e;  // lone non-space, non-class codepoint; consume it
        emit(i, e);
        i = e;
    }
    return out;
}

struct PairHash {
    size_t operator()(const std::pair<std::string, std::string>& p) const {
        return std::hash<std::string>()(p.first) * 1000003 ^ std::hash<std::string>()(p.second);
    }
};

// Greedy lowest-rank merge loop over one byte-encoded pre-token.
inline std::vector<std::string> apply_merges(const std::string& token, const BpeVocabulary& vocab) {
    std::vector<std::string> word;
    for (uint32_t cp : unicode::decode_utf8(token)) word.push_back(unicode::encode_utf8(cp));
    if (word.size() <= 1) return word;

    auto rank_of = [&](const std::string& a, const std::string& b) {
        auto it = vocab.merge_ranks.find(a + ' ' + b);
        return it == vocab.merge_ranks.end() ? std::numeric_limits<int>::max() : it->second;
    };

    while (word.size() > 1) {
        int best_rank = std::numeric_limits<int>::max();
        size_t best_pos = 0;
        for (size_t k = 0; k + 1 < word.size(); ++k) {
            int r = rank_of(word[k], word[k + 1]);
            if (r < best_rank) {
                best_rank = r;
                best_pos = k;
            }
        }
        if (best_rank == std::numeric_limits<int>::max()) break;
        const std::string merged = word[best_pos] + word[best_pos + 1];
        std::vector<std::string> next;
        next.reserve(word.size() - 1);
        // merge every occurrence of the winning pair in one pass
        for (size_t k = 0; k < word.size();) {
            if (k + 1 < word.size() && word[k] == word[best_pos] && word[k + 1] == word[best_pos + 1]) {
                next.push_back(merged);
                k += 2;
            } else {
                next.push_back(word[k]);
                ++k;
            }
        }
        word = std::move(next);
    }
    return word;
}

}  // namespace detail

inline std::vector<TokenId> encode(std::string_view text, const BpeVocabulary& vocab) {
    // per-thread memoization of pre-token -> ids; pure function of the assets
    thread_local std::unordered_map<std::string, std::vector<TokenId>> cache;
    thread_local const BpeVocabulary* cache_owner = nullptr;
    thread_local size_t cache_owner_size = 0;
    if (cache_owner != &vocab || cache_owner_size != vocab.size()) {
        cache.clear();
        cache_owner = &vocab;
        cache_owner_size = vocab.size();
    }

    std::vector<TokenId> ids;
    const auto& byte_enc = BpeVocabulary::byte_encoder();
    for (const std::string& pre : detail::pre_tokenize(text)) {
        auto hit = cache.find(pre);
        if (hit != cache.end()) {
            ids.insert(ids.end(), hit->second.begin(), hit->second.end());
            continue;
        }
        std::string mapped;
        for (unsigned char b : pre) unicode::append_utf8(mapped, byte_enc[b]);
        std::vector<TokenId> piece_ids;
        for (const std::string& sym : detail::apply_merges(mapped, vocab)) {
            auto it = vocab.token_to_id.find(sym);
            if (it == vocab.token_to_id.end())
                fail(errc::inconsistent_assets, "symbol '" + sym + "' missing from vocab");
            piece_ids.push_back(it->second);
        }
        ids.insert(ids.end(), piece_ids.begin(), piece_ids.end());
        if (cache.size() < 1 << 20) cache.emplace(pre, std::move(piece_ids));
    }
    return ids;
}

inline std::string decode(const std::vector<TokenId>& ids, const BpeVocabulary& vocab) {
    const auto& byte_dec = BpeVocabulary::byte_decoder();
    std::string bytes;
    for (TokenId id : ids) {
        if (id < 0 || static_cast<size_t>(id) >= vocab.size())
            fail(errc::unknown_id, "token id " + std::to_string(id) + " out of range");
        for (uint32_t cp : unicode::decode_utf8(vocab.id_to_token[id])) {
            auto it = byte_dec.find(cp);
            if (it != byte_dec.end()) bytes += static_cast<char>(it->second);
            else unicode::append_utf8(bytes, cp);
        }
    }
    return bytes;
}

inline size_t count_tokens(std::string_view text, const BpeVocabulary& vocab) {
    return encode(text, vocab).size();
}

inline TokenSequence pad_or_truncate(const std::vector<TokenId>& ids, size_t target_length,
                                     const BpeVocabulary& vocab) {
    if (target_length < 1 || target_length > kMaxContextLength)
        fail(errc::bad_length, "target_length must be in [1, 1024]");
    TokenSequence seq;
    seq.true_length = std::min(ids.size(), target_length);
    seq.ids.assign(ids.begin(), ids.begin() + seq.true_length);  // head-keep truncation
    seq.ids.resize(target_length, vocab.pad);
    seq.attention_mask.assign(target_length, 0);
    for (size_t i = 0; i < seq.true_length; ++i) seq.attention_mask[i] = 1;
    return seq;
}

}  // namespace tabllm
