#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tabllm/unicode_tables.hpp"

namespace tabllm::unicode {

namespace detail {
template <size_t N>
inline bool in_ranges(const CodepointRange (&ranges)[N], uint32_t cp) {
    size_t lo = 0, hi = N;
    while (lo < hi) {
        size_t mid = (lo + hi) / 2;
        if (cp < ranges[mid].first) hi = mid;
        else if (cp > ranges[mid].last) lo = mid + 1;
        else return true;
    }
    return false;
}
}  // namespace detail

inline bool is_letter(uint32_t cp) { return detail::in_ranges(kLetterRanges, cp); }
inline bool is_number(uint32_t cp) { return detail::in_ranges(kNumberRanges, cp); }
inline bool is_whitespace(uint32_t cp) { return detail::in_ranges(kWhitespaceRanges, cp); }

// Decodes UTF-8 into codepoints. Invalid bytes are passed through as their
// byte values; the byte-level encoder downstream works on raw bytes, so this
// only affects pre-token boundaries of malformed input.
inline std::vector<uint32_t> decode_utf8(std::string_view text) {
    std::vector<uint32_t> cps;
    cps.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        uint8_t b0 = static_cast<uint8_t>(text[i]);
        uint32_t cp = b0;
        size_t len = 1;
        if (b0 >= 0xF0) len = 4;
        else if (b0 >= 0xE0) len = 3;
        else if (b0 >= 0xC0) len = 2;
        if (len > 1 && i + len <= text.size()) {
            uint32_t acc = b0 & (0x7F >> len);
            bool ok = true;
            for (size_t k = 1; k < len; ++k) {
                uint8_t bk = static_cast<uint8_t>(text[i + k]);
                if ((bk & 0xC0) != 0x80) { ok = false; break; }
                acc = (acc << 6) | (bk & 0x3F);
            }
            if (ok) {
                cp = acc;
            } else {
                len = 1;
            }
        } else if (len > 1) {
            len = 1;
        }
        cps.push_back(cp);
        i += len;
    }
    return cps;
}

inline void append_utf8(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

inline std::string encode_utf8(uint32_t cp) {
    std::string s;
    append_utf8(s, cp);
    return s;
}

}  // namespace tabllm::unicode
