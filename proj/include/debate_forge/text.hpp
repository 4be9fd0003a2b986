#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace debate_forge {

using Token = std::string;
using Tokens = std::vector<Token>;

namespace utf8 {

// Decodes one code point starting at `pos`; advances `pos`. Returns nullopt on
// malformed input (overlong forms, surrogates and values past U+10FFFF included).
inline std::optional<char32_t> decode(std::string_view s, std::size_t& pos) {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    const unsigned char lead = byte(pos);
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if (lead < 0x80) {
        ++pos;
        return lead;
    } else if ((lead & 0xE0) == 0xC0) {
        len = 2, cp = lead & 0x1F, min = 0x80;
    } else if ((lead & 0xF0) == 0xE0) {
        len = 3, cp = lead & 0x0F, min = 0x800;
    } else if ((lead & 0xF8) == 0xF0) {
        len = 4, cp = lead & 0x07, min = 0x10000;
    } else {
        return std::nullopt;
    }
    if (pos + len > s.size()) return std::nullopt;
    for (std::size_t i = 1; i < len; ++i) {
        const unsigned char c = byte(pos + i);
        if ((c & 0xC0) != 0x80) return std::nullopt;
        cp = (cp << 6) | (c & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
    pos += len;
    return cp;
}

inline bool valid(std::string_view s) {
    std::size_t pos = 0;
    while (pos < s.size()) {
        if (!decode(s, pos)) return false;
    }
    return true;
}

inline void append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

}  // namespace utf8

namespace chars {

inline bool is_space(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f' ||
           c == 0x00A0 || (c >= 0x2000 && c <= 0x200B) || c == 0x202F || c == 0x205F ||
           c == 0x3000 || c == 0xFEFF;
}

inline bool is_punct(char32_t c) {
    if (c < 0x80) {
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
               (c >= 0x7B && c <= 0x7E);
    }
    if (c >= 0x00A1 && c <= 0x00BF) {
        // Latin-1 symbols, minus the letter-like and digit-like ones.
        return c != 0x00AA && c != 0x00B2 && c != 0x00B3 && c != 0x00B5 && c != 0x00B9 &&
               c != 0x00BA && !(c >= 0x00BC && c <= 0x00BE);
    }
    if (c == 0x00D7 || c == 0x00F7) return true;
    if (c >= 0x2010 && c <= 0x2027) return true;
    if (c >= 0x2030 && c <= 0x205E) return true;
    if ((c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011)) return true;
    return false;
}

inline bool is_upper(char32_t c) {
    return (c >= U'A' && c <= U'Z') || (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) ||
           (c >= 0x0391 && c <= 0x03A9 && c != 0x03A2) || (c >= 0x0400 && c <= 0x042F);
}

inline char32_t to_lower(char32_t c) {
    if (c >= U'A' && c <= U'Z') return c + 0x20;
    if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) return c + 0x20;
    if (c >= 0x0391 && c <= 0x03A9 && c != 0x03A2) return c + 0x20;
    if (c >= 0x0410 && c <= 0x042F) return c + 0x20;
    if (c >= 0x0400 && c <= 0x040F) return c + 0x50;
    return c;
}

}  // namespace chars

// Lowercases a valid UTF-8 string. Invalid bytes pass through untouched.
inline std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    while (pos < s.size()) {
        const std::size_t start = pos;
        if (auto cp = utf8::decode(s, pos)) {
            utf8::append(out, chars::to_lower(*cp));
        } else {
            out.push_back(s[start]);
            pos = start + 1;
        }
    }
    return out;
}

inline bool starts_with_upper(std::string_view s) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    auto cp = utf8::decode(s, pos);
    return cp && chars::is_upper(*cp);
}

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\v\f";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

struct TokenizerConfig {
    bool lowercase = true;
    bool punctuation_is_token = true;
};

// Whitespace split; each punctuation code point becomes its own token when
// configured. Input is expected to be valid UTF-8; stray bytes are kept as
// word characters.
inline Tokens tokenize(std::string_view text, const TokenizerConfig& cfg = {}) {
    Tokens out;
    std::string word;
    const auto flush = [&] {
        if (word.empty()) return;
        out.push_back(cfg.lowercase ? to_lower(word) : word);
        word.clear();
    };
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t start = pos;
        auto cp = utf8::decode(text, pos);
        if (!cp) {
            pos = start + 1;
            word.push_back(text[start]);
            continue;
        }
        if (chars::is_space(*cp)) {
            flush();
        } else if (cfg.punctuation_is_token && chars::is_punct(*cp)) {
            flush();
            out.emplace_back(text.substr(start, pos - start));
        } else {
            word.append(text.substr(start, pos - start));
        }
    }
    flush();
    return out;
}

inline std::string join(const Tokens& tokens, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.append(sep);
        out.append(tokens[i]);
    }
    return out;
}

}  // namespace debate_forge
