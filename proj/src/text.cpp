#include "mufu/text.hpp"

#include "mufu/error.hpp"

#include <boost/locale.hpp>

#include <locale>

namespace mufu::text {

bool is_space(char32_t c) {
    switch (c) {
        case U'\t': case U'\n': case U'\v': case U'\f': case U'\r': case U' ':
        case 0x0085: case 0x00A0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

namespace {

// Decodes one code point at offset i, advancing i. Returns false on malformed
// input with i left at the offending byte.
bool next_code_point(std::string_view s, std::size_t& i, char32_t& out) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len;
    char32_t cp;
    if (b0 < 0x80) {
        out = b0;
        ++i;
        return true;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t j = 1; j < len; ++j) {
        const auto b = static_cast<unsigned char>(s[i + j]);
        if ((b & 0xC0) != 0x80) return false;
        cp = (cp << 6) | (b & 0x3F);
    }
    // reject overlong forms, surrogates and out-of-range values
    if (len == 2 && cp < 0x80) return false;
    if (len == 3 && cp < 0x800) return false;
    if (len == 4 && cp < 0x10000) return false;
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    out = cp;
    i += len;
    return true;
}

} // namespace

bool validate_utf8(std::string_view s, std::size_t* bad_offset) {
    std::size_t i = 0;
    char32_t cp;
    while (i < s.size()) {
        const std::size_t at = i;
        if (!next_code_point(s, i, cp)) {
            if (bad_offset) *bad_offset = at;
            return false;
        }
    }
    return true;
}

std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    char32_t cp;
    while (i < s.size()) {
        const std::size_t at = i;
        if (!next_code_point(s, i, cp)) {
            throw ParseError("invalid UTF-8 byte at offset " + std::to_string(at));
        }
        out.push_back(cp);
    }
    return out;
}

std::string encode_utf8(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) {
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
    return out;
}

std::string trim(std::string_view s) {
    const std::u32string u = decode_utf8(s);
    std::size_t b = 0, e = u.size();
    while (b < e && is_space(u[b])) ++b;
    while (e > b && is_space(u[e - 1])) --e;
    return encode_utf8(std::u32string_view(u).substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
    const std::u32string u = decode_utf8(s);
    std::u32string out;
    out.reserve(u.size());
    bool pending_space = false;
    for (char32_t c : u) {
        if (is_space(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(U' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return encode_utf8(out);
}

std::string strip_all_whitespace(std::string_view s) {
    const std::u32string u = decode_utf8(s);
    std::u32string out;
    out.reserve(u.size());
    for (char32_t c : u) {
        if (!is_space(c)) out.push_back(c);
    }
    return encode_utf8(out);
}

std::string nfc(const std::string& s) {
    static const std::locale loc = boost::locale::generator()("en_US.UTF-8");
    return boost::locale::normalize(s, boost::locale::norm_nfc, loc);
}

std::string normalize_for_match(const std::string& s) {
    return collapse_whitespace(nfc(s));
}

} // namespace mufu::text
