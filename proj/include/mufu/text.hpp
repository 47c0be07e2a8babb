#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mufu::text {

// Unicode whitespace (the set used for stripping, collapsing and tokenizing).
bool is_space(char32_t c);

// Strict UTF-8 validation/decoding. Decoding throws ParseError at the first
// invalid byte; validate_utf8 reports its offset instead.
bool validate_utf8(std::string_view s, std::size_t* bad_offset = nullptr);
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

std::string trim(std::string_view s);
// trim + collapse internal whitespace runs to a single U+0020
std::string collapse_whitespace(std::string_view s);
// remove every whitespace code point
std::string strip_all_whitespace(std::string_view s);

// Unicode canonical composition (NFC).
std::string nfc(const std::string& s);

// The pinned equality key for sentence-set membership: NFC, collapse internal
// whitespace runs to one space, trim.
std::string normalize_for_match(const std::string& s);

} // namespace mufu::text
