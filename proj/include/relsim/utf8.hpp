#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace relsim::utf8 {

bool is_valid(std::string_view text) noexcept;

struct Decoded {
    char32_t code_point;
    std::size_t length;  // bytes consumed
};

/// Decodes one code point at byte offset pos. Returns nullopt on malformed input.
std::optional<Decoded> decode_at(std::string_view text, std::size_t pos) noexcept;

void append(std::string& out, char32_t code_point);

/// Simple case fold covering ASCII, Latin-1, Greek and Cyrillic capitals.
char32_t fold_case(char32_t c) noexcept;

/// Letters, digits, underscore and non-punctuation code points outside ASCII.
bool is_word_char(char32_t c) noexcept;

bool is_space(char32_t c) noexcept;

}  // namespace relsim::utf8
