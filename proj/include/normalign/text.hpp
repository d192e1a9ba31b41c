#pragma once

// Small UTF-8 aware text helpers. Case folding covers ASCII and Latin-1,
// which is what the shipped Danish and English lexicons need.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace normalign::text {

/// Decodes UTF-8 into code points; invalid bytes decode as U+FFFD.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);

bool is_word_char(char32_t c);

std::string to_lower(std::string_view text);

/// Upper-cases the first code point.
std::string capitalize_first(std::string_view text);
bool starts_upper(std::string_view text);

std::string trim(std::string_view text);
std::string collapse_whitespace(std::string_view text);

/// Lower-cased, whitespace-collapsed, trailing ".!?;:," removed. Used to
/// compare solution texts and to key caches.
std::string normalize_for_compare(std::string_view text);

/// Alphanumeric runs. Digit runs joined by a single '.' or ',' between
/// digits ("12,50", "3.5") stay one token; all other punctuation separates.
std::vector<std::string> word_tokens(std::string_view text);

/// Whitespace-separated pieces with their byte offsets.
struct Piece {
  std::string text;
  std::size_t begin;
  std::size_t end;
};
std::vector<Piece> whitespace_pieces(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view separator);

/// Non-empty lines with '#' comments removed and surrounding space trimmed.
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::vector<std::string> split_lines(std::string_view content);

}  // namespace normalign::text
