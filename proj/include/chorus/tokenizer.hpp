#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace chorus {

/// Splits on whitespace; inside a whitespace-delimited run, word characters
/// (ASCII alphanumerics, '_' and any byte of a multi-byte UTF-8 sequence) form
/// one token and each maximal run of ASCII punctuation forms another.
///
///   "x + y <= 4"    -> x, +, y, <=, 4
///   "solve_lp():"   -> solve_lp, ():
std::vector<std::string_view> tokenize(std::string_view text);

std::size_t count_tokens(std::string_view text);

/// Lower-cased word tokens only (punctuation runs dropped).
std::vector<std::string> word_terms(std::string_view text);

bool is_word_byte(unsigned char c) noexcept;

} // namespace chorus
