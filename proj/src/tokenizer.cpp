#include "chorus/tokenizer.hpp"

#include <cctype>

namespace chorus {

bool is_word_byte(unsigned char c) noexcept
{
    return c >= 0x80 || std::isalnum(c) || c == '_';
}

namespace {

bool is_space_byte(unsigned char c) noexcept
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

template <class Sink>
void scan_tokens(std::string_view text, Sink&& sink)
{
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_space_byte(c)) {
            ++i;
            continue;
        }
        const bool word = is_word_byte(c);
        std::size_t j = i + 1;
        while (j < n) {
            const auto d = static_cast<unsigned char>(text[j]);
            if (is_space_byte(d) || is_word_byte(d) != word) break;
            ++j;
        }
        sink(text.substr(i, j - i), word);
        i = j;
    }
}

} // namespace

std::vector<std::string_view> tokenize(std::string_view text)
{
    std::vector<std::string_view> out;
    scan_tokens(text, [&](std::string_view tok, bool) { out.push_back(tok); });
    return out;
}

std::size_t count_tokens(std::string_view text)
{
    std::size_t n = 0;
    scan_tokens(text, [&](std::string_view, bool) { ++n; });
    return n;
}

std::vector<std::string> word_terms(std::string_view text)
{
    std::vector<std::string> out;
    scan_tokens(text, [&](std::string_view tok, bool word) {
        if (!word) return;
        std::string term(tok);
        for (auto& ch : term) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        out.push_back(std::move(term));
    });
    return out;
}

} // namespace chorus
