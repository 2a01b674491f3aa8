#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qdacode::text {

std::string trim(std::string_view s);

/// Unicode NFKC with case folding, then trimming, stripping of leading and
/// trailing punctuation/quote characters and collapsing of inner whitespace
/// runs to one ASCII space. Idempotent.
std::string fold_label(std::string_view raw);

/// True when `s` has no whitespace code points.
bool is_single_token(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

/// Backslash escaping used by the tab-separated file formats: `\t`, `\n`,
/// `\r` and `\\`.
std::string escape_field(std::string_view s);
std::string unescape_field(std::string_view s);

/// Number of non-overlapping occurrences of `needle` in `haystack`.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

}  // namespace qdacode::text
