#include "qdacode/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <stdexcept>

namespace qdacode::text {

namespace {

bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }

bool is_strippable(UChar32 c) {
  // Grave and acute accents show up as stand-in quotes in model output.
  return is_space(c) || u_ispunct(c) || c == U'`' || c == U'´';
}

icu::UnicodeString nfkc_casefold(const icu::UnicodeString& in) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFKCCasefoldInstance(status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("ICU NFKC_Casefold normalizer unavailable");
  }
  icu::UnicodeString out = norm->normalize(in, status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("ICU normalization failed");
  }
  return out;
}

icu::UnicodeString fold_once(const icu::UnicodeString& in) {
  const icu::UnicodeString norm = nfkc_casefold(in);

  std::vector<UChar32> cps;
  cps.reserve(static_cast<std::size_t>(norm.length()));
  bool pending_space = false;
  for (int32_t i = 0; i < norm.length();) {
    const UChar32 c = norm.char32At(i);
    i += U16_LENGTH(c);
    if (is_space(c)) {
      pending_space = !cps.empty();
      continue;
    }
    if (pending_space) {
      cps.push_back(U' ');
      pending_space = false;
    }
    cps.push_back(c);
  }

  auto first = std::find_if_not(cps.begin(), cps.end(), is_strippable);
  auto last = std::find_if_not(cps.rbegin(), std::make_reverse_iterator(first), is_strippable).base();

  icu::UnicodeString out;
  for (auto it = first; it != last; ++it) {
    out.append(*it);
  }
  return out;
}

}  // namespace

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string fold_label(std::string_view raw) {
  icu::UnicodeString cur = icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  // Stripping can expose a sequence that normalizes differently; iterate to
  // a fixed point so the function is idempotent.
  for (int i = 0; i < 8; ++i) {
    icu::UnicodeString next = fold_once(cur);
    if (next == cur) {
      break;
    }
    cur = std::move(next);
  }
  std::string out;
  cur.toUTF8String(out);
  return out;
}

bool is_single_token(std::string_view s) {
  const icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  for (int32_t i = 0; i < u.length();) {
    const UChar32 c = u.char32At(i);
    if (is_space(c)) {
      return false;
    }
    i += U16_LENGTH(c);
  }
  return !s.empty();
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(s.substr(start));
      return parts;
    }
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default:
        out += '\\';
        out += s[i];
    }
  }
  return out;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) {
    return 0;
  }
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace qdacode::text
