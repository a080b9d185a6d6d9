#include "termrel/text.hpp"

#include <cctype>

namespace termrel {

namespace {
inline char lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}
inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}
inline bool is_token_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
}
}  // namespace

std::string normalize_surface(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char raw : s) {
    char c = lower(raw);
    if (is_space(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    for (char c : cur) {
      if (c != '-') {  // keep only tokens with at least one letter/digit
        tokens.push_back(cur);
        break;
      }
    }
    cur.clear();
  };
  for (char raw : s) {
    char c = lower(raw);
    if (is_token_char(c)) {
      cur.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

}  // namespace termrel
