#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace termrel {

/// Canonical surface form: ASCII-lowercased, trimmed, inner whitespace runs
/// collapsed to single spaces. Hyphens are preserved.
std::string normalize_surface(std::string_view s);

/// Lowercase and split on every character outside [a-z0-9-]. Tokens that
/// contain no letter or digit (bare punctuation hyphens) are dropped.
/// tokenize(normalize_surface(s)) == tokenize(s) for all s; the index and
/// the graph rely on that.
std::vector<std::string> tokenize(std::string_view s);

}  // namespace termrel
