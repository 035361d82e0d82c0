#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seje {

using Tokens = std::vector<std::string>;

// Lowercase ASCII and split on every non-alphanumeric byte.
Tokens tokenize(std::string_view text);

std::string join(std::span<const std::string> tokens, std::string_view sep);

// "red_wine" -> {"red", "wine"}
Tokens split_underscore(std::string_view surface);

// Index of the first occurrence of `needle` as a contiguous run in `hay`,
// or npos.
std::size_t find_sequence(std::span<const std::string> hay, std::span<const std::string> needle);

inline bool contains_sequence(std::span<const std::string> hay, std::span<const std::string> needle) {
  return find_sequence(hay, needle) != std::string::npos;
}

std::string to_lower(std::string_view s);

std::string trim(std::string_view s);

}  // namespace seje
