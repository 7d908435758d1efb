#pragma once

#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace stancefusion {

/// SDQC stance labels. The index order is canonical: it fixes the axes of
/// every confusion matrix and the column layout of classifier outputs, and
/// must stay stable across serialization.
enum class Label : int { support = 0, deny = 1, query = 2, comment = 3 };

inline constexpr std::size_t kNumLabels = 4;

inline constexpr std::array<Label, kNumLabels> kAllLabels = {
    Label::support, Label::deny, Label::query, Label::comment};

constexpr int label_index(Label l) { return static_cast<int>(l); }

constexpr Label label_from_index(int i) { return static_cast<Label>(i); }

/// Lowercase wire name, used in canonical JSONL and config files.
constexpr std::string_view label_name(Label l) {
  switch (l) {
    case Label::support: return "support";
    case Label::deny: return "deny";
    case Label::query: return "query";
    case Label::comment: return "comment";
  }
  return "";
}

/// Capitalized name for report tables.
constexpr std::string_view label_display_name(Label l) {
  switch (l) {
    case Label::support: return "Support";
    case Label::deny: return "Deny";
    case Label::query: return "Query";
    case Label::comment: return "Comment";
  }
  return "";
}

/// Case-insensitive parse; anything outside the four SDQC names is rejected.
inline std::optional<Label> parse_label(std::string_view s) {
  std::string lower(s);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (Label l : kAllLabels) {
    if (lower == label_name(l)) return l;
  }
  return std::nullopt;
}

}  // namespace stancefusion
