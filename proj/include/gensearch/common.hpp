#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace gensearch {

/// Minimal value-or-error result type. `E` should be a small struct with a
/// code and a human-readable message.
template <typename T, typename E>
class Expected {
 public:
  Expected(T value) : data_(std::in_place_index<0>, std::move(value)) {}
  Expected(E error) : data_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const { return data_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() & { return std::get<0>(data_); }
  const T& value() const& { return std::get<0>(data_); }
  T&& value() && { return std::get<0>(std::move(data_)); }

  const E& error() const { return std::get<1>(data_); }

  const T& operator*() const { return value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, E> data_;
};

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool starts_with_ci(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  for (size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

/// Strips a Markdown code-fence wrapper (``` or ```lang) around a payload,
/// plus surrounding whitespace. Non-fenced input passes through trimmed.
inline std::string strip_code_fences(std::string_view s) {
  std::string_view t = trim_view(s);
  if (t.substr(0, 3) == "```") {
    t.remove_prefix(3);
    size_t nl = t.find('\n');
    if (nl != std::string_view::npos) {
      std::string_view tag = trim_view(t.substr(0, nl));
      bool tag_like = true;
      for (char c : tag) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') {
          tag_like = false;
          break;
        }
      }
      if (tag_like) t.remove_prefix(nl + 1);
    }
    while (!t.empty() && is_space(t.back())) t.remove_suffix(1);
    if (t.size() >= 3 && t.substr(t.size() - 3) == "```") t.remove_suffix(3);
    t = trim_view(t);
  }
  return std::string(t);
}

}  // namespace gensearch
