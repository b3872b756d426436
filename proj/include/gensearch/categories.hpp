#pragma once

#include <array>
#include <string>
#include <string_view>

#include "gensearch/common.hpp"

namespace gensearch::datapipe {

/// The two high-level prompt subsets used for benchmark reporting.
enum class Subset { ScienceKnowledge, PopCultureNews };

inline const char* to_string(Subset subset) {
  switch (subset) {
    case Subset::ScienceKnowledge: return "science_knowledge";
    case Subset::PopCultureNews: return "pop_culture_news";
  }
  return "?";
}

enum class DataErrorCode { UnknownCategory, InsufficientRecords, MalformedRecord };

inline const char* to_string(DataErrorCode code) {
  switch (code) {
    case DataErrorCode::UnknownCategory: return "UnknownCategory";
    case DataErrorCode::InsufficientRecords: return "InsufficientRecords";
    case DataErrorCode::MalformedRecord: return "MalformedRecord";
  }
  return "?";
}

struct DataError {
  DataErrorCode code;
  std::string message;
};

inline constexpr std::array<std::string_view, 15> kScienceCategories = {
    "astronomy", "biology",  "chemistry", "physics",  "engineering",
    "medicine",  "industry", "architecture", "history", "geography",
    "religion",  "politics", "culture",   "art",      "sports",
};

inline constexpr std::array<std::string_view, 6> kPopCultureCategories = {
    "anime", "games", "films", "celebrities", "posters", "General News",
};

/// Maps a category to its subset. The category set is closed: 15 science and
/// knowledge categories plus 6 pop culture and news categories.
inline Expected<Subset, DataError> subset_of(std::string_view category) {
  for (std::string_view c : kScienceCategories) {
    if (c == category) return Subset::ScienceKnowledge;
  }
  for (std::string_view c : kPopCultureCategories) {
    if (c == category) return Subset::PopCultureNews;
  }
  return DataError{DataErrorCode::UnknownCategory,
                   "'" + std::string(category) + "' is not a known category"};
}

inline bool is_known_category(std::string_view category) { return subset_of(category).ok(); }

}  // namespace gensearch::datapipe
