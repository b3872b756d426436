#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gensearch/common.hpp"

namespace gensearch::jsonl {

using Json = nlohmann::json;

struct IoError {
  std::string message;
};

/// Reads a JSONL file into parsed documents, skipping blank lines. Parse
/// failures report the 1-based line number.
inline Expected<std::vector<Json>, IoError> read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return IoError{"cannot open '" + path.string() + "'"};
  std::vector<Json> docs;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim_view(line).empty()) continue;
    Json doc = Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) {
      return IoError{path.string() + ":" + std::to_string(line_number) + ": invalid JSON"};
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline Expected<bool, IoError> write_file(const std::filesystem::path& path,
                                          const std::vector<Json>& docs) {
  std::ofstream out(path);
  if (!out) return IoError{"cannot open '" + path.string() + "' for writing"};
  for (const Json& doc : docs) out << doc.dump() << "\n";
  return true;
}

inline Expected<std::string, IoError> read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return IoError{"cannot open '" + path.string() + "'"};
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace gensearch::jsonl
