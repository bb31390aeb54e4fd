#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>

#include "c3mod/serialization.hpp"

namespace c3mod {

/// Append-only JSON Lines file with a single serialized appender. Each append is
/// flushed before returning.
class JsonlAppender {
 public:
  explicit JsonlAppender(std::filesystem::path path);

  void append(const json& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
  std::ofstream out_;
};

/// Calls `visit(record, line_number)` for every non-blank line; line numbers are
/// 1-based. Throws ParseError naming the line on malformed JSON. A missing file
/// is treated as empty.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const json&, std::size_t)>& visit);

}  // namespace c3mod
