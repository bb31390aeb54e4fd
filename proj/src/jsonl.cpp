#include "c3mod/jsonl.hpp"

#include "c3mod/text.hpp"

namespace c3mod {

JsonlAppender::JsonlAppender(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw Error("cannot open " + path_.string() + " for appending");
}

void JsonlAppender::append(const json& record) {
  const auto line = dump_line(record);
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw Error("write to " + path_.string() + " failed");
}

void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const json&, std::size_t)>& visit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    visit(record, number);
  }
}

}  // namespace c3mod
