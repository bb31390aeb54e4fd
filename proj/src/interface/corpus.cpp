#include "c3mod/interface/corpus.hpp"

#include <fstream>
#include <sstream>

#include "c3mod/text.hpp"

namespace c3mod::interface {
namespace {

Label label_value(const json& v, const std::string& what) {
  if (v.is_boolean()) return v.get<bool>() ? Label::Offensive : Label::NonOffensive;
  if (v.is_number_integer()) {
    const auto n = v.get<long long>();
    if (n == 0 || n == 1) return n ? Label::Offensive : Label::NonOffensive;
  }
  if (v.is_string()) {
    const auto s = text::to_lower_ascii(text::trim(v.get<std::string>()));
    if (s == "true" || s == "off" || s == "offensive" || s == "1") return Label::Offensive;
    if (s == "false" || s == "not" || s == "none" || s == "normal" || s == "0") {
      return Label::NonOffensive;
    }
  }
  throw ValidationError(what + ": cannot read a label from " + v.dump());
}

std::string string_field(const json& record, const char* key) {
  if (!record.contains(key) || record.at(key).is_null()) return {};
  if (!record.at(key).is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return record.at(key).get<std::string>();
}

}  // namespace

Sample sample_from_record(const json& record) {
  if (!record.is_object()) throw ValidationError("corpus record must be an object");
  Sample s;
  if (record.contains("id") && !record.at("id").is_null()) {
    s.id = record.at("id").is_string() ? record.at("id").get<std::string>() : record.at("id").dump();
  } else {
    s.id = string_field(record, "guid");
  }
  s.title = string_field(record, "title");
  s.comment = string_field(record, "comment");
  for (const auto* key : {"title_translated", "comment_translated"}) {
    if (record.contains(key) && !record.at(key).is_null()) {
      (std::string_view(key) == "title_translated" ? s.title_translated : s.comment_translated) =
          record.at(key).get<std::string>();
    }
  }
  if (record.contains("OFF") && !record.at("OFF").is_null()) {
    s.gold_label = label_value(record.at("OFF"), "OFF");
  } else if (record.contains("gold_label") && !record.at("gold_label").is_null()) {
    s.gold_label = label_value(record.at("gold_label"), "gold_label");
  } else if (record.contains("label") && !record.at("label").is_null()) {
    s.gold_label = label_value(record.at("label"), "label");
  }
  if (record.contains("category") && !record.at("category").is_null()) {
    s.category = category_from_string(record.at("category").get<std::string>());
  }
  const json* votes = nullptr;
  for (const auto* key : {"annotations", "native_votes", "annotator_labels"}) {
    if (record.contains(key)) {
      votes = &record.at(key);
      break;
    }
  }
  if (votes) {
    if (!votes->is_array()) throw ValidationError("annotations must be an array");
    for (const auto& v : *votes) {
      NativeVote vote;
      vote.annotator_id = v.contains("annotator_id") ? v.at("annotator_id").is_string()
                                                           ? v.at("annotator_id").get<std::string>()
                                                           : v.at("annotator_id").dump()
                                                     : string_field(v, "annotator");
      const json* label = v.contains("OFF") ? &v.at("OFF") : v.contains("label") ? &v.at("label") : nullptr;
      if (!label) throw ValidationError("annotation without a label");
      vote.label = label_value(*label, "annotation");
      s.native_votes.push_back(std::move(vote));
    }
  }
  validate_sample(s);
  return s;
}

std::vector<Sample> parse_corpus(std::string_view content, const std::string& origin) {
  std::vector<Sample> corpus;
  const auto body = text::trim(content);
  const auto add = [&](const json& record, const std::string& where) {
    try {
      corpus.push_back(sample_from_record(record));
    } catch (const json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    } catch (const Error& e) {
      throw ValidationError(where + ": " + e.what());
    }
  };
  if (body.starts_with("[") || (body.starts_with("{") && body.find('\n') == std::string_view::npos)) {
    json doc;
    try {
      doc = json::parse(body);
    } catch (const json::exception& e) {
      throw ParseError(origin + ": " + e.what());
    }
    const json* records = &doc;
    if (doc.is_object() && doc.contains("data")) records = &doc.at("data");
    if (!records->is_array()) records = nullptr;
    if (!records) {
      add(doc, origin + ": record 1");
    } else {
      for (std::size_t i = 0; i < records->size(); ++i) {
        add(records->at(i), origin + ": record " + std::to_string(i + 1));
      }
    }
  } else {
    std::size_t line_no = 0;
    for (auto line : text::split_lines(content)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      json record;
      try {
        record = json::parse(line);
      } catch (const json::exception& e) {
        throw ParseError(origin + ":" + std::to_string(line_no) + ": " + e.what());
      }
      add(record, origin + ":" + std::to_string(line_no));
    }
  }
  if (corpus.empty()) throw ValidationError(origin + ": corpus is empty");
  validate_corpus(corpus);
  return corpus;
}

std::vector<Sample> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read corpus " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str(), path.string());
}

void write_corpus_jsonl(const std::filesystem::path& path, const std::vector<Sample>& corpus) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& s : corpus) out << dump_line(json(s)) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace c3mod::interface
