#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "c3mod/domain.hpp"
#include "c3mod/serialization.hpp"

namespace c3mod::interface {

/// Accepts one corpus record in the ingest shape
///   {id | guid, title, comment, OFF: bool, category, annotations: [{annotator_id, OFF}]}
/// plus optional title_translated / comment_translated. Also takes this
/// project's own Sample serialization (gold_label, native_votes) and KOLD-style
/// spellings: "label": "OFF"|"NOT", OFF as "True"/"False"/0/1, annotator
/// labels under "annotator_labels".
Sample sample_from_record(const json& record);

/// JSON array, {"data": [...]}, or JSON Lines, told apart by the first
/// non-space character. Every sample is validated and ids must be unique;
/// errors name the record.
std::vector<Sample> parse_corpus(std::string_view content, const std::string& origin);
std::vector<Sample> load_corpus(const std::filesystem::path& path);

void write_corpus_jsonl(const std::filesystem::path& path, const std::vector<Sample>& corpus);

}  // namespace c3mod::interface
