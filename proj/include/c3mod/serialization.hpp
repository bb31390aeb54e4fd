#pragma once

#include <nlohmann/json.hpp>

#include "c3mod/domain.hpp"

namespace c3mod {

using json = nlohmann::json;

void to_json(json& j, const NativeVote& v);
void from_json(const json& j, NativeVote& v);

void to_json(json& j, const Sample& s);
void from_json(const json& j, Sample& s);

void to_json(json& j, const Verdict& v);
void from_json(const json& j, Verdict& v);

void to_json(json& j, const PipelineDecision& d);
void from_json(const json& j, PipelineDecision& d);

/// Compact single-line dump with invalid UTF-8 replaced, suitable for JSON Lines.
std::string dump_line(const json& j);

}  // namespace c3mod
