#pragma once

#include <optional>
#include <string>

#include "c3mod/eval/eval.hpp"
#include "c3mod/serialization.hpp"

namespace c3mod::eval {

struct RoutingCounts {
  std::uint64_t total = 0;
  std::uint64_t decided_at_llm = 0;
  std::uint64_t escalated = 0;
  std::uint64_t decided_by_humans = 0;
  std::uint64_t unresolved = 0;
  std::uint64_t awaiting_humans = 0;
};

struct ReportInputs {
  std::optional<RoutingCounts> routing;
  std::optional<AccuracyReport> accuracy;
  /// Split samples scored by their final decision.
  std::optional<DifficultyTables> difficulty;
  /// Split samples scored by the LLM verdict majority.
  std::optional<DifficultyTables> difficulty_llm_majority;
  std::optional<AnnotatorStats> annotators;
};

struct Report {
  std::string markdown;
  /// Schema "c3mod-report/1".
  json document;
};

/// Sections appear only for the inputs present. Rates use 4 decimals rounded
/// half away from zero; p-values get 6.
Report render_report(const ReportInputs& inputs);

}  // namespace c3mod::eval
