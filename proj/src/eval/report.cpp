#include "c3mod/eval/report.hpp"

#include <functional>
#include <sstream>

namespace c3mod::eval {
namespace {

std::string_view category_title(CulturalCategory c) {
  switch (c) {
    case CulturalCategory::CulturalKnowledge:
      return "Cultural Knowledge";
    case CulturalCategory::CulturalSentiment:
      return "Cultural Sentiment";
    case CulturalCategory::InternetCulture:
      return "Internet Culture";
  }
  return "";
}

std::string cell(const Ratio& r) {
  if (r.den == 0) return "-";
  return format4(r) + " (" + std::to_string(r.num) + "/" + std::to_string(r.den) + ")";
}

json ratio_json(const Ratio& r) {
  json j{{"correct", r.num}, {"total", r.den}};
  j["value"] = r.den == 0 ? json(nullptr) : json(format4(r));
  return j;
}

Ratio find_or_empty(const std::map<DecisionStage, Ratio>& m, DecisionStage s) {
  const auto it = m.find(s);
  return it == m.end() ? Ratio{} : it->second;
}

void render_routing(const RoutingCounts& r, std::ostringstream& md, json& doc) {
  md << "## Routing\n\n";
  md << "total: " << r.total << "\n";
  md << "decided_at_llm: " << r.decided_at_llm << "\n";
  md << "escalated: " << r.escalated << "\n";
  md << "decided_by_humans: " << r.decided_by_humans << "\n";
  md << "unresolved: " << r.unresolved << "\n";
  md << "awaiting_humans: " << r.awaiting_humans << "\n";
  json section{{"total", r.total},
               {"decided_at_llm", r.decided_at_llm},
               {"escalated", r.escalated},
               {"decided_by_humans", r.decided_by_humans},
               {"unresolved", r.unresolved},
               {"awaiting_humans", r.awaiting_humans}};
  if (r.total > 0 && r.escalated <= r.total) {
    const auto workload = workload_ratio(r.total, r.escalated);
    const Ratio agreement{r.decided_at_llm, r.decided_at_llm + r.escalated};
    md << "workload_reduction: " << format4(workload) << "\n";
    section["workload_reduction"] = format4(workload);
    if (agreement.den > 0) {
      md << "agreement_ratio: " << format4(agreement) << "\n";
      section["agreement_ratio"] = format4(agreement);
    }
  }
  md << "\n";
  doc["routing"] = section;
}

void render_category_table(const AccuracyReport& a, const Ratio& step2, const Ratio& step3,
                           std::ostringstream& md) {
  md << "| Decision | n | All |";
  for (const auto& [c, r] : a.by_category) md << " " << category_title(c) << " |";
  md << "\n|---|---|---|";
  for (std::size_t i = 0; i < a.by_category.size(); ++i) md << "---|";
  md << "\n";
  const auto row = [&](std::string_view name, const Ratio& all,
                       const std::function<Ratio(CulturalCategory)>& per_category) {
    md << "| " << name << " | " << all.den << " | " << cell(all) << " |";
    for (const auto& [c, r] : a.by_category) md << " " << cell(per_category(c)) << " |";
    md << "\n";
  };
  row("All Samples", a.overall, [&](CulturalCategory c) { return a.by_category.at(c); });
  const auto staged = [&](DecisionStage s) {
    return [&a, s](CulturalCategory c) {
      const auto it = a.by_category_stage.find(c);
      return it == a.by_category_stage.end() ? Ratio{} : find_or_empty(it->second, s);
    };
  };
  row("Decision at Step 2", step2, staged(DecisionStage::LlmConsensus));
  row("Decision at Step 3", step3, staged(DecisionStage::HumanMajority));
  md << "\n";
}

void render_accuracy(const AccuracyReport& a, std::ostringstream& md, json& doc) {
  const auto step2 = find_or_empty(a.by_stage, DecisionStage::LlmConsensus);
  const auto step3 = find_or_empty(a.by_stage, DecisionStage::HumanMajority);
  md << "## Accuracy\n\n";
  md << "overall: " << (a.overall.den ? format4(a.overall) : "-") << "\n";
  md << "step-2: " << (step2.den ? format4(step2) : "-") << "\n";
  md << "step-3: " << (step3.den ? format4(step3) : "-") << "\n";
  if (a.llm_only_baseline) md << "llm-only baseline: " << format4(*a.llm_only_baseline) << "\n";
  md << "unresolved (not scored): " << a.unresolved.size() << "\n\n";

  if (!a.by_category.empty()) render_category_table(a, step2, step3, md);

  json section{{"overall", ratio_json(a.overall)},
               {"step_2", ratio_json(step2)},
               {"step_3", ratio_json(step3)},
               {"unresolved", a.unresolved}};
  if (a.llm_only_baseline) section["llm_only_baseline"] = ratio_json(*a.llm_only_baseline);
  if (!a.by_category.empty()) {
    json cats = json::object();
    for (const auto& [c, r] : a.by_category) {
      json entry{{"all", ratio_json(r)}};
      const auto stages = a.by_category_stage.find(c);
      if (stages != a.by_category_stage.end()) {
        entry["step_2"] = ratio_json(find_or_empty(stages->second, DecisionStage::LlmConsensus));
        entry["step_3"] = ratio_json(find_or_empty(stages->second, DecisionStage::HumanMajority));
      }
      cats[std::string(to_string(c))] = entry;
    }
    section["by_category"] = cats;
  }
  doc["accuracy"] = section;
}

json table_row(std::string_view name, const ContingencyTable2x2& t, std::ostringstream& md) {
  json j{{"outcome", name}, {"a", t.a}, {"b", t.b}, {"c", t.c}, {"d", t.d}};
  md << "| " << name << " | " << t.a << " | " << t.b << " | " << t.c << " | " << t.d << " | ";
  try {
    const auto r = chi_square_2x2(t);
    md << format4(r.chi2) << " | " << format_fixed(r.p_value, 6) << " |\n";
    j["chi2"] = format4(r.chi2);
    j["p_value"] = format_fixed(r.p_value, 6);
    j["df"] = r.df;
  } catch (const DegenerateTable&) {
    md << "n/a | n/a |\n";
    j["chi2"] = nullptr;
    j["p_value"] = nullptr;
  }
  return j;
}

void render_difficulty(const ReportInputs& in, std::ostringstream& md, json& doc) {
  md << "## Difficulty\n\n";
  md << "Rows: native annotators agree (a, b) or disagree (c, d). Columns: correct (a, c) or "
        "incorrect (b, d). Pearson chi-square, df = 1.\n\n";
  md << "| Outcome | a | b | c | d | chi2 | p |\n|---|---|---|---|---|---|---|\n";
  json rows = json::array();
  if (in.difficulty) {
    rows.push_back(table_row("unanimous", in.difficulty->unanimous, md));
    rows.push_back(table_row("split (final decision)", in.difficulty->split, md));
  }
  if (in.difficulty_llm_majority) {
    if (!in.difficulty) rows.push_back(table_row("unanimous", in.difficulty_llm_majority->unanimous, md));
    rows.push_back(table_row("split (LLM majority)", in.difficulty_llm_majority->split, md));
  }
  md << "\n";
  doc["difficulty"] = rows;
}

void render_annotators(const AnnotatorStats& s, std::ostringstream& md, json& doc) {
  md << "## Native annotators\n\n";
  md << "annotators: " << s.total_annotators << "\n";
  md << "samples: " << s.total_samples << "\n";
  md << "mean samples per annotator: " << format4(s.mean_per_annotator) << "\n";
  md << "median samples per annotator: " << format4(s.median_per_annotator) << "\n";
  md << "annotators with more than " << s.threshold << " samples: " << s.filtered_count << "\n";
  md << "mean accuracy: " << format4(s.mean_acc) << "\n";
  md << "std accuracy: " << format4(s.std_acc) << "\n";
  md << "median accuracy: " << format4(s.median_acc) << "\n\n";
  md << "| Accuracy bin | Annotators |\n|---|---|\n";
  json bins = json::array();
  for (const auto& b : s.histogram) {
    const auto lo = format_fixed(b.lo_hundredths / 100.0, 2);
    const auto hi = format_fixed(b.hi_hundredths / 100.0, 2);
    const bool top = b.hi_hundredths == 100;
    md << "| [" << lo << ", " << hi << (top ? "]" : ")") << " | " << b.count << " |\n";
    bins.push_back({{"lo", lo}, {"hi", hi}, {"count", b.count}});
  }
  md << "\n";
  if (s.per_annotator.size() <= 50) {
    md << "| Annotator | Samples | Matches | Accuracy |\n|---|---|---|---|\n";
    for (const auto& [id, r] : s.per_annotator) {
      md << "| " << id << " | " << r.count << " | " << r.matches << " | " << format4(r.accuracy())
         << " |\n";
    }
    md << "\n";
  }
  json per = json::object();
  for (const auto& [id, r] : s.per_annotator) {
    per[id] = {{"matches", r.matches}, {"count", r.count}, {"accuracy", format4(r.accuracy())}};
  }
  doc["annotators"] = {{"total_annotators", s.total_annotators},
                       {"total_samples", s.total_samples},
                       {"mean_per_annotator", format4(s.mean_per_annotator)},
                       {"median_per_annotator", format4(s.median_per_annotator)},
                       {"threshold", s.threshold},
                       {"filtered_count", s.filtered_count},
                       {"mean_acc", format4(s.mean_acc)},
                       {"std_acc", format4(s.std_acc)},
                       {"median_acc", format4(s.median_acc)},
                       {"histogram", bins},
                       {"per_annotator", per}};
}

}  // namespace

Report render_report(const ReportInputs& in) {
  std::ostringstream md;
  json doc{{"schema", "c3mod-report/1"}};
  md << "# c3mod report\n\n";
  if (in.routing) render_routing(*in.routing, md, doc);
  if (in.accuracy) render_accuracy(*in.accuracy, md, doc);
  if (in.difficulty || in.difficulty_llm_majority) render_difficulty(in, md, doc);
  if (in.annotators) render_annotators(*in.annotators, md, doc);
  return {md.str(), std::move(doc)};
}

}  // namespace c3mod::eval
