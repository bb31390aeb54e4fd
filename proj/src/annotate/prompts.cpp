#include "c3mod/annotate/prompts.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "c3mod/domain.hpp"
#include "c3mod/text.hpp"

namespace c3mod::annotate {
namespace detail {
const std::map<std::string, std::string>& embedded_prompt_assets_v1();
}  // namespace detail

namespace {

struct Member {
  const char* file;
  std::string PromptSet::*field;
};

constexpr Member kMembers[] = {
    {"rag_step", &PromptSet::rag_step},
    {"generation_step", &PromptSet::generation_step},
    {"generation_example", &PromptSet::generation_example},
    {"span_listing", &PromptSet::span_listing},
    {"moderation", &PromptSet::moderation},
    {"moderation_reminder", &PromptSet::moderation_reminder},
    {"regeneration_reminder", &PromptSet::regeneration_reminder},
    {"translate", &PromptSet::translate},
};

// Asset files end with a newline that is not part of the template.
std::string strip_final_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

PromptSet build_v1() {
  PromptSet set;
  set.name = "v1";
  const auto& assets = detail::embedded_prompt_assets_v1();
  for (const auto& member : kMembers) {
    const auto it = assets.find(member.file);
    if (it == assets.end()) throw Error(std::string("embedded prompt missing: ") + member.file);
    set.*member.field = strip_final_newline(it->second);
  }
  return set;
}

}  // namespace

const PromptSet& PromptSet::v1() {
  static const PromptSet set = build_v1();
  return set;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  PromptSet set;
  set.name = dir.filename().string();
  if (set.name.empty()) set.name = dir.parent_path().filename().string();
  for (const auto& member : kMembers) {
    const auto path = dir / (std::string(member.file) + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read prompt asset " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    set.*member.field = strip_final_newline(buffer.str());
  }
  return set;
}

std::string PromptSet::version() const {
  std::string material;
  for (const auto& member : kMembers) {
    material += member.file;
    material += '\0';
    material += this->*member.field;
    material += '\0';
  }
  return name + "-" + text::sha256_hex(material).substr(0, 12);
}

}  // namespace c3mod::annotate
