#include "c3mod/interface/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <set>

#include "c3mod/text.hpp"

namespace c3mod::interface {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run",
       {"root", "n_moderators", "moderator_providers", "moderator_model", "moderator_temperatures",
        "annotator_provider", "annotator_model", "annotation_temperature", "search_provider",
        "retrieval_mode", "top_k", "required_votes", "concurrency", "prompt_dir",
        "show_llm_verdicts"}},
      {"providers", {"fixture", "timeout_ms", "max_attempts", "base_delay_ms", "max_delay_ms",
                     "concurrency", "seed"}},
      {"server", {"host", "port", "ui_dir"}},
  };
  return keys;
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto piece = text::trim(value.substr(start, comma == std::string_view::npos
                                                          ? std::string_view::npos
                                                          : comma - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, std::string_view value) {
  value = text::trim(value);
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ValidationError("config key '" + key + "': '" + std::string(value) + "' is not a number");
  }
  return out;
}

double parse_double(const std::string& key, std::string_view value) {
  try {
    std::size_t used = 0;
    const std::string s(text::trim(value));
    const double out = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "': '" + std::string(value) + "' is not a number");
  }
}

bool parse_bool(const std::string& key, std::string_view value) {
  const auto v = text::to_lower_ascii(text::trim(value));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config key '" + key + "': '" + std::string(value) + "' is not a boolean");
}

void apply(AppConfig& c, const std::string& section, const std::string& key,
           const std::string& value) {
  const auto name = section + "." + key;
  if (section == "reviewers") {
    c.reviewer_tokens[key] = std::string(text::trim(value));
    return;
  }
  const auto keys = known_keys().find(section);
  if (keys == known_keys().end() || !keys->second.contains(key)) {
    throw ValidationError("unknown config key '" + name + "'");
  }
  auto& r = c.run;
  if (section == "run") {
    if (key == "root") c.runs_root = std::string(text::trim(value));
    if (key == "n_moderators") r.n_moderators = parse_number<int>(name, value);
    if (key == "moderator_providers") r.moderator_providers = split_list(value);
    if (key == "moderator_model") r.moderator_model = std::string(text::trim(value));
    if (key == "moderator_temperatures") {
      r.moderator_temperatures.clear();
      for (const auto& t : split_list(value)) r.moderator_temperatures.push_back(parse_double(name, t));
    }
    if (key == "annotator_provider") r.annotator_provider = std::string(text::trim(value));
    if (key == "annotator_model") r.annotator_model = std::string(text::trim(value));
    if (key == "annotation_temperature") r.annotation_temperature = parse_double(name, value);
    if (key == "search_provider") r.search_provider = std::string(text::trim(value));
    if (key == "retrieval_mode") {
      try {
        r.retrieval_mode = annotate::retrieval_mode_from_string(text::trim(value));
      } catch (const ParseError& e) {
        throw ValidationError("config key '" + name + "': " + e.what());
      }
    }
    if (key == "top_k") r.top_k = parse_number<int>(name, value);
    if (key == "required_votes") r.required_votes = parse_number<int>(name, value);
    if (key == "concurrency") r.concurrency = parse_number<int>(name, value);
    if (key == "prompt_dir") r.prompt_dir = std::string(text::trim(value));
    if (key == "show_llm_verdicts") r.show_llm_verdicts = parse_bool(name, value);
  } else if (section == "providers") {
    if (key == "fixture") {
      const auto v = text::trim(value);
      c.fixture = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(std::string(v));
    }
    if (key == "timeout_ms") c.provider_timeout = std::chrono::milliseconds(parse_number<long>(name, value));
    if (key == "max_attempts") c.retry.max_attempts = parse_number<int>(name, value);
    if (key == "base_delay_ms") c.retry.base_delay = std::chrono::milliseconds(parse_number<long>(name, value));
    if (key == "max_delay_ms") c.retry.max_delay = std::chrono::milliseconds(parse_number<long>(name, value));
    if (key == "concurrency") c.provider_concurrency = parse_number<int>(name, value);
    if (key == "seed") c.seed = parse_number<std::uint64_t>(name, value);
  } else if (section == "server") {
    if (key == "host") c.server.host = std::string(text::trim(value));
    if (key == "port") c.server.port = parse_number<int>(name, value);
    if (key == "ui_dir") {
      const auto v = text::trim(value);
      c.server.ui_dir = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(std::string(v));
    }
  }
}

std::string env_name(const std::string& section, const std::string& key) {
  std::string out = "C3MOD_" + section + "_" + key;
  for (auto& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

AppConfig load_config(const std::optional<std::filesystem::path>& file,
                      const providers::EnvLookup& env) {
  AppConfig config;
  if (file) {
    pt::ptree tree;
    try {
      pt::read_ini(file->string(), tree);
    } catch (const pt::ini_parser_error& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
      if (!body.data().empty()) throw ValidationError("config key '" + section + "' outside a section");
      for (const auto& [key, value] : body) apply(config, section, key, value.data());
    }
  }
  for (const auto& [section, keys] : known_keys()) {
    for (const auto& key : keys) {
      if (auto value = env(env_name(section, key))) apply(config, section, key, *value);
    }
  }
  config.run.validate();
  if (config.server.port < 0 || config.server.port > 65535) {
    throw ValidationError("config key 'server.port' out of range");
  }
  return config;
}

providers::ProviderOptions provider_options(const AppConfig& config) {
  providers::ProviderOptions options;
  options.fixture = config.fixture;
  options.timeout = config.provider_timeout;
  options.call_policy.retry = config.retry;
  options.call_policy.concurrency = config.provider_concurrency;
  options.call_policy.seed = config.seed;
  return options;
}

}  // namespace c3mod::interface
