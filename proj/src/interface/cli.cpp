#include "c3mod/interface/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <ostream>

#include "c3mod/eval/report.hpp"
#include "c3mod/interface/api.hpp"
#include "c3mod/interface/config.hpp"
#include "c3mod/interface/corpus.hpp"
#include "c3mod/interface/replay.hpp"

namespace c3mod::interface {

namespace fs = std::filesystem;

namespace {

ApiServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

void configure_logging(const std::string& level) {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("c3mod");
    spdlog::set_default_logger(logger);
  });
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") {
    throw ValidationError("unknown log level '" + level + "'");
  }
  spdlog::set_level(parsed);
}

/// Opens the run named by `target`: a corpus file starts (or reopens) a run
/// for that corpus, anything else is taken as a run id.
std::unique_ptr<pipeline::Run> open_target(const AppConfig& config, const std::string& target,
                                           providers::ProviderRegistry& registry) {
  const auto clock = std::make_shared<SystemClock>();
  if (fs::is_regular_file(target)) {
    return pipeline::Run::create(config.runs_root, load_corpus(target), config.run, registry, clock);
  }
  return pipeline::Run::open(config.runs_root, target, registry, clock);
}

void print_summary(std::ostream& out, const pipeline::RunSummary& summary) {
  out << pipeline::to_json_value(summary).dump(2) << "\n";
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                 const providers::EnvLookup& env) {
  CLI::App app{"c3mod: cultural-context moderation pipeline", "c3mod"};
  app.require_subcommand(1);

  std::optional<std::string> config_file;
  std::string log_level = "warn";
  app.add_option("--config", config_file, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

  auto* ingest = app.add_subcommand("ingest", "Load and validate a corpus");
  std::string ingest_path;
  std::optional<std::string> ingest_out;
  ingest->add_option("path", ingest_path, "JSON or JSON Lines corpus")->required();
  ingest->add_option("--out", ingest_out, "Write the normalized corpus as JSON Lines");

  auto* annotate = app.add_subcommand("annotate", "Step 1 only (translation and annotation)");
  std::string annotate_target;
  annotate->add_option("run", annotate_target, "Corpus file or run id")->required();

  auto* run = app.add_subcommand("run", "Full pipeline up to the human review queue");
  std::string run_target;
  run->add_option("run", run_target, "Corpus file or run id")->required();

  auto* evaluate = app.add_subcommand("eval", "Evaluate a run against gold labels");
  std::string eval_run;
  std::string eval_gold;
  std::optional<std::string> eval_json;
  evaluate->add_option("run", eval_run, "Run id")->required();
  evaluate->add_option("--gold", eval_gold, "Corpus with gold labels")->required();
  evaluate->add_option("--json", eval_json, "Also write the JSON report here");

  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  stats->require_subcommand(1);
  auto* annotators = stats->add_subcommand("annotators", "Native annotator accuracy");
  std::string stats_path;
  std::size_t threshold = 9;
  bool sample_std = false;
  annotators->add_option("path", stats_path, "Corpus with three native votes per sample")->required();
  annotators->add_option("--threshold", threshold, "Keep annotators with more than this many samples");
  annotators->add_flag("--sample-std", sample_std, "Use the n-1 standard deviation");

  auto* serve = app.add_subcommand("serve", "Serve the review API and console");
  std::optional<std::string> serve_run;
  std::optional<int> serve_port;
  std::optional<std::string> serve_host;
  serve->add_option("--run", serve_run, "Run id")->required();
  serve->add_option("--port", serve_port, "TCP port");
  serve->add_option("--host", serve_host, "Bind address");

  auto* replay_cmd = app.add_subcommand("replay", "Scripted end-to-end run over a fixture directory");
  std::string replay_dir;
  std::string replay_out = "replay-out";
  int replay_concurrency = 4;
  replay_cmd->add_option("fixture", replay_dir, "Fixture directory")->required()->check(CLI::ExistingDirectory);
  replay_cmd->add_option("--out", replay_out, "Output directory");
  replay_cmd->add_option("--concurrency", replay_concurrency, "Worker count")->check(CLI::PositiveNumber);
  replay_cmd->add_option("--threshold", threshold, "Annotator sample threshold");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "c3mod: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    configure_logging(log_level);
    const auto config =
        load_config(config_file ? std::optional<fs::path>(*config_file) : std::nullopt, env);

    if (*ingest) {
      const auto corpus = load_corpus(ingest_path);
      std::size_t gold = 0;
      std::size_t voted = 0;
      std::map<std::string, std::size_t> per_category;
      for (const auto& s : corpus) {
        gold += s.gold_label.has_value();
        voted += s.native_votes.size() == 3;
        if (s.category) ++per_category[std::string(to_string(*s.category))];
      }
      json summary{{"samples", corpus.size()},
                   {"with_gold_label", gold},
                   {"with_native_votes", voted},
                   {"by_category", per_category}};
      out << summary.dump(2) << "\n";
      if (ingest_out) write_corpus_jsonl(*ingest_out, corpus);
      return kExitOk;
    }

    if (*annotate || *run) {
      providers::ProviderRegistry registry(provider_options(config));
      auto target = open_target(config, *annotate ? annotate_target : run_target, registry);
      if (*annotate) {
        const auto made = target->annotate_all();
        out << json{{"run_id", target->id()}, {"annotated", made}}.dump(2) << "\n";
      } else {
        print_summary(out, target->execute());
      }
      return target->summary().errors.empty() ? kExitOk : kExitRuntime;
    }

    if (*evaluate) {
      const auto target = pipeline::Run::open_offline(config.runs_root, eval_run,
                                                      std::make_shared<SystemClock>());
      const auto report = eval::render_report(evaluate_run(*target, load_corpus(eval_gold)));
      out << report.markdown;
      if (eval_json) std::ofstream(*eval_json, std::ios::trunc) << report.document.dump(2) << "\n";
      return kExitOk;
    }

    if (*annotators) {
      eval::ReportInputs inputs;
      inputs.annotators = eval::annotator_stats(
          load_corpus(stats_path), threshold,
          sample_std ? eval::StdKind::Sample : eval::StdKind::Population);
      out << eval::render_report(inputs).markdown;
      return kExitOk;
    }

    if (*serve) {
      auto target = pipeline::Run::open_offline(config.runs_root, *serve_run,
                                                std::make_shared<SystemClock>());
      ApiServer server(*target,
                       ApiOptions{config.reviewer_tokens, config.run.show_llm_verdicts},
                       config.server.ui_dir);
      const auto host = serve_host.value_or(config.server.host);
      const auto port = serve_port.value_or(config.server.port);
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      err << "c3mod: serving run " << target->id() << " on " << host << ":" << port << "\n";
      server.serve(host, port);
      g_server = nullptr;
      return kExitOk;
    }

    if (*replay_cmd) {
      ReplayOptions options;
      options.fixture_dir = replay_dir;
      options.out_dir = replay_out;
      options.concurrency = replay_concurrency;
      options.annotator_threshold = threshold;
      const auto result = replay(options);
      out << result.report.markdown;
      return result.summary.errors.empty() ? kExitOk : kExitRuntime;
    }
  } catch (const std::exception& e) {
    err << "c3mod: error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace c3mod::interface
