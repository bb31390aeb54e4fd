#pragma once

// Randomized property checks shared by the unit suites and the acceptance
// binary. Each returns how many cases ran and the first counterexample.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "c3mod/eval/eval.hpp"
#include "c3mod/interface/replay.hpp"
#include "c3mod/moderate/moderate.hpp"
#include "c3mod/review/review.hpp"
#include "test_support.hpp"

namespace c3mod::testing {

struct PropertyReport {
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first_failure;

  bool ok() const { return cases > 0 && failures == 0; }
  void fail(const std::string& what) {
    if (failures++ == 0) first_failure = what;
  }
  std::string summary() const {
    std::ostringstream out;
    out << cases << " cases";
    if (failures) out << ", " << failures << " failed; first: " << first_failure;
    return out.str();
  }
};

inline std::vector<Verdict> random_verdicts(std::mt19937_64& rng, std::size_t n, bool allow_abstain) {
  std::vector<Verdict> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto roll = rng() % 10;
    Verdict v = llm_verdict("m" + std::to_string(i + 1), roll < 5 ? Vote::Offensive : Vote::NonOffensive);
    if (allow_abstain && roll == 9) {
      v.vote = Vote::Unsure;
      v.spans.clear();
      v.abstained = true;
    }
    out.push_back(std::move(v));
  }
  return out;
}

/// consensus() depends on the multiset of verdicts, not their order.
inline PropertyReport consensus_order_independence(std::size_t cases, std::uint64_t seed) {
  PropertyReport report;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i, ++report.cases) {
    auto verdicts = random_verdicts(rng, 1 + rng() % 7, true);
    const auto a = moderate::consensus(verdicts);
    std::shuffle(verdicts.begin(), verdicts.end(), rng);
    const auto b = moderate::consensus(verdicts);
    if (a.kind != b.kind || a.label != b.label) report.fail("case " + std::to_string(i));
  }
  return report;
}

/// Unanimous(L) exactly when every verdict is a non-abstaining vote for L, and
/// review tallies equal a counting oracle over the first three binary votes.
inline PropertyReport strict_majority_correctness(std::size_t cases, std::uint64_t seed) {
  PropertyReport report;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i, ++report.cases) {
    const auto verdicts = random_verdicts(rng, 1 + rng() % 7, true);
    std::set<Vote> votes;
    bool any_abstain = false;
    for (const auto& v : verdicts) {
      votes.insert(v.vote);
      any_abstain |= v.abstained;
    }
    const auto outcome = moderate::consensus(verdicts);
    const bool expect_unanimous = votes.size() == 1 && !any_abstain;
    if ((outcome.kind == moderate::OutcomeKind::Unanimous) != expect_unanimous) {
      report.fail("consensus kind, case " + std::to_string(i));
      continue;
    }
    if (expect_unanimous && outcome.label != to_label(*votes.begin())) {
      report.fail("consensus label, case " + std::to_string(i));
      continue;
    }

    // Human stage: random OFF/NOT/UNSURE sequence through an in-memory store.
    review::ReviewStore store(std::nullopt, std::make_shared<FixedClock>(from_epoch_ms(0)), 3);
    Sample sample = make_sample("s");
    moderate::ConsensusOutcome split{moderate::OutcomeKind::Split, std::nullopt,
                                     {llm_verdict("m1", Vote::Offensive), llm_verdict("m2", Vote::NonOffensive)}};
    store.enqueue(sample, {"s", {}, {}, "v"}, split);
    std::vector<Vote> binary;
    std::optional<Label> oracle;
    const int reviewers = 3 + static_cast<int>(rng() % 5);
    for (int r = 0; r < reviewers; ++r) {
      const auto vote = static_cast<Vote>(rng() % 3);
      const auto reviewer = "r" + std::to_string(r);
      store.register_reviewer({reviewer, reviewer, true});
      review::VoteSubmission submission{"s", reviewer, vote, {}, std::nullopt, std::nullopt};
      if (oracle) {
        try {
          store.submit_vote(submission);
          report.fail("vote accepted after finalization, case " + std::to_string(i));
        } catch (const review::TaskFinalized&) {
        }
        break;
      }
      store.submit_vote(submission);
      if (vote != Vote::Unsure) binary.push_back(vote);
      if (binary.size() == 3) {
        const auto off = std::count(binary.begin(), binary.end(), Vote::Offensive);
        oracle = off >= 2 ? Label::Offensive : Label::NonOffensive;
      }
    }
    const auto task = store.get("s");
    if (oracle) {
      if (task->state != review::TaskState::Finalized || task->final_label != oracle) {
        report.fail("human majority, case " + std::to_string(i));
      }
    } else if (review::is_closed(task->state)) {
      report.fail("closed without three binary votes, case " + std::to_string(i));
    }
  }
  return report;
}

/// Every sample is routed exactly once: unanimous + split = total, and the
/// agreement ratio is the unanimous share.
inline PropertyReport routing_conservation(std::size_t cases, std::uint64_t seed) {
  PropertyReport report;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cases; ++i, ++report.cases) {
    const std::size_t total = 1 + rng() % 40;
    const std::size_t moderators = 2 + rng() % 4;
    std::vector<moderate::ConsensusOutcome> outcomes;
    std::size_t unanimous = 0;
    std::size_t split = 0;
    for (std::size_t s = 0; s < total; ++s) {
      outcomes.push_back(moderate::consensus(random_verdicts(rng, moderators, true)));
      (outcomes.back().kind == moderate::OutcomeKind::Unanimous ? unanimous : split)++;
    }
    const double ratio = moderate::agreement_ratio(outcomes);
    const double reduction = eval::workload_reduction(total, split);
    if (unanimous + split != total || ratio != static_cast<double>(unanimous) / static_cast<double>(total) ||
        reduction != ratio) {
      report.fail("case " + std::to_string(i));
    }
  }
  return report;
}

struct GrammarCase {
  std::string input;
  bool ok;
  Vote vote = Vote::NonOffensive;
  std::vector<std::string> spans = {};
};

/// Reply forms the parser must read, and near misses it must reject.
inline std::vector<GrammarCase> verdict_grammar_cases() {
  return {
      {"Offensiveness : True\nSpan : [\"Stop talking about it\"]", true, Vote::Offensive, {"Stop talking about it"}},
      {"Offensiveness : False", true, Vote::NonOffensive},
      {"Offensiveness : True\nSpan : []", true, Vote::Offensive, {}},
      {"offensiveness: false\n", true, Vote::NonOffensive},
      {"OFFENSIVENESS : TRUE\nSPAN : ['a']", true, Vote::Offensive, {"a"}},
      {"**Offensiveness**: True\n**Span**: [\"x\", \"y\"]", true, Vote::Offensive, {"x", "y"}},
      {"Offensiveness : True\nSpans: ['single', \"double\"]", true, Vote::Offensive, {"single", "double"}},
      {"Sure. Here is my answer.\n\nOffensiveness : False\nThe post is normal.", true, Vote::NonOffensive},
      {"Offensiveness : True\nSpan : [\n  \"line one\",\n  \"line two\"\n]", true, Vote::Offensive, {"line one", "line two"}},
      {"Offensiveness : True\nSpan : [\"say \\\"hi\\\"\", 'it\\'s']", true, Vote::Offensive, {"say \"hi\"", "it's"}},
      {"Offensiveness : True\nSpan : [\"국뽕 가득한\"]", true, Vote::Offensive, {"국뽕 가득한"}},
      {"Offensiveness : maybe\nOffensiveness : True\nSpan: [\"z\"]", true, Vote::Offensive, {"z"}},
      {"Offensiveness : False\nSpan : [\"ignored\"]", true, Vote::NonOffensive},
      {"Offensiveness :True\nSpan:[\"tight\"]", true, Vote::Offensive, {"tight"}},
      {"", false},
      {"The post is offensive.", false},
      {"Offensiveness : True", false},
      {"Offensiveness : True\nSpan : [span]", false},
      {"Offensiveness : True\nSpan : [\"open", false},
      {"Offensiveness : True\nSpan : [\"a\" \"b\"]", false},
      {"Offensiveness : Yes", false},
      {"Offensiveness : Truely", false},
      {"NonOffensiveness : True\nSpan : [\"a\"]", false},
  };
}

inline PropertyReport verdict_grammar() {
  PropertyReport report;
  for (const auto& c : verdict_grammar_cases()) {
    ++report.cases;
    try {
      const auto v = moderate::parse_verdict(c.input, "m1");
      if (!c.ok) {
        report.fail("accepted: " + c.input);
      } else if (v.vote != c.vote || v.spans != c.spans || v.raw_response != c.input) {
        report.fail("misread: " + c.input);
      }
    } catch (const ParseError&) {
      if (c.ok) report.fail("rejected: " + c.input);
    }
  }
  return report;
}

/// parse_verdict either returns a valid verdict or throws ParseError, for any
/// input; mutated grammar cases and random bytes.
inline PropertyReport verdict_parser_totality(std::size_t cases, std::uint64_t seed) {
  PropertyReport report;
  std::mt19937_64 rng(seed);
  const auto grammar = verdict_grammar_cases();
  const std::vector<std::string> fragments{"Offensiveness", "offensiveness", " : ", ":", "True", "False",
                                           "Span", "Spans", "[", "]", "\"", "'", ",", "\\", "\n", " ",
                                           "**", "국뽕", "\xff", "\xc3", "true", "x"};
  for (std::size_t i = 0; i < cases; ++i, ++report.cases) {
    std::string input;
    switch (rng() % 3) {
      case 0: {
        input = grammar[rng() % grammar.size()].input;
        const int edits = 1 + static_cast<int>(rng() % 4);
        for (int e = 0; e < edits && !input.empty(); ++e) {
          const auto at = rng() % (input.size() + 1);
          if (rng() % 2) {
            input.insert(at, fragments[rng() % fragments.size()]);
          } else if (at < input.size()) {
            input.erase(at, 1 + rng() % 3);
          }
        }
        break;
      }
      case 1:
        for (int k = static_cast<int>(rng() % 16); k > 0; --k) input += fragments[rng() % fragments.size()];
        break;
      default:
        input.resize(rng() % 64);
        for (auto& ch : input) ch = static_cast<char>(rng() % 256);
    }
    try {
      const auto v = moderate::parse_verdict(input, "m1");
      validate_verdict(v);
      if (v.vote == Vote::Unsure || v.abstained) report.fail("unsure verdict from parser");
    } catch (const ParseError&) {
    } catch (const std::exception& e) {
      report.fail(std::string("unexpected exception: ") + e.what());
    } catch (...) {
      report.fail("non-standard exception");
    }
  }
  return report;
}

inline std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    files[std::filesystem::relative(entry.path(), root).generic_string()] = bytes.str();
  }
  return files;
}

/// Two replays of the same fixture, at different worker counts, write
/// byte-identical run directories and reports.
inline PropertyReport replay_determinism(const std::filesystem::path& fixture) {
  PropertyReport report;
  TempDir a;
  TempDir b;
  interface::ReplayOptions options;
  options.fixture_dir = fixture;
  options.out_dir = a.path();
  options.concurrency = 1;
  interface::replay(options);
  options.out_dir = b.path();
  options.concurrency = 8;
  interface::replay(options);
  const auto left = read_tree(a.path());
  const auto right = read_tree(b.path());
  if (left.size() != right.size()) report.fail("different file sets");
  for (const auto& [name, bytes] : left) {
    ++report.cases;
    const auto it = right.find(name);
    if (it == right.end()) {
      report.fail("missing " + name);
    } else if (it->second != bytes) {
      report.fail("bytes differ: " + name);
    }
  }
  return report;
}

/// Random corpus of three-vote samples; gold is the native majority.
inline std::vector<Sample> random_native_corpus(std::mt19937_64& rng, std::size_t samples, std::size_t annotators) {
  std::vector<Sample> corpus;
  for (std::size_t i = 0; i < samples; ++i) {
    Sample s = make_sample("r" + std::to_string(i));
    std::set<std::size_t> picked;
    while (picked.size() < 3) picked.insert(rng() % annotators);
    const double bias = static_cast<double>(rng() % 100) / 100.0;
    for (auto a : picked) {
      const bool off = static_cast<double>(rng() % 100) / 100.0 < bias;
      s.native_votes.push_back({"a" + std::to_string(a), off ? Label::Offensive : Label::NonOffensive});
    }
    s.gold_label = native_majority(s);
    corpus.push_back(std::move(s));
  }
  return corpus;
}

/// Pooled agreement of native votes with the majority never drops below 2/3.
inline PropertyReport majority_floor(std::size_t corpora, std::uint64_t seed) {
  PropertyReport report;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < corpora; ++i, ++report.cases) {
    const auto corpus = random_native_corpus(rng, 1 + rng() % 200, 3 + rng() % 40);
    const auto r = eval::annotation_level_agreement(corpus);
    // num / den >= 2/3, compared exactly.
    if (3 * r.num < 2 * r.den || r.den != 3 * corpus.size()) {
      report.fail("corpus " + std::to_string(i) + ": " + std::to_string(r.num) + "/" + std::to_string(r.den));
    }
  }
  return report;
}

/// Pearson statistic from expected counts, p from the df=1 closed form.
struct ChiSquareOracle {
  double chi2 = 0.0;
  double p = 1.0;
};

inline ChiSquareOracle chi_square_oracle(const eval::ContingencyTable2x2& t) {
  const double obs[2][2] = {{double(t.a), double(t.b)}, {double(t.c), double(t.d)}};
  const double n = double(t.total());
  ChiSquareOracle out;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double expected = (obs[i][0] + obs[i][1]) * (obs[0][j] + obs[1][j]) / n;
      out.chi2 += (obs[i][j] - expected) * (obs[i][j] - expected) / expected;
    }
  }
  out.p = std::erfc(std::sqrt(out.chi2 / 2.0));
  return out;
}

struct AnnotatorOracle {
  std::map<std::string, std::pair<std::size_t, std::size_t>> per;  // matches, count
  std::vector<double> kept;                                         // sorted accuracies
  double mean = 0.0;
  double population_std = 0.0;
  double median = 0.0;
  /// Keyed by the lower bound in hundredths; 0 is the underflow bin.
  std::map<int, std::size_t> bins;
};

inline AnnotatorOracle annotator_oracle(const std::vector<Sample>& corpus, std::size_t threshold) {
  AnnotatorOracle o;
  for (const auto& s : corpus) {
    int off = 0;
    for (const auto& v : s.native_votes) off += v.label == Label::Offensive;
    const auto majority = off >= 2 ? Label::Offensive : Label::NonOffensive;
    for (const auto& v : s.native_votes) {
      auto& [matches, count] = o.per[v.annotator_id];
      matches += v.label == majority;
      ++count;
    }
  }
  for (const auto& [id, mc] : o.per) {
    if (mc.second <= threshold) continue;
    o.kept.push_back(double(mc.first) / double(mc.second));
    const auto hundredths = int(100 * mc.first / mc.second);
    const int lo = hundredths < 60 ? 0 : std::min(98, hundredths - hundredths % 2);
    ++o.bins[lo];
  }
  std::sort(o.kept.begin(), o.kept.end());
  if (o.kept.empty()) return o;
  double sum = 0.0;
  for (double x : o.kept) sum += x;
  o.mean = sum / double(o.kept.size());
  double sq = 0.0;
  for (double x : o.kept) sq += (x - o.mean) * (x - o.mean);
  o.population_std = std::sqrt(sq / double(o.kept.size()));
  const auto k = o.kept.size();
  o.median = k % 2 ? o.kept[k / 2] : (o.kept[k / 2 - 1] + o.kept[k / 2]) / 2.0;
  return o;
}

/// Compares eval::annotator_stats with the oracle; empty string when they agree.
inline std::string annotator_mismatch(const std::vector<Sample>& corpus, std::size_t threshold) {
  const auto o = annotator_oracle(corpus, threshold);
  const auto s = eval::annotator_stats(corpus, threshold);
  const auto close = [](double x, double y) { return std::abs(x - y) < 1e-12; };
  if (s.total_annotators != o.per.size()) return "total_annotators";
  if (s.filtered_count != o.kept.size()) return "filtered_count";
  for (const auto& [id, mc] : o.per) {
    const auto it = s.per_annotator.find(id);
    if (it == s.per_annotator.end() || it->second.matches != mc.first || it->second.count != mc.second) {
      return "per_annotator " + id;
    }
  }
  if (!close(s.mean_acc, o.mean)) return "mean";
  if (!close(s.std_acc, o.population_std)) return "std";
  if (!close(s.median_acc, o.median)) return "median";
  std::map<int, std::size_t> got;
  std::size_t binned = 0;
  for (const auto& b : s.histogram) {
    if (b.count) got[b.lo_hundredths] = b.count;
    binned += b.count;
  }
  if (got != o.bins || binned != o.kept.size()) return "histogram";
  return {};
}

inline PropertyReport annotator_stats_agree(std::size_t corpora, std::uint64_t seed) {
  PropertyReport report;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < corpora; ++i, ++report.cases) {
    const auto corpus = random_native_corpus(rng, 1 + rng() % 150, 3 + rng() % 30);
    const std::size_t threshold = rng() % 12;
    if (const auto diff = annotator_mismatch(corpus, threshold); !diff.empty()) {
      report.fail("corpus " + std::to_string(i) + ": " + diff);
    }
  }
  return report;
}

}  // namespace c3mod::testing
