// SPDX-License-Identifier: Apache-2.0
//
// ucagents: run, score, replay and inspect deliberation benchmarks.
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 the run completed
// but some cases failed (or some recordings did not replay).

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "ucagents/harness.hpp"

namespace {

using namespace ucagents;

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kCaseFailures = 2;

struct RunArgs {
  std::string dataset;
  std::string config;
  std::string out;
  int trials = 0;
  int parallel = 0;
  bool record = false;
  bool quiet = false;
};

int cmd_run(const RunArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.trials > 0) cfg.trials = a.trials;
  if (a.parallel > 0) cfg.max_parallel = a.parallel;
  const auto dataset = ingest(a.dataset, IngestOptions{cfg.max_image_bytes});
  auto backend = make_backend(cfg.backend);

  BenchmarkOptions opts;
  opts.record = a.record;
  if (!a.quiet) {
    opts.on_case = [](const CaseRow& r) {
      std::fprintf(stderr, "[trial %d] %-24s %s\n", r.trial, r.case_id.c_str(),
                   r.failure ? std::string(to_string(*r.failure)).c_str()
                             : (std::string(1, *r.answer) + (r.correct() ? " correct" : " wrong")).c_str());
    };
  }
  const auto result = run_benchmark(dataset, cfg, *backend, opts);
  emit_report(result.report, cfg.output_dir);
  std::cout << render_report_table(result.report);
  return result.report.unanswered() > 0 ? kCaseFailures : kOk;
}

int cmd_score(const std::string& dir, const std::string& config, const std::string& out) {
  PriceTable prices;
  if (!config.empty()) prices = load_run_config(config).prices;
  const auto report = score_transcripts(dir, prices);
  if (!out.empty()) emit_report(report, out);
  std::cout << render_report_table(report);
  return report.unanswered() > 0 ? kCaseFailures : kOk;
}

int cmd_replay(const std::string& dir) {
  const auto outcomes = replay_directory(dir);
  int mismatched = 0;
  for (const auto& o : outcomes) {
    std::cout << (o.matched ? "MATCH    " : "MISMATCH ") << o.file.string();
    if (!o.message.empty()) std::cout << "  (" << o.message << ")";
    std::cout << "\n";
    mismatched += !o.matched;
  }
  std::cout << outcomes.size() - mismatched << "/" << outcomes.size() << " recordings replayed identically\n";
  return mismatched > 0 ? kCaseFailures : kOk;
}

int cmd_inspect(const std::string& file, bool as_json) {
  const Transcript t = load_transcript(file);
  if (as_json) {
    std::cout << to_json(t).dump(2) << "\n";
    return kOk;
  }
  std::cout << render_trace(t);
  const auto ledger = ledger_from_transcript(t);
  std::cout << "\ncalls: " << ledger.api_calls()
            << "  tokens(K): " << format_token_pair(ledger.input_tokens(), ledger.output_tokens()) << "\n";
  if (const auto h = hypotheses_from_transcript(t); !h.empty()) {
    std::printf("trajectory entropy: %.3f bits over %zu hypotheses\n", trajectory_entropy(h).entropy_bits, h.size());
  }
  const auto issues = structural_violations(t);
  for (const auto& v : issues) std::cout << "violation: " << v << "\n";
  return issues.empty() ? kOk : kCaseFailures;
}

int cmd_templates(const std::string& dir) {
  TemplateSet{}.write(dir);
  std::cout << "wrote default templates to " << dir << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-tier multi-agent deliberation for medical visual question answering"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a benchmark and write transcripts plus a report");
  run_cmd->add_option("dataset", run.dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-c,--config", run.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--out", run.out, "Output directory (overrides the config)");
  run_cmd->add_option("--trials", run.trials, "Number of trials (overrides the config)")->check(CLI::PositiveNumber);
  run_cmd->add_option("--parallel", run.parallel, "Concurrent cases (overrides the config)")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--record", run.record, "Also write per-case recordings for replay");
  run_cmd->add_flag("-q,--quiet", run.quiet, "No per-case progress on stderr");

  std::string score_dir, score_config, score_out;
  auto* score_cmd = app.add_subcommand("score", "Rebuild the report from saved transcripts");
  score_cmd->add_option("transcripts", score_dir, "Transcript directory")->required()->check(CLI::ExistingDirectory);
  score_cmd->add_option("-c,--config", score_config, "Run configuration, for prices")->check(CLI::ExistingFile);
  score_cmd->add_option("-o,--out", score_out, "Write report.json and report.txt here");

  std::string replay_dir;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run recorded cases offline and compare verdicts");
  replay_cmd->add_option("recordings", replay_dir, "Recording directory")->required()->check(CLI::ExistingDirectory);

  std::string inspect_file;
  bool inspect_json = false;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print one transcript as a readable trace");
  inspect_cmd->add_option("transcript", inspect_file, "Transcript file")->required()->check(CLI::ExistingFile);
  inspect_cmd->add_flag("--json", inspect_json, "Print the raw JSON instead");

  std::string templates_dir;
  auto* templates_cmd = app.add_subcommand("templates", "Write the default prompt templates for editing");
  templates_cmd->add_option("dir", templates_dir, "Target directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*score_cmd) return cmd_score(score_dir, score_config, score_out);
    if (*replay_cmd) return cmd_replay(replay_dir);
    if (*inspect_cmd) return cmd_inspect(inspect_file, inspect_json);
    if (*templates_cmd) return cmd_templates(templates_dir);
  } catch (const ucagents::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
