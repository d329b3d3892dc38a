// gtseq: command-line front end for the experiment modes.

#include <gtseq/config.hpp>
#include <gtseq/records.hpp>
#include <gtseq/runner.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

int resolve_threads(const Options& opt, const gtseq::ExperimentConfig& cfg) {
  if (opt.threads) return *opt.threads;
  if (const char* env = std::getenv("GTSEQ_THREADS"); env && *env) {
    try {
      std::size_t used = 0;
      int n = std::stoi(env, &used);
      if (used == std::string(env).size() && n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw gtseq::ValidationError(0, std::string("GTSEQ_THREADS must be a positive integer, got '") + env + "'");
  }
  return cfg.threads > 0 ? cfg.threads : 1;
}

int run(gtseq::Mode mode, const Options& opt) {
  using namespace gtseq;
  std::ifstream in(opt.config, std::ios::binary);
  if (!in) {
    std::cerr << "gtseq: cannot read config '" << opt.config << "'\n";
    return kExitIo;
  }
  std::stringstream text;
  text << in.rdbuf();

  ExperimentConfig cfg;
  int threads = 1;
  try {
    cfg = parse_config(text.str());
    if (cfg.mode != mode) {
      throw ValidationError(0, "config mode '" + std::string(to_string(cfg.mode)) + "' does not match command '" +
                                   std::string(to_string(mode)) + "'");
    }
    if (opt.seed) cfg.seed = *opt.seed;
    if (!opt.out.empty()) cfg.out = opt.out;
    if (opt.format == "csv") cfg.format = OutputFormat::Csv;
    if (opt.format == "jsonl") cfg.format = OutputFormat::Jsonl;
    threads = resolve_threads(opt, cfg);
  } catch (const ValidationError& ex) {
    std::cerr << "gtseq: " << opt.config << ": " << ex.what() << '\n';
    return kExitValidation;
  }
  for (const auto& w : cfg.warnings) std::cerr << "gtseq: warning: " << w << '\n';

  RunResult result;
  try {
    result = run_experiment(cfg, threads);
  } catch (const std::exception& ex) {
    std::cerr << "gtseq: " << ex.what() << '\n';
    return kExitNumeric;
  }

  try {
    if (cfg.out.empty() || cfg.out == "-") {
      write_records(result.records, cfg.format, std::cout);
      std::cout.flush();
      if (!std::cout) throw IoError("write to standard output failed");
    } else {
      write_records(result.records, cfg.format, cfg.out);
    }
  } catch (const IoError& ex) {
    std::cerr << "gtseq: " << ex.what() << '\n';
    return kExitIo;
  }
  if (result.exit_code != kExitOk) {
    std::cerr << "gtseq: some rows carry error, mismatch or non-convergence flags\n";
  }
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unbiased prevalence estimation under inverse (negative multinomial) group testing"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every mode");

  Options opt;
  std::optional<gtseq::Mode> chosen;
  const std::pair<gtseq::Mode, const char*> modes[] = {
      {gtseq::Mode::Estimate, "Evaluate estimators at the [estimate] samples"},
      {gtseq::Mode::VerifyUnbiased, "Check E[estimate] = target by truncated expectation"},
      {gtseq::Mode::ScanProperness, "Find sample points with estimates outside the parameter space"},
      {gtseq::Mode::Identify, "Report identifiability of the configured error rates"},
      {gtseq::Mode::Simulate, "Compare simulated terminal frequencies with the exact pmf"},
      {gtseq::Mode::Bench, "Monte Carlo bias, MSE and standard error over the grid"},
  };
  for (const auto& [mode, help] : modes) {
    auto* sub = app.add_subcommand(std::string(gtseq::to_string(mode)), help);
    sub->add_option("--config", opt.config, "Experiment config file")->required();
    sub->add_option("--out", opt.out, "Output path (default: config 'out', else stdout)");
    sub->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"csv", "jsonl"}));
    sub->add_option("--seed", opt.seed, "Master seed (overrides config)");
    sub->add_option("--threads", opt.threads, "Worker threads (fallback: GTSEQ_THREADS, then config)")
        ->check(CLI::PositiveNumber);
    sub->callback([&chosen, mode = mode] { chosen = mode; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gtseq::kExitValidation;
  }
  return run(*chosen, opt);
}
