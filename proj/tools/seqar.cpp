// seqar: batch driver for the sequential model-selection estimator.
//
//   seqar <verb> --config FILE [--seed N] [--out DIR]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "seqar/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::optional<std::size_t> workers_from_env() {
  const char* raw = std::getenv("SEQAR_WORKERS");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string text(raw);
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value == 0) {
    throw seqar::ConfigError("SEQAR_WORKERS", "expected a positive integer, got '" + text + "'");
  }
  return value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential model-selection estimator for varying-coefficient autoregression"};
  app.set_version_flag("--version", std::string(seqar::kVersion));
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  const std::pair<const char*, const char*> verbs[] = {
      {"simulate", "simulate observation paths"},
      {"estimate", "run the pointwise sequential procedure"},
      {"select", "run model selection on one path"},
      {"risk", "Monte Carlo risk of the family and the selected estimator"},
      {"oracle-check", "risk ratios against the oracle bound"},
      {"diagnostics", "moment diagnostics of the regression noise"},
      {"validate", "check a configuration and print resolved defaults"},
  };
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "configuration file (JSON)")->required();
    if (std::string_view(name) != "validate") {
      sub->add_option("--seed", seed, "base seed, overrides run.seed");
      sub->add_option("--out", out_dir, "output directory, overrides run.output");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  seqar::ExperimentConfig cfg;
  try {
    std::optional<seqar::Mode> mode;
    if (verb != "validate") mode = seqar::parse_mode(verb);
    cfg = seqar::load_config(config_path, mode);
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.output = *out_dir;
    if (auto w = workers_from_env()) cfg.workers = *w;
  } catch (const seqar::ConfigError& e) {
    std::cerr << "seqar: configuration error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (verb == "validate") {
    std::cout << seqar::resolved_config(cfg).dump(2) << '\n';
    return kExitOk;
  }

  try {
    const auto artifacts = seqar::run_experiment(cfg, cfg.output);
    for (const auto& a : artifacts) std::cout << (std::filesystem::path(cfg.output) / a).string() << '\n';
  } catch (const std::invalid_argument& e) {
    std::cerr << "seqar: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "seqar: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
