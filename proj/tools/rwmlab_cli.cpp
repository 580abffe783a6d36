#include "rwmlab/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

void print_tuning_table(const nlohmann::json& report) {
  const auto& t = report.at("tuning");
  auto row = [](const char* name, const nlohmann::json& value) {
    if (value.is_number()) {
      std::printf("  %-28s %.6g\n", name, value.get<double>());
    } else {
      std::printf("  %-28s %s\n", name, value.dump().c_str());
    }
  };
  std::printf("target %s (k = %lld)\n", report.at("target").get<std::string>().c_str(),
              static_cast<long long>(report.at("k").get<std::int64_t>()));
  row("omega*", t.at("omega_star"));
  row("h(omega*)", t.at("h_tilde_star"));
  row("Sigma:Lambda", t.at("sigma_dot_lambda"));
  row("l_opt", t.at("l_opt"));
  if (t.contains("l_opt_se")) row("l_opt se", t.at("l_opt_se"));
  row("predicted acceptance", t.at("predicted_acceptance"));
  row("acceleration", t.at("acceleration"));
  row("worst linear slope", t.at("worst_case_linear_slope"));
  row("worst slope, Lambda=Gamma", t.at("recommended_linear_slope"));
  row("speed limit (linear)", t.at("speed_limit_linear"));
  if (t.contains("speed_limit_logpi")) row("speed limit (log pi)", t.at("speed_limit_logpi"));
  if (t.contains("spectral_gap_exact")) row("spectral gap", t.at("spectral_gap_exact"));
  if (t.contains("spherical_slowdown")) row("spherical slowdown", t.at("spherical_slowdown"));
  row("recommended Lambda", t.at("lambda_recommended"));
}

int run_kind(const std::string& kind, const CommonFlags& flags, const CLI::App& sub) {
  rwmlab::ConfigOverrides ov;
  ov.expected_kind = kind;
  if (sub.count("--out")) ov.output_dir = flags.out;
  if (sub.count("--seed")) ov.seed = flags.seed;
  try {
    const auto cfg = rwmlab::load_config(flags.config, ov);
    const auto result = rwmlab::run_experiment(cfg, flags.threads);
    if (kind == "tune") print_tuning_table(result.report);
    std::fprintf(stderr, "wrote %zu artifacts to %s\n", result.artifacts.size() + 1,
                 result.output_dir.string().c_str());
    if (result.exit_code == rwmlab::kExitVerification) std::fprintf(stderr, "verification failed\n");
    return result.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return rwmlab::kExitUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-IID random walk Metropolis experiments"};
  app.set_version_flag("--version", std::string(rwmlab::version()));
  app.require_subcommand(1);

  CommonFlags flags;
  const std::pair<const char*, const char*> kinds[] = {
      {"tune", "Optimal scaling, shaping and speed limits"},
      {"sample", "Simulate the accelerated RWM chain"},
      {"diffuse", "Simulate the limiting Langevin diffusion"},
      {"compare", "Compare RWM and diffusion marginals and autocorrelations"},
      {"verify", "Run the score identity checks"},
      {"scan", "Dimension dependence of the speed limits"},
  };
  for (const auto& [name, help] : kinds) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "Output directory (overrides output_dir)");
    sub->add_option("--seed", flags.seed, "Seed (overrides seed)");
    sub->add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
  }

  std::string manifest;
  std::uint64_t repro_seed = 0;
  unsigned repro_threads = 1;
  CLI::App* repro = app.add_subcommand("reproduce", "Rerun a manifest and byte-compare its artifacts");
  repro->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  repro->add_option("--seed", repro_seed, "Rerun with a different seed");
  repro->add_option("--threads", repro_threads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rwmlab::kExitUsage;
  }

  if (repro->parsed()) {
    std::optional<std::uint64_t> seed;
    if (repro->count("--seed")) seed = repro_seed;
    return rwmlab::reproduce(manifest, seed, repro_threads, std::cerr);
  }
  for (const auto& [name, help] : kinds) {
    const CLI::App* sub = app.get_subcommand(name);
    if (sub->parsed()) return run_kind(name, flags, *sub);
  }
  return rwmlab::kExitUsage;
}
