#pragma once

#include "rwmlab/diffusion.hpp"
#include "rwmlab/errors.hpp"
#include "rwmlab/linalg.hpp"
#include "rwmlab/targets.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace rwmlab {

const char* version() noexcept;

enum ExitCode : int { kExitSuccess = 0, kExitUsage = 1, kExitVerification = 2 };

// Schema violation; the message starts with the offending field path.
class ConfigError : public UsageError {
 public:
  ConfigError(const std::string& field_path, const std::string& problem)
      : UsageError(field_path + ": " + problem), field_(field_path) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// "identity", "gamma", "sigma-inverse", "estimated" or an explicit matrix.
using LambdaSpec = std::variant<std::string, Matrix>;
// A positive number, "optimal", or (diffuse only) "standardized".
using LSpec = std::variant<double, std::string>;

struct AcfSpec {
  std::string function;  // "log-pdf" or "linear"
  Vector v;              // coefficients for "linear"
  std::vector<double> lags;
};

struct ExperimentConfig {
  std::string kind;  // tune | sample | diffuse | compare | verify | scan
  nlohmann::json target;
  std::vector<nlohmann::json> family;
  std::optional<LambdaSpec> lambda;
  std::optional<LSpec> l;
  std::optional<Eigen::Index> d, k, r;
  std::optional<double> horizon, dt, stride;
  std::optional<std::size_t> n_replicas, n_samples, n_pairs;
  std::optional<Vector> start;  // first block; remaining blocks start in stationarity
  Scheme scheme = Scheme::euler;
  SdeConvention convention = SdeConvention::generator;
  std::vector<double> l_grid;
  std::optional<AcfSpec> acf;
  std::vector<double> ks_times;
  std::optional<double> ks_threshold;
  double threshold_sigmas = 5.0;
  double corruption_factor = 1.1;
  bool negative_controls = true;
  std::uint64_t seed = 0;
  std::string output_dir;
  // Validated document with CLI overrides applied; embedded in the manifest.
  nlohmann::json document;
};

struct ConfigOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> expected_kind;
};

// Validates the whole document before anything runs. Unknown fields, missing
// fields and type errors raise ConfigError naming the field path.
ExperimentConfig parse_config(nlohmann::json document, const ConfigOverrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& file, const ConfigOverrides& overrides = {});

TargetPtr build_target(const nlohmann::json& spec, const std::string& path = "config.target");

// Hash of the document without output_dir, so relocated reruns share it.
std::string config_hash(const nlohmann::json& document);

struct RunResult {
  int exit_code = kExitSuccess;
  std::filesystem::path output_dir;
  nlohmann::json report;
  std::vector<std::string> artifacts;
};

// Computes everything in memory, then writes report.json, the kind's CSV
// files and manifest.json into cfg.output_dir. Throws UsageError before
// writing anything if the configuration cannot be run.
RunResult run_experiment(const ExperimentConfig& cfg, unsigned threads);

// CLI entry points; diagnostics go to `log`.
int run(const std::filesystem::path& config_path, const ConfigOverrides& overrides, unsigned threads,
        std::ostream& log);

struct ReproduceResult {
  bool identical = false;
  std::vector<std::string> mismatches;
};
// Reruns the manifest's embedded config in a scratch directory and
// byte-compares every artifact (and checks the recorded hashes).
ReproduceResult reproduce_manifest(const std::filesystem::path& manifest_path, std::optional<std::uint64_t> seed,
                                   unsigned threads);
int reproduce(const std::filesystem::path& manifest_path, std::optional<std::uint64_t> seed, unsigned threads,
              std::ostream& log);

}  // namespace rwmlab
