#include "rwmlab/experiment.hpp"

#include "rwmlab/diagnostics.hpp"
#include "rwmlab/identities.hpp"
#include "rwmlab/parallel.hpp"
#include "rwmlab/path_io.hpp"
#include "rwmlab/rwm.hpp"
#include "rwmlab/tuning.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <set>
#include <unistd.h>

#ifndef RWMLAB_VERSION
#define RWMLAB_VERSION "unknown"
#endif

namespace rwmlab {

const char* version() noexcept { return RWMLAB_VERSION; }

namespace {

using nlohmann::json;

// ---------------------------------------------------------------- parsing

std::string child(const std::string& path, const std::string& key) { return path + "." + key; }
std::string child(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
  return v;
}

double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) throw ConfigError(path, "must be positive");
  return v;
}

std::int64_t integer(const json& j, const std::string& path, std::int64_t min) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < min) throw ConfigError(path, "must be >= " + std::to_string(min));
  return v;
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

Vector vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], child(path, i));
  return v;
}

std::vector<double> number_list(const json& j, const std::string& path) {
  const Vector v = vector(j, path);
  return {v.data(), v.data() + v.size()};
}

// Row-major array of rows.
Matrix matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array()) throw ConfigError(child(path, 0), "expected an array of numbers");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const Vector row = vector(j[i], child(path, i));
    if (static_cast<std::size_t>(row.size()) != cols) throw ConfigError(child(path, i), "ragged matrix row");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

SpdMatrix spd(const json& j, const std::string& path) {
  try {
    return SpdMatrix(matrix(j, path));
  } catch (const ConfigError&) {
    throw;
  } catch (const UsageError& e) {
    throw ConfigError(path, e.what());
  }
}

void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path, const std::string& what) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(child(path, key), "unknown field for " + what);
  }
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(child(path, key), "required field is missing");
  return *it;
}

const std::set<std::string> kKinds = {"tune", "sample", "diffuse", "compare", "verify", "scan"};

std::set<std::string> allowed_keys(const std::string& kind) {
  std::set<std::string> keys = {"kind", "seed", "output_dir"};
  auto add = [&](std::initializer_list<const char*> more) { keys.insert(more.begin(), more.end()); };
  if (kind == "scan") {
    add({"family", "n_samples"});
    return keys;
  }
  add({"target", "k", "n_samples"});
  if (kind == "verify") {
    add({"n_pairs", "threshold_sigmas", "corruption_factor", "negative_controls"});
    return keys;
  }
  add({"lambda"});
  if (kind == "tune") return keys;
  add({"l", "r", "T", "stride", "n_replicas", "start", "acf"});
  if (kind == "sample") add({"d", "l_grid"});
  if (kind == "diffuse") add({"dt", "scheme", "sde_convention"});
  if (kind == "compare") add({"d", "dt", "scheme", "sde_convention", "ks_times", "ks_threshold"});
  return keys;
}

std::vector<std::string> required_keys(const std::string& kind) {
  if (kind == "tune") return {"target", "lambda"};
  if (kind == "sample" || kind == "compare") return {"target", "lambda", "l", "d", "r", "T", "stride", "n_replicas"};
  if (kind == "diffuse") return {"target", "lambda", "l", "r", "T", "stride", "n_replicas"};
  if (kind == "verify") return {"target", "n_samples"};
  return {"family", "n_samples"};
}

}  // namespace

TargetPtr build_target(const json& spec, const std::string& path) {
  if (!spec.is_object()) throw ConfigError(path, "expected an object");
  const std::string name = string(require(spec, "name", path), child(path, "name"));
  try {
    if (name == "standard-normal") {
      only_keys(spec, {"name", "k"}, path, "target 'standard-normal'");
      return make_standard_normal(integer(require(spec, "k", path), child(path, "k"), 1));
    }
    if (name == "gaussian") {
      // Exactly one of "cov" (Gamma) and "precision" (Gamma^{-1} = Sigma).
      only_keys(spec, {"name", "mean", "cov", "precision"}, path, "target 'gaussian'");
      const Vector mean = vector(require(spec, "mean", path), child(path, "mean"));
      const bool has_cov = spec.contains("cov"), has_precision = spec.contains("precision");
      if (has_cov == has_precision) throw ConfigError(path, "give exactly one of \"cov\" and \"precision\"");
      const std::string key = has_cov ? "cov" : "precision";
      const SpdMatrix m = spd(spec[key], child(path, key));
      if (m.dim() != mean.size()) throw ConfigError(child(path, key), "dimension does not match mean");
      return make_gaussian(mean, has_cov ? m : m.inverse());
    }
    if (name == "logistic") {
      only_keys(spec, {"name"}, path, "target 'logistic'");
      return make_logistic_1d();
    }
    if (name == "scale-family") {
      only_keys(spec, {"name", "base", "scales", "rotation"}, path, "target 'scale-family'");
      const std::string base = string(require(spec, "base", path), child(path, "base"));
      TargetPtr base1d;
      if (base == "logistic") {
        base1d = make_logistic_1d();
      } else if (base == "standard-normal") {
        base1d = make_standard_normal(1);
      } else {
        throw ConfigError(child(path, "base"), "expected \"logistic\" or \"standard-normal\"");
      }
      const Vector scales = vector(require(spec, "scales", path), child(path, "scales"));
      const json& rot = require(spec, "rotation", path);
      Matrix q;
      if (rot.is_string()) {
        if (rot.get<std::string>() != "identity") throw ConfigError(child(path, "rotation"), "expected \"identity\" or a matrix");
        q = Matrix::Identity(scales.size(), scales.size());
      } else {
        q = matrix(rot, child(path, "rotation"));
      }
      try {
        return make_rotated_scale_family(base1d, scales, q);
      } catch (const ConfigError&) {
        throw;
      } catch (const UsageError& e) {
        throw ConfigError(path, e.what());
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const UsageError& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(child(path, "name"), "unknown target '" + name + "'");
}

std::string config_hash(const json& document) {
  json copy = document;
  copy.erase("output_dir");
  return hex64(fnv1a64(copy.dump()));
}

ExperimentConfig parse_config(json doc, const ConfigOverrides& overrides) {
  const std::string root = "config";
  if (!doc.is_object()) throw ConfigError(root, "expected a JSON object");
  if (overrides.seed) doc["seed"] = *overrides.seed;
  if (overrides.output_dir) doc["output_dir"] = *overrides.output_dir;

  ExperimentConfig cfg;
  cfg.kind = string(require(doc, "kind", root), "config.kind");
  if (!kKinds.count(cfg.kind)) throw ConfigError("config.kind", "unknown experiment kind '" + cfg.kind + "'");
  if (overrides.expected_kind && *overrides.expected_kind != cfg.kind) {
    throw ConfigError("config.kind", "is '" + cfg.kind + "' but the '" + *overrides.expected_kind + "' command was used");
  }
  only_keys(doc, allowed_keys(cfg.kind), root, "kind '" + cfg.kind + "'");
  for (const auto& key : required_keys(cfg.kind)) require(doc, key, root);

  const json& seed = require(doc, "seed", root);
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    throw ConfigError("config.seed", "expected a non-negative integer");
  }
  cfg.seed = seed.get<std::uint64_t>();
  cfg.output_dir = string(require(doc, "output_dir", root), "config.output_dir");
  if (cfg.output_dir.empty()) throw ConfigError("config.output_dir", "must not be empty");

  auto opt_int = [&](const char* key, std::int64_t min) -> std::optional<std::int64_t> {
    if (!doc.contains(key)) return std::nullopt;
    return integer(doc[key], child(root, key), min);
  };
  auto opt_pos = [&](const char* key) -> std::optional<double> {
    if (!doc.contains(key)) return std::nullopt;
    return positive(doc[key], child(root, key));
  };

  if (auto v = opt_int("d", 2)) cfg.d = *v;
  if (auto v = opt_int("k", 1)) cfg.k = *v;
  if (auto v = opt_int("r", 1)) cfg.r = *v;
  if (auto v = opt_int("n_replicas", 1)) cfg.n_replicas = static_cast<std::size_t>(*v);
  if (auto v = opt_int("n_samples", 2)) cfg.n_samples = static_cast<std::size_t>(*v);
  if (auto v = opt_int("n_pairs", 1)) cfg.n_pairs = static_cast<std::size_t>(*v);
  cfg.horizon = opt_pos("T");
  cfg.stride = opt_pos("stride");
  cfg.dt = opt_pos("dt");
  cfg.ks_threshold = opt_pos("ks_threshold");
  if (auto v = opt_pos("threshold_sigmas")) cfg.threshold_sigmas = *v;
  if (auto v = opt_pos("corruption_factor")) cfg.corruption_factor = *v;
  if (doc.contains("negative_controls")) {
    if (!doc["negative_controls"].is_boolean()) throw ConfigError("config.negative_controls", "expected true or false");
    cfg.negative_controls = doc["negative_controls"].get<bool>();
  }

  Eigen::Index k = 0;
  if (doc.contains("target")) {
    cfg.target = doc["target"];
    k = build_target(cfg.target, "config.target")->dim();
    if (cfg.k && *cfg.k != k) throw ConfigError("config.k", "does not match the target dimension " + std::to_string(k));
  }
  if (doc.contains("family")) {
    const json& fam = doc["family"];
    if (!fam.is_array() || fam.size() < 2) throw ConfigError("config.family", "expected an array of at least two targets");
    for (std::size_t i = 0; i < fam.size(); ++i) {
      build_target(fam[i], child("config.family", i));
      cfg.family.push_back(fam[i]);
    }
  }

  if (doc.contains("lambda")) {
    const json& lam = doc["lambda"];
    if (lam.is_string()) {
      const std::string s = lam.get<std::string>();
      if (s != "identity" && s != "gamma" && s != "sigma-inverse" && s != "estimated") {
        throw ConfigError("config.lambda", "expected \"identity\", \"gamma\", \"sigma-inverse\", \"estimated\" or a matrix");
      }
      if (s == "estimated" && !cfg.n_samples) throw ConfigError("config.n_samples", "required when lambda is \"estimated\"");
      cfg.lambda = s;
    } else {
      const SpdMatrix m = spd(lam, "config.lambda");
      if (m.dim() != k) throw ConfigError("config.lambda", "must be " + std::to_string(k) + "x" + std::to_string(k));
      cfg.lambda = m.matrix();
    }
  }

  if (doc.contains("l")) {
    const json& l = doc["l"];
    if (l.is_string()) {
      const std::string s = l.get<std::string>();
      if (s == "optimal" || (s == "standardized" && cfg.kind == "diffuse")) {
        cfg.l = s;
      } else {
        throw ConfigError("config.l", cfg.kind == "diffuse" ? "expected a positive number, \"optimal\" or \"standardized\""
                                                            : "expected a positive number or \"optimal\"");
      }
    } else {
      cfg.l = positive(l, "config.l");
    }
  }

  if (cfg.d && cfg.r && *cfg.r > *cfg.d) throw ConfigError("config.r", "must not exceed d");
  if (cfg.horizon && cfg.stride) {
    if (*cfg.stride > *cfg.horizon) throw ConfigError("config.stride", "must not exceed T");
  }

  if (doc.contains("start")) {
    cfg.start = vector(doc["start"], "config.start");
    if (cfg.start->size() != k) throw ConfigError("config.start", "must have length " + std::to_string(k));
  }
  if (doc.contains("scheme")) {
    const std::string s = string(doc["scheme"], "config.scheme");
    if (s == "euler") {
      cfg.scheme = Scheme::euler;
    } else if (s == "tamed-euler") {
      cfg.scheme = Scheme::tamed_euler;
    } else {
      throw ConfigError("config.scheme", "expected \"euler\" or \"tamed-euler\"");
    }
  }
  if (doc.contains("sde_convention")) {
    const std::string s = string(doc["sde_convention"], "config.sde_convention");
    if (s == "generator") {
      cfg.convention = SdeConvention::generator;
    } else if (s == "as-displayed") {
      cfg.convention = SdeConvention::as_displayed;
    } else {
      throw ConfigError("config.sde_convention", "expected \"generator\" or \"as-displayed\"");
    }
  }
  if (doc.contains("l_grid")) {
    cfg.l_grid = number_list(doc["l_grid"], "config.l_grid");
    for (std::size_t i = 0; i < cfg.l_grid.size(); ++i) {
      if (!(cfg.l_grid[i] > 0.0)) throw ConfigError(child("config.l_grid", i), "must be positive");
    }
    const std::uint64_t streams_needed = (cfg.l_grid.size() + 1) * static_cast<std::uint64_t>(*cfg.n_replicas);
    if (streams_needed > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("config.l_grid", "too many replicas");
  }
  if (doc.contains("acf")) {
    const json& a = doc["acf"];
    const std::string p = "config.acf";
    if (!a.is_object()) throw ConfigError(p, "expected an object");
    only_keys(a, {"function", "v", "lags"}, p, "acf");
    if (cfg.start) throw ConfigError(p, "stationary autocorrelation needs a stationary start; remove 'start'");
    AcfSpec spec;
    spec.function = string(require(a, "function", p), p + ".function");
    if (spec.function == "linear") {
      spec.v = vector(require(a, "v", p), p + ".v");
      if (spec.v.size() != k) throw ConfigError(p + ".v", "must have length " + std::to_string(k));
    } else if (spec.function == "log-pdf") {
      if (a.contains("v")) throw ConfigError(p + ".v", "only used with function \"linear\"");
    } else {
      throw ConfigError(p + ".function", "expected \"linear\" or \"log-pdf\"");
    }
    spec.lags = number_list(require(a, "lags", p), p + ".lags");
    for (std::size_t i = 0; i < spec.lags.size(); ++i) {
      if (spec.lags[i] < 0.0 || spec.lags[i] > *cfg.horizon * (1 + 1e-9)) {
        throw ConfigError(child(p + ".lags", i), "must lie in [0, T]");
      }
    }
    if (*cfg.n_replicas < 30) throw ConfigError("config.n_replicas", "acf estimation needs at least 30 replicas");
    cfg.acf = spec;
  }
  if (cfg.kind == "compare") {
    cfg.ks_times = doc.contains("ks_times") ? number_list(doc["ks_times"], "config.ks_times")
                                            : std::vector<double>{*cfg.horizon};
    for (std::size_t i = 0; i < cfg.ks_times.size(); ++i) {
      if (cfg.ks_times[i] < 0.0 || cfg.ks_times[i] > *cfg.horizon * (1 + 1e-9)) {
        throw ConfigError(child("config.ks_times", i), "must lie in [0, T]");
      }
    }
    if (*cfg.n_replicas < 500) throw ConfigError("config.n_replicas", "marginal KS comparison needs at least 500 replicas");
  }
  if (cfg.kind != "scan" && cfg.kind != "verify" && cfg.n_replicas &&
      *cfg.n_replicas > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("config.n_replicas", "too large");
  }

  cfg.document = std::move(doc);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file, const ConfigOverrides& overrides) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read config " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(std::move(doc), overrides);
}

namespace {

// ---------------------------------------------------------------- helpers

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
void put(json& j, const char* key, const std::optional<T>& value) {
  if (value) j[key] = *value;
}

json to_json(const TuningReport& t) {
  json j = {{"omega_star", t.omega_star},
            {"h_tilde_star", t.h_tilde_star},
            {"lambda", to_json(t.lambda.matrix())},
            {"sigma_dot_lambda", t.sigma_dot_lambda},
            {"l_opt", t.l_opt},
            {"predicted_acceptance", t.predicted_acceptance},
            {"acceleration", t.acceleration},
            {"lambda_recommended", to_json(t.lambda_recommended.matrix())},
            {"worst_case_linear_slope", t.worst_case_linear_slope},
            {"recommended_linear_slope", t.recommended_linear_slope},
            {"speed_limit_linear", t.speed_limit_linear},
            {"sigma_estimated", t.sigma_estimated},
            {"gamma_estimated", t.gamma_estimated}};
  put(j, "speed_limit_logpi", t.speed_limit_logpi);
  put(j, "spectral_gap_exact", t.spectral_gap_exact);
  put(j, "spherical_slowdown", t.spherical_slowdown);
  put(j, "sigma_dot_lambda_se", t.sigma_dot_lambda_se);
  put(j, "l_opt_se", t.l_opt_se);
  return j;
}

json to_json(const IdentityReport& r) {
  json details = json::object();
  for (const auto& [name, value] : r.details) details[name] = value;
  return {{"identity", r.identity_name},
          {"target", r.target_name},
          {"comparison", r.comparison == Comparison::two_sided ? "two-sided" : "upper-bound"},
          {"rows", r.rows},
          {"cols", r.cols},
          {"estimate", r.estimate},
          {"reference", r.reference},
          {"standard_error", r.standard_error},
          {"threshold_sigmas", r.threshold_sigmas},
          {"abs_floor", r.abs_floor},
          {"verdict", r.pass ? "pass" : "fail"},
          {"n_samples", r.n_samples},
          {"dropped", r.dropped},
          {"seed", r.seed},
          {"stream", r.stream},
          {"negative_control", r.negative_control},
          {"details", details}};
}

json acceptance_summary(const std::vector<ChainPath>& paths, double theory) {
  std::uint64_t acc = 0, prop = 0;
  for (const auto& p : paths) {
    acc += p.accept_count;
    prop += p.proposal_count;
  }
  json j = {{"accepts", acc}, {"proposals", prop}, {"theory", theory}};
  if (prop > 0) {
    const RateEstimate e = empirical_acceptance(paths);
    j["empirical"] = e.rate;
    j["se"] = e.standard_error;
  }
  return j;
}

// Everything resolved from the configuration before any simulation runs.
struct Plan {
  TargetPtr target;
  SpdMatrix sigma;
  SpdMatrix gamma;
  std::optional<Matrix> sigma_se;
  bool sigma_estimated = false;
  bool gamma_estimated = false;
  std::optional<double> var_log_pdf;
  SpdMatrix lambda;
  std::optional<double> l;
};

RngStream estimation_stream(const ExperimentConfig& cfg, std::uint32_t index) {
  return RngStream(cfg.seed, stream_id(streams::kEstimation, index));
}

Plan make_plan(const ExperimentConfig& cfg) {
  TargetPtr target = build_target(cfg.target);
  const TargetInfo& info = target->info();
  const Eigen::Index k = target->dim();
  auto need_n = [&](const char* what) {
    if (!cfg.n_samples) throw ConfigError("config.n_samples", std::string("required to estimate ") + what);
    return *cfg.n_samples;
  };

  std::optional<SpdMatrix> sigma = info.sigma, gamma = info.gamma;
  std::optional<Matrix> sigma_se;
  bool sigma_est = false, gamma_est = false;
  if (!sigma) {
    RngStream rng = estimation_stream(cfg, 0);
    CovarianceEstimate e = estimate_sigma(*target, need_n("Sigma"), rng);
    sigma = e.value;
    sigma_se = e.standard_error;
    sigma_est = true;
  }
  if (!gamma) {
    RngStream rng = estimation_stream(cfg, 1);
    gamma = estimate_gamma(*target, need_n("Gamma"), rng).value;
    gamma_est = true;
  }
  std::optional<double> var_log_pdf = info.var_log_pdf;
  if (!var_log_pdf && cfg.n_samples) {
    RngStream rng = estimation_stream(cfg, 2);
    var_log_pdf = estimate_var_log_pdf(*target, *cfg.n_samples, rng).value;
  }

  SpdMatrix lambda = SpdMatrix::identity(k);
  if (cfg.lambda) {
    if (const auto* m = std::get_if<Matrix>(&*cfg.lambda)) {
      lambda = SpdMatrix(*m);
    } else {
      const std::string& s = std::get<std::string>(*cfg.lambda);
      if (s == "gamma") {
        lambda = *gamma;
      } else if (s == "sigma-inverse") {
        lambda = sigma->inverse();
      } else if (s == "estimated") {
        RngStream rng = estimation_stream(cfg, 3);
        lambda = estimate_gamma(*target, *cfg.n_samples, rng).value;
      }
    }
  }

  std::optional<double> l;
  if (cfg.l) {
    if (const auto* v = std::get_if<double>(&*cfg.l)) {
      l = *v;
    } else if (std::get<std::string>(*cfg.l) == "optimal") {
      l = optimal_l(*sigma, lambda);
    }
  }
  return Plan{std::move(target), std::move(*sigma), std::move(*gamma), std::move(sigma_se), sigma_est, gamma_est,
              var_log_pdf, std::move(lambda), l};
}

PathFunctional make_functional(const AcfSpec& spec, const TargetPtr& target) {
  const Eigen::Index k = target->dim();
  if (spec.function == "linear") {
    const Vector v = spec.v;
    return [v, k](const Eigen::Ref<const Vector>& y) { return v.dot(y.head(k)); };
  }
  return [target, k](const Eigen::Ref<const Vector>& y) { return target->log_pdf(y.head(k)); };
}

std::vector<double> acf_lags(const AcfSpec& spec) {
  std::vector<double> lags = spec.lags;
  if (lags.empty() || lags.front() != 0.0) lags.insert(lags.begin(), 0.0);
  return lags;
}

// Initial state for replica `rep`: stationary, or block 1 pinned and the other
// `blocks - 1` blocks drawn from the target with the replica's auxiliary stream.
InitialState initial_state(const ExperimentConfig& cfg, const Target& base, Eigen::Index blocks, std::size_t rep) {
  if (!cfg.start) return Stationary{};
  RngStream aux(cfg.seed, stream_id(streams::kAuxiliary, static_cast<std::uint32_t>(rep)));
  const Eigen::Index k = base.dim();
  Vector x(blocks * k);
  x.head(k) = *cfg.start;
  for (Eigen::Index b = 1; b < blocks; ++b) {
    Eigen::Ref<Vector> seg = x.segment(b * k, k);
    base.sample(aux, seg);
  }
  return x;
}

std::vector<ChainPath> rwm_replicas(const ExperimentConfig& cfg, const RwmConfig& rc, std::size_t n,
                                    std::uint32_t stream_offset, unsigned threads) {
  return parallel_map(n, threads, [&](std::size_t rep) {
    RngStream rng(cfg.seed, stream_id(streams::kRwm, stream_offset + static_cast<std::uint32_t>(rep)));
    return run_continuous(rc, initial_state(cfg, rc.target.base(), rc.d(), rep), rng);
  });
}

std::vector<ChainPath> diffusion_replicas(const ExperimentConfig& cfg, const DiffusionConfig& dc, unsigned threads) {
  return parallel_map(*cfg.n_replicas, threads, [&](std::size_t rep) {
    RngStream rng(cfg.seed, stream_id(streams::kDiffusion, static_cast<std::uint32_t>(rep)));
    return integrate(dc, initial_state(cfg, *dc.target, dc.r, rep), rng);
  });
}

std::size_t count_aborted(const std::vector<ChainPath>& paths) {
  std::size_t n = 0;
  for (const auto& p : paths) n += p.aborted ? 1 : 0;
  return n;
}

DiffusionConfig make_diffusion(const ExperimentConfig& cfg, const Plan& plan, std::optional<double> l) {
  DiffusionConfig dc(plan.target, plan.lambda, l, *cfg.r, *cfg.horizon, *cfg.stride, cfg.dt, plan.sigma);
  dc.scheme = cfg.scheme;
  dc.convention = cfg.convention;
  return dc;
}

json diffusion_summary(const DiffusionConfig& dc, const std::vector<ChainPath>& paths) {
  json j = {{"generator_rate", generator_rate(dc)},
            {"speed_factor", speed_factor(dc)},
            {"dt", dc.dt},
            {"scheme", dc.scheme == Scheme::euler ? "euler" : "tamed-euler"},
            {"sde_convention", dc.convention == SdeConvention::generator ? "generator" : "as-displayed"},
            {"standardized", dc.standardized()},
            {"aborted_replicas", count_aborted(paths)}};
  for (const auto& p : paths) {
    if (p.aborted) {
      j["first_abort"] = p.diagnostic;
      break;
    }
  }
  return j;
}

json acf_summary(const AcfEstimate& acf) {
  json j = {{"n_paths", acf.n_paths}};
  if (acf.lags.size() >= 4) {
    const SlopeEstimate s = acf_slope_at_zero(acf, 4);
    j["lag0_slope"] = s.slope;
    j["lag0_slope_se"] = s.standard_error;
  }
  return j;
}

json base_report(const ExperimentConfig& cfg, const Plan& plan) {
  return {{"kind", cfg.kind},
          {"target", plan.target->info().name},
          {"k", plan.target->dim()},
          {"seed", cfg.seed},
          {"lambda", to_json(plan.lambda.matrix())},
          {"sigma_dot_lambda", frobenius(plan.sigma, plan.lambda)}};
}

// Collected output of one experiment, written only after all work finishes.
struct Outputs {
  json report;
  std::vector<std::pair<std::string, std::function<void(const std::filesystem::path&)>>> files;
  int exit_code = kExitSuccess;
};

Outputs run_tune(const ExperimentConfig& cfg, unsigned) {
  const Plan plan = make_plan(cfg);
  TuningInputs in{plan.sigma, plan.gamma, plan.sigma_se, plan.gamma_estimated, plan.var_log_pdf,
                  plan.target->info().family};
  TuningReport t = make_tuning_report(in, plan.lambda);
  t.sigma_estimated = plan.sigma_estimated;
  Outputs out;
  out.report = base_report(cfg, plan);
  out.report["tuning"] = to_json(t);
  return out;
}

Outputs run_sample(const ExperimentConfig& cfg, unsigned threads) {
  const Plan plan = make_plan(cfg);
  const BlockProductTarget product(plan.target, *cfg.d);
  const RwmConfig rc(product, plan.lambda, *plan.l, *cfg.r, *cfg.horizon, *cfg.stride);
  const std::size_t n = *cfg.n_replicas;
  auto paths = std::make_shared<std::vector<ChainPath>>(rwm_replicas(cfg, rc, n, 0, threads));

  std::vector<AcceptanceRow> rows;
  auto row_for = [&](double l, const std::vector<ChainPath>& ps) {
    const RateEstimate e = empirical_acceptance(ps);
    return AcceptanceRow{l, e.rate, e.standard_error, acceptance_curve(l, plan.sigma, plan.lambda)};
  };
  rows.push_back(row_for(*plan.l, *paths));
  for (std::size_t g = 0; g < cfg.l_grid.size(); ++g) {
    // Counts only: record just the endpoints.
    const RwmConfig sweep(product, plan.lambda, cfg.l_grid[g], *cfg.r, *cfg.horizon, *cfg.horizon);
    const auto offset = static_cast<std::uint32_t>((g + 1) * n);
    rows.push_back(row_for(cfg.l_grid[g], rwm_replicas(cfg, sweep, n, offset, threads)));
  }

  Outputs out;
  out.report = base_report(cfg, plan);
  out.report["d"] = *cfg.d;
  out.report["r"] = *cfg.r;
  out.report["l"] = *plan.l;
  out.report["T"] = *cfg.horizon;
  out.report["n_replicas"] = n;
  out.report["acceptance"] = acceptance_summary(*paths, rows.front().theory);
  out.files.emplace_back("paths.csv", [paths](const auto& f) { write_paths_csv(f, *paths); });
  out.files.emplace_back("acceptance.csv", [rows](const auto& f) { write_acceptance_csv(f, rows); });
  if (cfg.acf) {
    const AcfEstimate acf = stationary_acf(*paths, make_functional(*cfg.acf, plan.target), acf_lags(*cfg.acf));
    out.report["acf"] = acf_summary(acf);
    out.files.emplace_back("acf.csv", [acf](const auto& f) { write_acf_csv(f, acf); });
  }
  return out;
}

Outputs run_diffuse(const ExperimentConfig& cfg, unsigned threads) {
  const Plan plan = make_plan(cfg);
  const DiffusionConfig dc = make_diffusion(cfg, plan, plan.l);
  auto paths = std::make_shared<std::vector<ChainPath>>(diffusion_replicas(cfg, dc, threads));
  Outputs out;
  out.report = base_report(cfg, plan);
  out.report["r"] = *cfg.r;
  if (plan.l) out.report["l"] = *plan.l;
  out.report["T"] = *cfg.horizon;
  out.report["n_replicas"] = *cfg.n_replicas;
  out.report["diffusion"] = diffusion_summary(dc, *paths);
  out.files.emplace_back("paths.csv", [paths](const auto& f) { write_paths_csv(f, *paths); });
  if (cfg.acf) {
    const AcfEstimate acf = stationary_acf(*paths, make_functional(*cfg.acf, plan.target), acf_lags(*cfg.acf));
    out.report["acf"] = acf_summary(acf);
    out.files.emplace_back("acf.csv", [acf](const auto& f) { write_acf_csv(f, acf); });
  }
  return out;
}

Outputs run_compare(const ExperimentConfig& cfg, unsigned threads) {
  const Plan plan = make_plan(cfg);
  const BlockProductTarget product(plan.target, *cfg.d);
  const RwmConfig rc(product, plan.lambda, *plan.l, *cfg.r, *cfg.horizon, *cfg.stride);
  const DiffusionConfig dc = make_diffusion(cfg, plan, plan.l);
  const auto rwm = rwm_replicas(cfg, rc, *cfg.n_replicas, 0, threads);
  const auto diff = diffusion_replicas(cfg, dc, threads);

  std::vector<KsRow> ks;
  ComparisonReport comparison;
  json ks_json = json::array();
  for (double t : cfg.ks_times) {
    const KsResult r = marginal_distance(rwm, diff, t, 0);
    ks.push_back({t, r.statistic, r.p_value});
    ks_json.push_back({{"t", t}, {"ks", r.statistic}, {"p", r.p_value}});
    if (cfg.ks_threshold) comparison.add("ks", t, r.statistic, *cfg.ks_threshold);
  }

  Outputs out;
  out.report = base_report(cfg, plan);
  out.report["d"] = *cfg.d;
  out.report["r"] = *cfg.r;
  out.report["l"] = *plan.l;
  out.report["T"] = *cfg.horizon;
  out.report["n_replicas"] = *cfg.n_replicas;
  out.report["acceptance"] = acceptance_summary(rwm, acceptance_curve(*plan.l, plan.sigma, plan.lambda));
  out.report["diffusion"] = diffusion_summary(dc, diff);
  out.report["ks"] = ks_json;
  if (cfg.ks_threshold) {
    out.report["ks_threshold"] = *cfg.ks_threshold;
    out.report["pass"] = comparison.all_pass();
    if (!comparison.all_pass()) out.exit_code = kExitVerification;
  }
  out.files.emplace_back("ks.csv", [ks](const auto& f) { write_ks_csv(f, ks); });
  if (cfg.acf) {
    const PathFunctional fn = make_functional(*cfg.acf, plan.target);
    const AcfEstimate a_rwm = stationary_acf(rwm, fn, acf_lags(*cfg.acf));
    const AcfEstimate a_diff = stationary_acf(diff, fn, acf_lags(*cfg.acf));
    out.report["acf"] = acf_summary(a_rwm);
    out.report["acf_diffusion"] = acf_summary(a_diff);
    out.files.emplace_back("acf.csv", [a_rwm](const auto& f) { write_acf_csv(f, a_rwm); });
    out.files.emplace_back("acf_diffusion.csv", [a_diff](const auto& f) { write_acf_csv(f, a_diff); });
  }
  return out;
}

Outputs run_verify(const ExperimentConfig& cfg, unsigned threads) {
  const TargetPtr target = build_target(cfg.target);
  SuiteSettings s;
  s.check.n = *cfg.n_samples;
  s.check.threshold_sigmas = cfg.threshold_sigmas;
  if (cfg.n_pairs) s.n_pairs = *cfg.n_pairs;
  s.seed = cfg.seed;
  s.threads = threads;
  s.negative_controls = cfg.negative_controls;
  s.corruption_factor = cfg.corruption_factor;
  const SuiteResult suite = run_identity_suite(target, s);

  json checks = json::array(), controls = json::array();
  for (const auto& r : suite.checks) checks.push_back(to_json(r));
  for (const auto& r : suite.negative_controls) controls.push_back(to_json(r));
  Outputs out;
  out.report = {{"kind", cfg.kind},
                {"target", target->info().name},
                {"k", target->dim()},
                {"seed", cfg.seed},
                {"checks", checks},
                {"negative_controls", controls},
                {"checks_pass", suite.checks_pass()},
                {"controls_detected", suite.controls_detected()},
                {"score_moments",
                 {{"orders", suite.moments.orders},
                  {"values", suite.moments.values},
                  {"standard_errors", suite.moments.standard_errors}}}};
  if (!suite.checks_pass()) out.exit_code = kExitVerification;
  return out;
}

Outputs run_scan(const ExperimentConfig& cfg, unsigned) {
  std::vector<TargetPtr> family;
  for (std::size_t i = 0; i < cfg.family.size(); ++i) family.push_back(build_target(cfg.family[i], child("config.family", i)));
  RngStream rng = estimation_stream(cfg, 4);
  const HdScan scan = hd_dependence_scan(family, *cfg.n_samples, rng);
  json rows = json::array();
  for (const auto& r : scan.rows) {
    rows.push_back({{"k", r.k},
                    {"gamma_sigma_over_k", r.gamma_sigma_over_k},
                    {"var_log_pdf_over_k", r.var_log_pdf_over_k},
                    {"spherical_gap", r.spherical_gap},
                    {"shaped_gap", r.shaped_gap}});
  }
  Outputs out;
  out.report = {{"kind", cfg.kind},
                {"seed", cfg.seed},
                {"rows", rows},
                {"linear_log_slope", scan.linear_log_slope},
                {"logpi_log_slope", scan.logpi_log_slope},
                {"linear_verdict", scan.linear_verdict},
                {"logpi_verdict", scan.logpi_verdict},
                {"growth_threshold", kHdGrowthThreshold}};
  out.files.emplace_back("scan.csv", [scan](const std::filesystem::path& f) {
    std::ofstream o(f, std::ios::binary | std::ios::trunc);
    o << "k,gamma_sigma_over_k,var_log_pdf_over_k,spherical_gap,shaped_gap\n";
    for (const auto& r : scan.rows) {
      o << r.k << ',' << format_double(r.gamma_sigma_over_k) << ',' << format_double(r.var_log_pdf_over_k) << ','
        << format_double(r.spherical_gap) << ',' << format_double(r.shaped_gap) << '\n';
    }
    if (!o) throw std::runtime_error("write failed: " + f.string());
  });
  return out;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  Outputs out;
  if (cfg.kind == "tune") {
    out = run_tune(cfg, threads);
  } else if (cfg.kind == "sample") {
    out = run_sample(cfg, threads);
  } else if (cfg.kind == "diffuse") {
    out = run_diffuse(cfg, threads);
  } else if (cfg.kind == "compare") {
    out = run_compare(cfg, threads);
  } else if (cfg.kind == "verify") {
    out = run_verify(cfg, threads);
  } else {
    out = run_scan(cfg, threads);
  }

  const std::filesystem::path dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  RunResult result;
  result.output_dir = dir;
  result.exit_code = out.exit_code;
  result.report = out.report;
  write_json(dir / "report.json", out.report);
  result.artifacts.push_back("report.json");
  for (const auto& [name, writer] : out.files) {
    writer(dir / name);
    result.artifacts.push_back(name);
  }

  json artifacts = json::array();
  for (const auto& name : result.artifacts) {
    const std::string bytes = read_bytes(dir / name);
    artifacts.push_back({{"file", name}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes))}});
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_json(dir / "manifest.json", {{"config_hash", config_hash(cfg.document)},
                                     {"seed", cfg.seed},
                                     {"version", version()},
                                     {"kind", cfg.kind},
                                     {"started_at", started_at},
                                     {"wall_clock_seconds", wall},
                                     {"exit_code", out.exit_code},
                                     {"artifacts", artifacts},
                                     {"config", cfg.document}});
  return result;
}

int run(const std::filesystem::path& config_path, const ConfigOverrides& overrides, unsigned threads,
        std::ostream& log) {
  try {
    const ExperimentConfig cfg = load_config(config_path, overrides);
    return run_experiment(cfg, threads).exit_code;
  } catch (const UsageError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

ReproduceResult reproduce_manifest(const std::filesystem::path& manifest_path, std::optional<std::uint64_t> seed,
                                   unsigned threads) {
  const json manifest = read_json(manifest_path);
  if (!manifest.is_object() || !manifest.contains("config") || !manifest.contains("artifacts") ||
      !manifest.contains("config_hash")) {
    throw UsageError(manifest_path.string() + ": not a run manifest");
  }
  ReproduceResult result;
  if (config_hash(manifest["config"]) != manifest["config_hash"].get<std::string>()) {
    result.mismatches.push_back("config: embedded config does not match config_hash");
  }
  const std::filesystem::path original = manifest_path.parent_path();
  for (const auto& a : manifest["artifacts"]) {
    const std::filesystem::path file = original / a.at("file").get<std::string>();
    if (!std::filesystem::exists(file)) throw UsageError("missing artifact " + file.string());
  }

  const std::filesystem::path scratch =
      std::filesystem::temp_directory_path() /
      ("rwmlab-reproduce-" + std::to_string(::getpid()) + "-" +
       hex64(fnv1a64(manifest_path.string() + utc_now() +
                     std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()))));
  ConfigOverrides ov;
  ov.output_dir = scratch.string();
  ov.seed = seed;
  try {
    const ExperimentConfig cfg = parse_config(manifest["config"], ov);
    const RunResult rerun = run_experiment(cfg, threads);
    std::set<std::string> recorded;
    for (const auto& a : manifest["artifacts"]) {
      const std::string name = a.at("file").get<std::string>();
      recorded.insert(name);
      const std::string before = read_bytes(original / name);
      if (hex64(fnv1a64(before)) != a.at("fnv1a64").get<std::string>()) {
        result.mismatches.push_back(name + ": content no longer matches the recorded hash");
      }
      if (!std::filesystem::exists(scratch / name)) {
        result.mismatches.push_back(name + ": not produced by the rerun");
      } else if (read_bytes(scratch / name) != before) {
        result.mismatches.push_back(name + ": rerun output differs");
      }
    }
    for (const auto& name : rerun.artifacts) {
      if (!recorded.count(name)) result.mismatches.push_back(name + ": produced by the rerun but not recorded");
    }
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove_all(scratch, ec);
    throw;
  }
  std::error_code ec;
  std::filesystem::remove_all(scratch, ec);
  result.identical = result.mismatches.empty();
  return result;
}

int reproduce(const std::filesystem::path& manifest_path, std::optional<std::uint64_t> seed, unsigned threads,
              std::ostream& log) {
  try {
    const ReproduceResult r = reproduce_manifest(manifest_path, seed, threads);
    for (const auto& m : r.mismatches) log << "mismatch: " << m << '\n';
    if (r.identical) log << "identical\n";
    return r.identical ? kExitSuccess : kExitVerification;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace rwmlab
