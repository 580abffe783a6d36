#pragma once

#include "rwmlab/diagnostics.hpp"
#include "rwmlab/rwm.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace rwmlab {

// Shortest text that round-trips the value exactly (%.17g).
std::string format_double(double value);

// replica,t,coord_1..coord_n with one row per replica and grid time.
void write_paths_csv(const std::filesystem::path& file, const std::vector<ChainPath>& paths);

// lag,value,se
void write_acf_csv(const std::filesystem::path& file, const AcfEstimate& acf);

struct AcceptanceRow {
  double l = 0.0;
  double empirical = 0.0;
  double se = 0.0;
  double theory = 0.0;
};
// l,empirical,se,theory
void write_acceptance_csv(const std::filesystem::path& file, const std::vector<AcceptanceRow>& rows);

struct KsRow {
  double t = 0.0;
  double ks = 0.0;
  double p = 0.0;
};
// t,ks,p
void write_ks_csv(const std::filesystem::path& file, const std::vector<KsRow>& rows);

// Writes `dump(2)` plus a trailing newline.
void write_json(const std::filesystem::path& file, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& file);

std::string read_bytes(const std::filesystem::path& file);
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace rwmlab
