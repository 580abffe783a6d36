#include "rwmlab/path_io.hpp"

#include "rwmlab/errors.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace rwmlab {
namespace {

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

void close_checked(std::ofstream& out, const std::filesystem::path& file) {
  out.close();
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_paths_csv(const std::filesystem::path& file, const std::vector<ChainPath>& paths) {
  auto out = open_out(file);
  const Eigen::Index cols = paths.empty() ? 0 : paths.front().states.cols();
  std::string line = "replica,t";
  for (Eigen::Index c = 0; c < cols; ++c) line += ",coord_" + std::to_string(c + 1);
  out << line << '\n';
  for (std::size_t rep = 0; rep < paths.size(); ++rep) {
    const ChainPath& p = paths[rep];
    for (std::size_t i = 0; i < p.times.size(); ++i) {
      line = std::to_string(rep) + ',' + format_double(p.times[i]);
      for (Eigen::Index c = 0; c < p.states.cols(); ++c) {
        line += ',';
        line += format_double(p.states(static_cast<Eigen::Index>(i), c));
      }
      out << line << '\n';
    }
  }
  close_checked(out, file);
}

void write_acf_csv(const std::filesystem::path& file, const AcfEstimate& acf) {
  auto out = open_out(file);
  out << "lag,value,se\n";
  for (std::size_t i = 0; i < acf.lags.size(); ++i) {
    out << format_double(acf.lags[i]) << ',' << format_double(acf.values[i]) << ','
        << format_double(acf.standard_errors[i]) << '\n';
  }
  close_checked(out, file);
}

void write_acceptance_csv(const std::filesystem::path& file, const std::vector<AcceptanceRow>& rows) {
  auto out = open_out(file);
  out << "l,empirical,se,theory\n";
  for (const auto& r : rows) {
    out << format_double(r.l) << ',' << format_double(r.empirical) << ',' << format_double(r.se) << ','
        << format_double(r.theory) << '\n';
  }
  close_checked(out, file);
}

void write_ks_csv(const std::filesystem::path& file, const std::vector<KsRow>& rows) {
  auto out = open_out(file);
  out << "t,ks,p\n";
  for (const auto& r : rows) {
    out << format_double(r.t) << ',' << format_double(r.ks) << ',' << format_double(r.p) << '\n';
  }
  close_checked(out, file);
}

void write_json(const std::filesystem::path& file, const nlohmann::json& value) {
  auto out = open_out(file);
  out << value.dump(2) << '\n';
  close_checked(out, file);
}

nlohmann::json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(file.string() + ": " + e.what());
  }
}

std::string read_bytes(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw UsageError("cannot read " + file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace rwmlab
