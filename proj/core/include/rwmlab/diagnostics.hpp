#pragma once

#include "rwmlab/linalg.hpp"
#include "rwmlab/rwm.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace rwmlab {

struct RateEstimate {
  double rate = 0.0;
  double standard_error = 0.0;
};

// Pooled accept / proposal ratio with a binomial standard error.
RateEstimate empirical_acceptance(const std::vector<ChainPath>& paths);

// Ensemble autocorrelation: at each lag, the across-replica covariance of
// (Y(0), Y(lag)) divided by the across-replica variance of Y(0).
struct AcfEstimate {
  std::vector<double> lags;
  std::vector<double> values;
  std::vector<double> standard_errors;
  std::size_t n_paths = 0;
  // Per-replica influence values (n_paths x lags); the standard errors and any
  // linear functional of `values` (such as the lag-0 slope) derive from them.
  Matrix influence;
};

using PathFunctional = std::function<double(const Eigen::Ref<const Vector>&)>;

// Needs >= 30 non-aborted paths whose grids contain every lag (and lag 0);
// a constant functional is rejected.
AcfEstimate stationary_acf(const std::vector<ChainPath>& paths, const PathFunctional& f,
                           const std::vector<double>& lags);

struct SlopeEstimate {
  double slope = 0.0;
  double standard_error = 0.0;
};

// Weighted least-squares line through the first m lags, anchored at
// (0, 1), weights 1 / se^2. Requires lags[0] == 0 and m >= 3.
SlopeEstimate acf_slope_at_zero(const AcfEstimate& acf, std::size_t m = 4);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Kolmogorov survival function Q(x) = 2 sum (-1)^{j-1} exp(-2 j^2 x^2).
double kolmogorov_sf(double x);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf);

// Values of coordinate `coord` at time t across the non-aborted paths.
std::vector<double> marginal_at(const std::vector<ChainPath>& paths, double t, Eigen::Index coord);

// Two-sample KS between the time-t marginals of two path collections
// (>= 500 replicas each). Throws UsageError if t is not on the grid.
KsResult marginal_distance(const std::vector<ChainPath>& a, const std::vector<ChainPath>& b, double t,
                           Eigen::Index coord);

// Index of grid time t in path.times, or -1.
std::ptrdiff_t time_index(const ChainPath& path, double t);

struct ComparisonEntry {
  std::string metric;
  double time = 0.0;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct ComparisonReport {
  std::vector<ComparisonEntry> entries;
  bool all_pass() const;
  void add(std::string metric, double time, double value, double threshold);  // pass iff value <= threshold
};

}  // namespace rwmlab
