#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itsus/common.h"

namespace itsus {

/// One histogram axis. Bins are [min + i w, min + (i+1) w); on a periodic axis
/// values are first wrapped onto the period and the index taken modulo bins.
struct Axis {
  double min = 0.0;
  double max = 1.0;
  int bins = 2;
  bool periodic = false;

  double width() const { return (max - min) / bins; }
  double center(int i) const { return min + (i + 0.5) * width(); }
  /// Bin of v, or nullopt when v lies outside a non-periodic axis.
  std::optional<int> index(double v) const;
};

/// Full-period axis over (-pi, pi].
Axis angle_axis(int bins);

struct HistogramGrid {
  std::vector<Axis> axes;

  /// Throws ConfigError: bins >= 2, max > min, periodic axes span 2 pi.
  void validate() const;
  std::size_t size() const;
  std::size_t dim() const { return axes.size(); }
  double bin_volume() const;
  std::optional<std::size_t> flat_index(std::span<const double> values) const;
  /// Bin centers of a flat index (row-major, last axis fastest).
  std::vector<double> centers(std::size_t flat) const;
};

struct Density {
  HistogramGrid grid;
  std::vector<double> rho;     // per bin, sum rho * volume = 1
  std::vector<double> count;   // raw samples per bin
  std::vector<double> n_eff;   // Kish effective samples per bin
};

/// Reweighted histogram density. `values` is row-major (n x grid.dim()).
/// Weights need not be normalized; only in-grid samples contribute. Throws
/// ConfigError when every sample falls outside the grid.
Density weighted_density(const HistogramGrid& grid, std::span<const double> values,
                         std::span<const double> weights);

/// Integrates out every axis except `keep`.
Density marginalize(const Density& joint, std::size_t keep);

/// Free energy per bin. Empty bins hold NaN (never zero-filled).
struct Pmf {
  HistogramGrid grid;
  std::vector<std::string> cv_names;
  std::vector<double> a;            // kcal/mol, min over non-empty bins = 0
  std::vector<double> uncertainty;  // kcal/mol, NaN when not estimated
  std::vector<double> count;
  std::map<std::string, std::string> meta;
};

/// A = -(1/beta0) ln rho, shifted to min 0.
Pmf pmf(const Density& density, double beta0, std::vector<std::string> cv_names = {});

/// Shifts non-empty bins so the minimum is 0.
void align_min(std::span<double> a);

/// Largest A over non-empty bins whose first-axis center lies in [lo, hi]
/// (the whole grid when no range is given). NaN when no bin qualifies.
double barrier_height(const Pmf& p, std::optional<std::pair<double, double>> range = {});

struct BootstrapOptions {
  int blocks = 20;       // contiguous blocks per trajectory
  int resamples = 200;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// PMF with block-bootstrap uncertainties. `segment[s]` names the trajectory a
/// sample belongs to; blocks are contiguous runs within a segment. The sample
/// weights stay fixed across resamples (the WHAM solution is not re-solved).
Pmf pmf_with_bootstrap(const HistogramGrid& grid, std::span<const double> values,
                       std::span<const double> weights, std::span<const int> segment, double beta0,
                       const BootstrapOptions& options, std::vector<std::string> cv_names = {});

/// Mean and spread over independent trajectories: each segment gets its own
/// min-aligned PMF; A is their bin-wise mean (re-aligned), the uncertainty
/// their sample standard deviation. Needs at least two segments.
Pmf pmf_replica_spread(const HistogramGrid& grid, std::span<const double> values, std::span<const double> weights,
                       std::span<const int> segment, double beta0, std::vector<std::string> cv_names = {});

struct EnergyDistribution {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> density;  // normalized over [lo, hi]
  double mean = 0.0;
  double std = 0.0;
};

/// Throws ConfigError with fewer than two samples.
EnergyDistribution energy_distribution(std::span<const double> u, int bins, std::span<const double> weights = {});

struct WindowSamples {
  int id = 0;
  std::vector<double> rc;
  std::vector<double> hidden;
};

struct WindowDiagnostics {
  std::vector<int> ids;
  /// Fraction of samples with hidden < threshold, and with hidden >= threshold.
  std::vector<std::pair<double, double>> occupancy;
  /// Overlap coefficient sum_b min(p_i(b), p_j(b)) of the rc histograms.
  std::vector<std::vector<double>> overlap;
};

WindowDiagnostics overlap_and_occupancy(std::span<const WindowSamples> windows, const Axis& rc_axis,
                                        double threshold = 0.0);

double overlap_coefficient(std::span<const double> a, std::span<const double> b, const Axis& axis);

/// Plot-ready text: "# key = value" metadata lines (grid included), then a CSV
/// header "center[_i],...,A,uncertainty,count" and one row per bin. Empty bins
/// and missing uncertainties are written as NA.
void write_pmf(const std::filesystem::path& path, const Pmf& p);
Pmf read_pmf(const std::filesystem::path& path);

}  // namespace itsus
