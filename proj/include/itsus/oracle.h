#pragma once

#include <span>
#include <utility>
#include <vector>

#include "itsus/analysis.h"
#include "itsus/surface.h"

namespace itsus {

/// How the delta function of a reference PMF is realized: at the bin center
/// (Point) or averaged over the bin (BinAverage, which is what a histogram of
/// exact samples estimates).
enum class OracleMode { Point, BinAverage };

struct QuadratureSpec {
  std::vector<int> resolution;                       // points per surface coordinate, >= 64
  std::vector<std::pair<double, double>> domain;     // per coordinate; periodic ones span a period
  OracleMode mode = OracleMode::BinAverage;
  bool check_convergence = true;  // recompute at double resolution, require <= 1e-3 kcal/mol
  int jobs = 1;
};

/// Surface domain at `points` per coordinate.
QuadratureSpec default_quadrature(const PotentialSurface& surface, int points = 2048);

/// Exact PMF on `grid` for the coordinate CVs `cvs` (one per grid axis) by
/// trapezoidal quadrature of exp(-beta0 U), min-aligned. Throws ConfigError
/// ("domain too small") when the density on a non-periodic domain boundary
/// exceeds 1e-12 of its maximum, and Error when the resolution-doubling check
/// moves any bin by more than 1e-3 kcal/mol.
Pmf reference_pmf(const PotentialSurface& surface, std::span<const CollectiveVariable> cvs,
                  const HistogramGrid& grid, double beta0, const QuadratureSpec& quad);

/// ln of the configurational integral of exp(-beta U) over the quadrature domain.
double reference_log_partition(const PotentialSurface& surface, double beta, const QuadratureSpec& quad);
double reference_partition(const PotentialSurface& surface, double beta, const QuadratureSpec& quad);

enum class StationaryType { Minimum, Saddle, Maximum };

struct StationaryPoint {
  std::vector<double> coords;
  double energy = 0.0;
  StationaryType type = StationaryType::Minimum;
};

/// Grid scan for local minima of |grad U|^2, Newton refinement, and
/// classification by the eigenvalues of the finite-difference Hessian.
/// Supports surfaces of dimension 1 and 2. Sorted by energy.
std::vector<StationaryPoint> locate_stationary(const PotentialSurface& surface,
                                               const std::vector<std::pair<double, double>>& region,
                                               int points_per_dim = 201);

const char* to_string(StationaryType t);

}  // namespace itsus
