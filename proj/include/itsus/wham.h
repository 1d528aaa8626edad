#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "itsus/tempering.h"
#include "itsus/umbrella.h"

namespace itsus {

/// Sampling window as seen by the estimator: restraints plus the ITS schedule
/// the window ran under (null for plain sampling). Restraints refer to CVs by
/// name; the name must appear in WhamInput::cv_names.
struct WhamWindow {
  int id = 0;
  std::vector<HarmonicRestraint> restraints;
  std::shared_ptr<const ItsSchedule> its;
};

struct WhamSample {
  double potential = 0.0;   // original U
  std::vector<double> cvs;  // ordered as WhamInput::cv_names
};

struct WhamInput {
  double beta0 = 0.0;
  std::vector<std::string> cv_names;
  std::vector<WhamWindow> windows;
  std::vector<std::vector<WhamSample>> samples;  // samples[i] recorded in windows[i]
};

/// beta0 (U~_j(U) - U + V_j(Omega)): the combined biasing term of window j for
/// one sample. Ũ depends on R only through U, so only the sample's U and CVs
/// are needed. Throws ConfigError if a restrained CV is missing.
double bias_log_factor(const WhamWindow& window, double beta0, const WhamSample& sample,
                       std::span<const std::string> cv_names);

struct WhamOptions {
  double tolerance = 1e-6;  // kcal/mol, on max_i |delta f_i| of one sweep
  int max_iterations = 100000;
  bool accelerate = true;   // Anderson mixing on the fixed-point map
  int anderson_depth = 5;
  int jobs = 1;
  double isolation_threshold = 1e-3;
};

struct OverlapWarning {
  int window_id;
  double max_overlap;  // largest overlap with any other window
};

struct WhamSolution {
  std::vector<double> f;            // kcal/mol, f[0] = 0
  std::vector<double> log_weights;  // per sample, window-major, normalized
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  /// overlap[i][j]: mean posterior probability that a sample of window i
  /// belongs to window j (rows sum to 1).
  std::vector<std::vector<double>> overlap;
  std::vector<OverlapWarning> warnings;
};

/// Self-consistent solution of the generalized (binless) WHAM equations.
/// Throws ConfigError for windows without samples or unresolvable CVs. A
/// non-converged run returns the best iterate with converged = false.
WhamSolution solve(const WhamInput& input, const WhamOptions& options = {});

/// One sweep of the f update at `f` (kcal/mol), gauge-fixed to f[0] = 0.
std::vector<double> wham_sweep(const WhamInput& input, std::span<const double> f, int jobs = 1);

/// Per-sample unbiased weights (normalized, window-major) for free energies `f`.
std::vector<double> unbiased_weights(const WhamInput& input, std::span<const double> f, int jobs = 1);

}  // namespace itsus
