#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "itsus/integrator.h"
#include "itsus/tempering.h"

namespace itsus {

/// V = 1/2 K (Omega(R) - center)^2 on one collective variable.
struct HarmonicRestraint {
  CollectiveVariable cv;
  double center = 0.0;  // wrapped into the principal interval for periodic CVs
  double k = 0.0;       // kcal/mol per (CV unit)^2, > 0
};

/// Builds a restraint, validating K > 0 and wrapping periodic centers.
HarmonicRestraint make_restraint(const CollectiveVariable& cv, double center, double k);

/// Minimal-image difference cv_value - center for periodic CVs, plain otherwise.
double restraint_delta(const HarmonicRestraint& r, double cv_value);

double bias_energy(const HarmonicRestraint& r, double cv_value);

/// Bias force -K delta dOmega/dR as a full coordinate vector.
std::vector<double> bias_force(const HarmonicRestraint& r, std::span<const double> coords);

/// One sampling window: one restraint for 1-D umbrella sampling, several for
/// multi-dimensional grids.
struct UmbrellaWindow {
  int id = 0;
  std::vector<HarmonicRestraint> restraints;

  double energy(std::span<const double> coords) const;
  /// Adds the bias force into `force`; returns the bias energy.
  double add_force(std::span<const double> coords, std::span<double> force) const;
};

struct WindowSchedule {
  std::vector<UmbrellaWindow> windows;
};

/// Evenly spaced centers: over (lo, hi] for periodic CVs (so a full circle has
/// no duplicate seam window), over [lo, hi] inclusive otherwise. `k` holds one
/// value for all windows or one per window. Throws ConfigError for count < 1
/// (empty schedule) or mismatched lengths.
WindowSchedule window_schedule(const CollectiveVariable& cv, double lo, double hi, int count,
                               std::span<const double> k);

/// Explicit center list, passed through unchanged (modulo periodic wrapping).
WindowSchedule window_schedule(const CollectiveVariable& cv, std::span<const double> centers,
                               std::span<const double> k);

/// Outer product of two 1-D schedules; ids are row-major (a outer, b inner).
WindowSchedule outer_product(const WindowSchedule& a, const WindowSchedule& b);

/// Surface plus optional ITS schedule plus optional umbrella window. Plain US
/// samples U + V; ITS-US samples U~(U) + V where only U passes through the
/// tempering transform. The bias is never tempered.
class BiasedSystem {
 public:
  BiasedSystem(std::shared_ptr<const PotentialSurface> surface,
               std::shared_ptr<const ItsSchedule> its, std::optional<UmbrellaWindow> window);

  ForceResult evaluate(std::span<const double> coords, std::span<double> force) const;
  /// Provider referencing this object; the system must outlive it.
  ForceProvider provider() const;

  const PotentialSurface& surface() const { return *surface_; }
  const std::shared_ptr<const ItsSchedule>& its() const { return its_; }
  const std::optional<UmbrellaWindow>& window() const { return window_; }

 private:
  std::shared_ptr<const PotentialSurface> surface_;
  std::shared_ptr<const ItsSchedule> its_;
  std::optional<UmbrellaWindow> window_;
};

/// Checked (energy, force) of a biased system.
struct EnergyForce {
  double energy = 0.0;
  std::vector<double> force;
};
EnergyForce total_energy_force(const BiasedSystem& sys, std::span<const double> coords);

/// Starting coordinates for a window: `start` with every restrained coordinate
/// replaced by the window center, then relaxed by steepest descent on U + V.
std::vector<double> seed_window_coords(const PotentialSurface& surface, const UmbrellaWindow& window,
                                       std::vector<double> start, int iterations = 500);

}  // namespace itsus
