#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "itsus/surface.h"

namespace itsus {

struct DynamicsConfig {
  double dt = 1.0;              // fs
  double temperature = 300.0;   // K
  double friction = 0.01;       // 1/fs
  std::vector<double> mass;     // amu (amu A^2 for angles); empty means 1 per coordinate
  std::uint64_t seed = 0;
  std::int64_t n_steps = 1;
  std::int64_t record_stride = 1;
  std::int64_t equilibration_steps = 0;  // unrecorded steps before production

  /// Throws ConfigError naming the offending field.
  void validate(std::size_t dim) const;
  double mass_of(std::size_t i) const { return mass.empty() ? 1.0 : mass[i]; }
};

struct SimState {
  std::vector<double> coords;
  std::vector<double> velocities;  // half-step velocities, unit/fs
  double time = 0.0;               // fs
  std::mt19937_64 rng;
};

/// Effective energy returned by a ForceProvider together with the physical
/// potential U(R) it was built from.
struct ForceResult {
  double energy = 0.0;
  double potential = 0.0;
};

/// coords -> (effective energy, physical U); writes the effective force
/// -d(energy)/dR into `force`.
using ForceProvider = std::function<ForceResult(std::span<const double>, std::span<double>)>;

/// Force provider for unbiased dynamics on `surface`.
ForceProvider plain_force(const PotentialSurface& surface);

/// State with Maxwell-Boltzmann velocities at cfg.temperature drawn from a
/// generator seeded with `seed`.
SimState make_state(std::vector<double> coords, const DynamicsConfig& cfg, std::uint64_t seed);

/// Leap-frog stochastic dynamics (velocity kick, Ornstein-Uhlenbeck friction
/// and noise at the bath temperature, averaged drift). Periodic coordinates are
/// wrapped after the drift.
class LangevinIntegrator {
 public:
  LangevinIntegrator(DynamicsConfig cfg, ForceProvider force, std::vector<Periodicity> periodicity);

  /// Advances one step; returns the force evaluation at the starting coords.
  ForceResult step(SimState& state);

  const DynamicsConfig& config() const { return cfg_; }

 private:
  DynamicsConfig cfg_;
  ForceProvider force_;
  std::vector<Periodicity> periodicity_;
  std::vector<double> inv_mass_;
  std::vector<double> noise_sd_;
  std::vector<double> f_;
  double damping_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Functional form of a single step.
SimState langevin_step(const SimState& state, const ForceProvider& force, const DynamicsConfig& cfg,
                       const std::vector<Periodicity>& periodicity);

struct TrajectoryRecord {
  double time = 0.0;
  std::vector<double> coords;
  double potential = 0.0;  // original U(R): not biased, not tempered
  std::vector<double> cvs;
  int window_id = 0;
};

/// Runs cfg.equilibration_steps unrecorded steps, then cfg.n_steps steps,
/// recording every cfg.record_stride steps. The integrator RNG stream is
/// seeded with `seed`.
std::vector<TrajectoryRecord> run_trajectory(const PotentialSurface& surface,
                                             const ForceProvider& force,
                                             std::span<const CollectiveVariable> cvs,
                                             const DynamicsConfig& cfg,
                                             std::vector<double> initial_coords, int window_id,
                                             std::uint64_t seed);

/// Same, continuing from an existing state (used by ITS calibration rounds).
std::vector<TrajectoryRecord> run_trajectory(const PotentialSurface& surface,
                                             const ForceProvider& force,
                                             std::span<const CollectiveVariable> cvs,
                                             const DynamicsConfig& cfg, SimState& state,
                                             int window_id);

}  // namespace itsus
