#include "itsus/integrator.h"

#include <cmath>

namespace itsus {

void DynamicsConfig::validate(std::size_t dim) const {
  if (!(dt > 0.0)) throw ConfigError("must be > 0", "dynamics.dt");
  if (!(temperature > 0.0)) throw ConfigError("must be > 0", "dynamics.temperature");
  if (!(friction >= 0.0)) throw ConfigError("must be >= 0", "dynamics.friction");
  if (n_steps < 1) throw ConfigError("must be >= 1", "dynamics.n_steps");
  if (record_stride < 1) throw ConfigError("must be >= 1", "dynamics.record_stride");
  if (equilibration_steps < 0) throw ConfigError("must be >= 0", "dynamics.equilibration_steps");
  if (!mass.empty() && mass.size() != dim)
    throw ConfigError("needs one entry per coordinate", "dynamics.mass");
  for (double m : mass)
    if (!(m > 0.0)) throw ConfigError("masses must be > 0", "dynamics.mass");
}

ForceProvider plain_force(const PotentialSurface& surface) {
  return [&surface](std::span<const double> x, std::span<double> f) {
    const double u = surface.evaluate(x, f);
    for (double& v : f) v = -v;
    return ForceResult{u, u};
  };
}

SimState make_state(std::vector<double> coords, const DynamicsConfig& cfg, std::uint64_t seed) {
  SimState s;
  s.rng.seed(seed);
  s.coords = std::move(coords);
  s.velocities.resize(s.coords.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  const double kt = kBoltzmann * cfg.temperature;
  for (std::size_t i = 0; i < s.coords.size(); ++i)
    s.velocities[i] = std::sqrt(kt * kAccelerationUnit / cfg.mass_of(i)) * normal(s.rng);
  return s;
}

LangevinIntegrator::LangevinIntegrator(DynamicsConfig cfg, ForceProvider force,
                                       std::vector<Periodicity> periodicity)
    : cfg_(std::move(cfg)), force_(std::move(force)), periodicity_(std::move(periodicity)) {
  const std::size_t n = periodicity_.size();
  cfg_.validate(n);
  damping_ = std::exp(-cfg_.friction * cfg_.dt);
  const double kt = kBoltzmann * cfg_.temperature;
  inv_mass_.resize(n);
  noise_sd_.resize(n);
  f_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_mass_[i] = kAccelerationUnit / cfg_.mass_of(i);
    noise_sd_[i] = std::sqrt(kt * inv_mass_[i] * (1.0 - damping_ * damping_));
  }
}

ForceResult LangevinIntegrator::step(SimState& s) {
  const std::size_t n = s.coords.size();
  const ForceResult fr = force_(s.coords, f_);
  const double dt = cfg_.dt;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(f_[i]))
      throw SimulationDiverged("non-finite force at t=" + format_double(s.time) + " fs", s.coords);
    const double kicked = s.velocities[i] + f_[i] * inv_mass_[i] * dt;
    const double thermal = damping_ * kicked + noise_sd_[i] * normal_(s.rng);
    s.coords[i] += 0.5 * (kicked + thermal) * dt;
    s.velocities[i] = thermal;
    if (periodicity_[i].periodic) s.coords[i] = wrap_periodic(s.coords[i], periodicity_[i].period);
    if (!std::isfinite(s.coords[i]))
      throw SimulationDiverged("non-finite coordinates at t=" + format_double(s.time) + " fs",
                               s.coords);
  }
  s.time += dt;
  return fr;
}

SimState langevin_step(const SimState& state, const ForceProvider& force, const DynamicsConfig& cfg,
                       const std::vector<Periodicity>& periodicity) {
  LangevinIntegrator integ(cfg, force, periodicity);
  SimState next = state;
  integ.step(next);
  return next;
}

std::vector<TrajectoryRecord> run_trajectory(const PotentialSurface& surface,
                                             const ForceProvider& force,
                                             std::span<const CollectiveVariable> cvs,
                                             const DynamicsConfig& cfg, SimState& state,
                                             int window_id) {
  if (state.coords.size() != surface.dim()) throw DimensionMismatch(surface.dim(), state.coords.size());
  LangevinIntegrator integ(cfg, force, surface.periodicity());
  for (std::int64_t i = 0; i < cfg.equilibration_steps; ++i) integ.step(state);

  std::vector<TrajectoryRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.n_steps / cfg.record_stride));
  std::vector<double> grad(surface.dim());
  for (std::int64_t i = 1; i <= cfg.n_steps; ++i) {
    integ.step(state);
    if (i % cfg.record_stride != 0) continue;
    TrajectoryRecord r;
    r.time = state.time;
    r.coords = state.coords;
    r.potential = surface.evaluate(state.coords, grad);
    r.cvs.reserve(cvs.size());
    for (const auto& cv : cvs) r.cvs.push_back(cv_value(cv, state.coords));
    r.window_id = window_id;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TrajectoryRecord> run_trajectory(const PotentialSurface& surface,
                                             const ForceProvider& force,
                                             std::span<const CollectiveVariable> cvs,
                                             const DynamicsConfig& cfg,
                                             std::vector<double> initial_coords, int window_id,
                                             std::uint64_t seed) {
  if (initial_coords.size() != surface.dim())
    throw DimensionMismatch(surface.dim(), initial_coords.size());
  surface.wrap(initial_coords);
  SimState state = make_state(std::move(initial_coords), cfg, seed);
  return run_trajectory(surface, force, cvs, cfg, state, window_id);
}

}  // namespace itsus
