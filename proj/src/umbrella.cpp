#include "itsus/umbrella.h"

#include <cmath>

namespace itsus {

HarmonicRestraint make_restraint(const CollectiveVariable& cv, double center, double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("force constant must be > 0", "windows.k");
  if (!std::isfinite(center)) throw ConfigError("center must be finite", "windows.centers");
  return {cv, cv.periodic ? wrap_periodic(center, cv.period) : center, k};
}

double restraint_delta(const HarmonicRestraint& r, double cv_value) {
  const double d = cv_value - r.center;
  return r.cv.periodic ? wrap_periodic(d, r.cv.period) : d;
}

double bias_energy(const HarmonicRestraint& r, double cv_value) {
  const double d = restraint_delta(r, cv_value);
  return 0.5 * r.k * d * d;
}

std::vector<double> bias_force(const HarmonicRestraint& r, std::span<const double> coords) {
  std::vector<double> f(coords.size(), 0.0);
  const double d = restraint_delta(r, cv_value(r.cv, coords));
  f[r.cv.index] = -r.k * d;
  return f;
}

double UmbrellaWindow::energy(std::span<const double> coords) const {
  double e = 0.0;
  for (const auto& r : restraints) e += bias_energy(r, cv_value(r.cv, coords));
  return e;
}

double UmbrellaWindow::add_force(std::span<const double> coords, std::span<double> force) const {
  double e = 0.0;
  for (const auto& r : restraints) {
    const double d = restraint_delta(r, cv_value(r.cv, coords));
    e += 0.5 * r.k * d * d;
    force[r.cv.index] -= r.k * d;
  }
  return e;
}

namespace {

std::vector<double> expand_k(std::span<const double> k, std::size_t count) {
  if (k.size() == 1) return std::vector<double>(count, k[0]);
  if (k.size() != count)
    throw ConfigError("expected 1 or " + std::to_string(count) + " force constants, got " +
                          std::to_string(k.size()),
                      "windows.k");
  return {k.begin(), k.end()};
}

}  // namespace

WindowSchedule window_schedule(const CollectiveVariable& cv, double lo, double hi, int count,
                               std::span<const double> k) {
  if (count < 1) throw ConfigError("window schedule is empty", "windows.count");
  if (!(hi > lo)) throw ConfigError("range must satisfy lo < hi", "windows.range");
  const auto ks = expand_k(k, static_cast<std::size_t>(count));
  std::vector<double> centers(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    if (cv.periodic)
      centers[i] = lo + (i + 1) * (hi - lo) / count;
    else
      centers[i] = count == 1 ? 0.5 * (lo + hi) : lo + i * (hi - lo) / (count - 1);
  }
  WindowSchedule s;
  for (int i = 0; i < count; ++i) s.windows.push_back({i, {make_restraint(cv, centers[i], ks[i])}});
  return s;
}

WindowSchedule window_schedule(const CollectiveVariable& cv, std::span<const double> centers,
                               std::span<const double> k) {
  if (centers.empty()) throw ConfigError("window schedule is empty", "windows.centers");
  const auto ks = expand_k(k, centers.size());
  WindowSchedule s;
  for (std::size_t i = 0; i < centers.size(); ++i)
    s.windows.push_back({static_cast<int>(i), {make_restraint(cv, centers[i], ks[i])}});
  return s;
}

WindowSchedule outer_product(const WindowSchedule& a, const WindowSchedule& b) {
  if (a.windows.empty() || b.windows.empty())
    throw ConfigError("window schedule is empty", "windows");
  WindowSchedule s;
  int id = 0;
  for (const auto& wa : a.windows)
    for (const auto& wb : b.windows) {
      UmbrellaWindow w{id++, wa.restraints};
      w.restraints.insert(w.restraints.end(), wb.restraints.begin(), wb.restraints.end());
      s.windows.push_back(std::move(w));
    }
  return s;
}

BiasedSystem::BiasedSystem(std::shared_ptr<const PotentialSurface> surface,
                           std::shared_ptr<const ItsSchedule> its,
                           std::optional<UmbrellaWindow> window)
    : surface_(std::move(surface)), its_(std::move(its)), window_(std::move(window)) {
  if (!surface_) throw ConfigError("biased system needs a surface", "surface");
  if (window_)
    for (const auto& r : window_->restraints)
      if (r.cv.index >= surface_->dim()) throw DimensionMismatch(surface_->dim(), r.cv.index + 1);
}

ForceResult BiasedSystem::evaluate(std::span<const double> x, std::span<double> f) const {
  const double u = surface_->evaluate(x, f);
  double e = u;
  double scale = 1.0;
  if (its_) {
    const auto eff = effective_potential(*its_, u);
    e = eff.energy;
    scale = eff.scale;
  }
  for (double& v : f) v = -scale * v;
  if (window_) e += window_->add_force(x, f);
  return {e, u};
}

ForceProvider BiasedSystem::provider() const {
  return [this](std::span<const double> x, std::span<double> f) { return evaluate(x, f); };
}

EnergyForce total_energy_force(const BiasedSystem& sys, std::span<const double> coords) {
  if (coords.size() != sys.surface().dim()) throw DimensionMismatch(sys.surface().dim(), coords.size());
  EnergyForce out;
  out.force.assign(coords.size(), 0.0);
  out.energy = sys.evaluate(coords, out.force).energy;
  return out;
}

std::vector<double> seed_window_coords(const PotentialSurface& surface, const UmbrellaWindow& window,
                                       std::vector<double> start, int iterations) {
  if (start.size() != surface.dim()) throw DimensionMismatch(surface.dim(), start.size());
  for (const auto& r : window.restraints) start[r.cv.index] = r.center;
  surface.wrap(start);

  const std::size_t n = start.size();
  std::vector<double> f(n), trial(n), ftrial(n);
  auto energy_force = [&](std::span<const double> x, std::span<double> out) {
    const double u = surface.evaluate(x, out);
    for (double& v : out) v = -v;
    return u + window.add_force(x, out);
  };
  double e = energy_force(start, f);
  double step = 1e-3;
  for (int it = 0; it < iterations; ++it) {
    double fmax = 0.0;
    for (double v : f) fmax = std::max(fmax, std::abs(v));
    if (fmax < 1e-8) break;
    bool accepted = false;
    for (int tries = 0; tries < 40; ++tries) {
      // displacement capped at 0.05 units per iteration
      const double h = std::min(step, 0.05 / fmax);
      for (std::size_t i = 0; i < n; ++i) trial[i] = start[i] + h * f[i];
      surface.wrap(trial);
      const double et = energy_force(trial, ftrial);
      if (et < e) {
        start.swap(trial);
        f.swap(ftrial);
        e = et;
        step = h * 1.2;
        accepted = true;
        break;
      }
      step = h * 0.5;
    }
    if (!accepted) break;
  }
  return start;
}

}  // namespace itsus
