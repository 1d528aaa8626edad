#include "itsus/tempering.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "itsus/trajectory_io.h"

namespace itsus {

ItsSchedule::ItsSchedule(std::vector<double> temperatures, std::vector<double> log_n, double t0)
    : temperatures_(std::move(temperatures)), log_n_(std::move(log_n)), t0_(t0) {
  if (temperatures_.empty()) throw ConfigError("temperature ladder is empty", "its");
  if (temperatures_.size() != log_n_.size())
    throw ConfigError("ladder and weights differ in length", "its");
  if (!(t0_ > 0.0)) throw ConfigError("T0 must be > 0", "its.t0");
  std::set<double> seen;
  for (double t : temperatures_) {
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("temperatures must be > 0", "its");
    if (!seen.insert(t).second) throw ConfigError("duplicate temperature in ladder", "its");
    betas_.push_back(beta_of(t));
  }
  for (double l : log_n_)
    if (!std::isfinite(l)) throw ConfigError("ln n_k must be finite", "its");
  beta0_ = beta_of(t0_);
  min_beta_ = *std::min_element(betas_.begin(), betas_.end());
  max_beta_ = *std::max_element(betas_.begin(), betas_.end());
}

ItsSchedule ItsSchedule::uniform(std::vector<double> temperatures, double t0) {
  std::vector<double> zeros(temperatures.size(), 0.0);
  return ItsSchedule(std::move(temperatures), std::move(zeros), t0);
}

bool ItsSchedule::brackets_t0() const {
  const auto [lo, hi] = std::minmax_element(temperatures_.begin(), temperatures_.end());
  return *lo <= t0_ && t0_ <= *hi;
}

ItsSchedule ItsSchedule::with_log_n(std::vector<double> log_n) const {
  return ItsSchedule(temperatures_, std::move(log_n), t0_);
}

EffectivePotential effective_potential(const ItsSchedule& its, double u) {
  const auto& b = its.betas();
  const auto& ln = its.log_n();
  const std::size_t n = b.size();
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) m = std::max(m, ln[k] - b[k] * u);
  double sum = 0.0, bsum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::exp(ln[k] - b[k] * u - m);
    sum += w;
    bsum += w * b[k];
  }
  return {-(m + std::log(sum)) / its.beta0(), bsum / (sum * its.beta0())};
}

double effective_energy(const ItsSchedule& its, double u) { return effective_potential(its, u).energy; }

double force_scale(const ItsSchedule& its, double u) { return effective_potential(its, u).scale; }

std::vector<double> temperature_weights_log(const ItsSchedule& its, std::span<const double> log_z) {
  if (log_z.size() != its.size()) throw DimensionMismatch(its.size(), log_z.size());
  std::vector<double> a(its.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!std::isfinite(log_z[k])) throw ConfigError("partition function must be positive", "Z");
    a[k] = its.log_n()[k] + log_z[k];
  }
  const double lse = log_sum_exp(a);
  for (double& v : a) v = std::exp(v - lse);
  return a;
}

std::vector<double> temperature_weights(const ItsSchedule& its, std::span<const double> z) {
  std::vector<double> log_z;
  log_z.reserve(z.size());
  for (double v : z) {
    if (!(v > 0.0)) throw ConfigError("partition function must be positive", "Z");
    log_z.push_back(std::log(v));
  }
  return temperature_weights_log(its, log_z);
}

std::vector<double> estimate_temperature_shares(const ItsSchedule& its,
                                                std::span<const double> energies) {
  const std::size_t n = its.size();
  std::vector<double> shares(n, 0.0), a(n);
  if (energies.empty()) return shares;
  for (double u : energies) {
    for (std::size_t k = 0; k < n; ++k) a[k] = its.log_n()[k] - its.betas()[k] * u;
    const double lse = log_sum_exp(a);
    for (std::size_t k = 0; k < n; ++k) shares[k] += std::exp(a[k] - lse);
  }
  for (double& s : shares) s /= static_cast<double>(energies.size());
  return shares;
}

std::vector<double> temperature_ladder(double t_min, double t_max, int count, LadderSpacing spacing) {
  if (count < 1) throw ConfigError("must be >= 1", "its.count");
  if (!(t_min > 0.0) || !(t_max >= t_min)) throw ConfigError("need 0 < t_min <= t_max", "its");
  if (count == 1) return {t_min};
  if (t_max == t_min) throw ConfigError("t_max must exceed t_min for count > 1", "its");
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double f = static_cast<double>(k) / (count - 1);
    t[k] = spacing == LadderSpacing::Geometric ? t_min * std::pow(t_max / t_min, f)
                                               : t_min + f * (t_max - t_min);
  }
  t.back() = t_max;
  return t;
}

ForceProvider its_force(const PotentialSurface& surface, const ItsSchedule& its) {
  return [&surface, &its](std::span<const double> x, std::span<double> f) {
    const double u = surface.evaluate(x, f);
    const auto eff = effective_potential(its, u);
    for (double& v : f) v = -eff.scale * v;
    return ForceResult{eff.energy, u};
  };
}

namespace {

double flatness_of(const std::vector<double>& p) {
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  return *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

}  // namespace

CalibrationResult calibrate_weights(const PotentialSurface& surface,
                                    std::span<const double> temperatures, double t0,
                                    const DynamicsConfig& trial, const CalibrationOptions& opt,
                                    std::vector<double> initial_coords) {
  if (opt.rounds < 1) throw ConfigError("must be >= 1", "its.calibration.rounds");
  if (!(opt.mixing > 0.0 && opt.mixing <= 1.0))
    throw ConfigError("must lie in (0, 1]", "its.calibration.mixing");
  if (!(opt.flatness_threshold > 1.0))
    throw ConfigError("must be > 1", "its.calibration.flatness");

  std::vector<double> temps(temperatures.begin(), temperatures.end());
  ItsSchedule current = ItsSchedule::uniform(temps, t0);
  CalibrationReport report;
  const std::size_t n = current.size();
  if (n == 1) {
    report.share_history.push_back({1.0});
    report.final_log_n = current.log_n();
    report.converged = true;
    return {current, report};
  }

  DynamicsConfig cfg = trial;
  cfg.temperature = t0;
  cfg.n_steps = opt.steps_per_round;
  cfg.record_stride = opt.record_stride;
  cfg.equilibration_steps = 0;
  cfg.validate(surface.dim());
  surface.wrap(initial_coords);
  SimState state = make_state(std::move(initial_coords), cfg, trial.seed);
  {
    DynamicsConfig eq = cfg;
    eq.n_steps = std::max<std::int64_t>(1, opt.equilibration_steps);
    eq.record_stride = eq.n_steps;
    run_trajectory(surface, its_force(surface, current), {}, eq, state, 0);
  }

  ItsSchedule best = current;
  double best_flatness = std::numeric_limits<double>::infinity();
  std::vector<double> energies;
  for (int round = 1; round <= opt.rounds; ++round) {
    const auto records = run_trajectory(surface, its_force(surface, current), {}, cfg, state, 0);
    energies.clear();
    for (const auto& r : records) energies.push_back(r.potential);
    const auto shares = estimate_temperature_shares(current, energies);
    const double flat = flatness_of(shares);
    report.iterations = round;
    report.share_history.push_back(shares);
    if (flat < best_flatness) {
      best_flatness = flat;
      best = current;
    }
    if (flat < opt.flatness_threshold) {
      report.converged = true;
      break;
    }
    std::vector<double> log_n = current.log_n();
    for (std::size_t k = 0; k < n; ++k) {
      const double ratio = std::log(std::max(shares[k], 1e-300) * static_cast<double>(n));
      log_n[k] -= std::clamp(opt.mixing * ratio, -opt.max_log_step, opt.max_log_step);
    }
    const double top = *std::max_element(log_n.begin(), log_n.end());
    for (double& l : log_n) l -= top;
    current = current.with_log_n(std::move(log_n));
  }
  report.flatness = best_flatness;
  report.final_log_n = best.log_n();
  return {best, report};
}

void write_schedule(const std::filesystem::path& path, const ItsSchedule& its) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing", path.string());
  out << "# itsus ITS schedule\n";
  out << "# T0 = " << format_double(its.t0()) << "\n";
  out << "# T_k beta_k ln_n_k\n";
  for (std::size_t k = 0; k < its.size(); ++k)
    out << format_double(its.temperatures()[k]) << ' ' << format_double(its.betas()[k]) << ' '
        << format_double(its.log_n()[k]) << '\n';
  if (!out) throw ConfigError("write failed", path.string());
}

ItsSchedule read_schedule(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schedule", path.string());
  std::string line;
  double t0 = 0.0;
  std::vector<double> temps, log_n;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("T0 =");
      if (pos != std::string::npos) t0 = parse_double(line.substr(pos + 5), path.string());
      continue;
    }
    std::istringstream ss(line);
    std::string ft, fb, fl;
    if (!(ss >> ft >> fb >> fl)) throw ConfigError("expected 'T_k beta_k ln_n_k'", path.string());
    const double t = parse_double(ft, path.string());
    const double b = parse_double(fb, path.string());
    if (std::abs(b - beta_of(t)) > 1e-9 * b)
      throw ConfigError("beta_k inconsistent with T_k", path.string());
    temps.push_back(t);
    log_n.push_back(parse_double(fl, path.string()));
  }
  if (!(t0 > 0.0)) throw ConfigError("missing '# T0 =' header", path.string());
  return ItsSchedule(std::move(temps), std::move(log_n), t0);
}

void write_calibration_report(const std::filesystem::path& path, const CalibrationReport& r) {
  nlohmann::json j;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["flatness"] = r.flatness;
  j["final_log_n"] = r.final_log_n;
  j["share_history"] = r.share_history;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing", path.string());
  out << j.dump(1) << '\n';
}

CalibrationReport read_calibration_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report", path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    CalibrationReport r;
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.flatness = j.at("flatness").get<double>();
    r.final_log_n = j.at("final_log_n").get<std::vector<double>>();
    r.share_history = j.at("share_history").get<std::vector<std::vector<double>>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what(), path.string());
  }
}

}  // namespace itsus
