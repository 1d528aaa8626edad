#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "itsus/integrator.h"

namespace itsus {

/// Temperature ladder {T_k} with weights {n_k} (stored as ln n_k) defining the
/// generalized ensemble  P(U) = sum_k n_k exp(-beta_k U)  at production
/// temperature T0.
class ItsSchedule {
 public:
  /// Throws ConfigError if the ladder is empty, has non-positive or duplicate
  /// temperatures, non-finite log weights, or mismatched lengths.
  ItsSchedule(std::vector<double> temperatures, std::vector<double> log_n, double t0);

  /// Ladder with all n_k = 1.
  static ItsSchedule uniform(std::vector<double> temperatures, double t0);

  std::size_t size() const { return betas_.size(); }
  const std::vector<double>& temperatures() const { return temperatures_; }
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& log_n() const { return log_n_; }
  double t0() const { return t0_; }
  double beta0() const { return beta0_; }
  double min_beta() const { return min_beta_; }
  double max_beta() const { return max_beta_; }

  /// min T_k <= T0 <= max T_k. Not enforced; callers warn.
  bool brackets_t0() const;

  ItsSchedule with_log_n(std::vector<double> log_n) const;

 private:
  std::vector<double> temperatures_;
  std::vector<double> betas_;
  std::vector<double> log_n_;
  double t0_;
  double beta0_;
  double min_beta_;
  double max_beta_;
};

/// U~ = -(1/beta0) ln sum_k n_k exp(-beta_k U), max-shifted.
double effective_energy(const ItsSchedule& its, double u);

/// s(U) = sum n_k beta_k e^{-beta_k U} / (beta0 sum n_k e^{-beta_k U}) = dU~/dU.
double force_scale(const ItsSchedule& its, double u);

struct EffectivePotential {
  double energy;  // U~
  double scale;   // s(U)
};
EffectivePotential effective_potential(const ItsSchedule& its, double u);

/// p_k = n_k Z_k / sum_j n_j Z_j. Throws ConfigError for Z_k <= 0.
std::vector<double> temperature_weights(const ItsSchedule& its, std::span<const double> z);

/// Same with log Z_k, for partition functions outside double range.
std::vector<double> temperature_weights_log(const ItsSchedule& its, std::span<const double> log_z);

/// Sampled share of each temperature: the per-sample posterior
/// n_k e^{-beta_k U} / sum_j n_j e^{-beta_j U}, averaged over `energies`.
std::vector<double> estimate_temperature_shares(const ItsSchedule& its,
                                                std::span<const double> energies);

enum class LadderSpacing { Geometric, Linear };

std::vector<double> temperature_ladder(double t_min, double t_max, int count,
                                       LadderSpacing spacing = LadderSpacing::Geometric);

/// Force provider for ITS dynamics on the bare surface: force = s(U) F.
ForceProvider its_force(const PotentialSurface& surface, const ItsSchedule& its);

struct CalibrationOptions {
  int rounds = 30;
  std::int64_t steps_per_round = 20000;
  std::int64_t record_stride = 10;
  std::int64_t equilibration_steps = 2000;  // before the first round only
  double mixing = 0.5;
  double flatness_threshold = 5.0;
  double max_log_step = 10.0;  // per-round clamp on |delta ln n_k|
};

struct CalibrationReport {
  int iterations = 0;
  std::vector<std::vector<double>> share_history;  // p_k estimate per round
  std::vector<double> final_log_n;
  double flatness = 1.0;  // max p_k / min p_k of the last estimate
  bool converged = false;
};

struct CalibrationResult {
  ItsSchedule schedule;
  CalibrationReport report;
};

/// Iterative weight calibration from short trial ITS runs. Starts from n_k = 1;
/// each round runs a trial trajectory under the current schedule, estimates
/// the temperature shares p_k and updates ln n_k -= mixing * ln(N p_k) until
/// max p / min p < flatness_threshold. When rounds run out the best schedule so
/// far is returned with report.converged = false.
CalibrationResult calibrate_weights(const PotentialSurface& surface,
                                    std::span<const double> temperatures, double t0,
                                    const DynamicsConfig& trial, const CalibrationOptions& options,
                                    std::vector<double> initial_coords);

/// Text file, one line per temperature: "T_k beta_k ln_n_k"; T0 in a header.
void write_schedule(const std::filesystem::path& path, const ItsSchedule& its);
ItsSchedule read_schedule(const std::filesystem::path& path);

/// JSON report written next to a calibrated schedule.
void write_calibration_report(const std::filesystem::path& path, const CalibrationReport& report);
CalibrationReport read_calibration_report(const std::filesystem::path& path);

}  // namespace itsus
