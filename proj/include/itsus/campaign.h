#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "itsus/analysis.h"
#include "itsus/config.h"
#include "itsus/oracle.h"
#include "itsus/trajectory_io.h"
#include "itsus/wham.h"

namespace itsus {

/// Raised by the wham command when the solver stops short of its tolerance
/// (outputs are still written).
class NotConverged : public Error {
 public:
  using Error::Error;
};

struct ManifestEntry {
  int id = 0;
  std::string file;  // relative to the manifest directory
  std::uint64_t seed = 0;
  std::string status = "pending";  // pending | done | failed
  double wall_clock = 0.0;         // seconds
  std::vector<HarmonicRestraint> restraints;
};

struct Manifest {
  std::string name;
  Method method = Method::Md;
  SurfaceSpec surface;
  double temperature = 300.0;
  std::optional<std::string> schedule_file;  // relative to the manifest directory
  std::vector<std::string> cv_names;
  std::vector<ManifestEntry> entries;
};

void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

using Logger = std::function<void(const std::string&)>;

struct RunOptions {
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::optional<std::filesystem::path> out;
  std::optional<int> replicas;
  Logger log;
};

/// Output directory: --out, else the config's output under $ITSUS_OUTPUT_ROOT
/// (when set and the path is relative), else the config's output as given.
std::filesystem::path resolve_output(const RunConfig& config, const RunOptions& options);

/// Lowest point of a coarse grid scan over the surface domain.
std::vector<double> default_start(const PotentialSurface& surface);

struct CampaignResult {
  std::filesystem::path dir;
  std::filesystem::path manifest_path;
  Manifest manifest;
  int ran = 0;
  int skipped = 0;
};

/// Runs every window (or replica) of the config, writing one trajectory file
/// each plus manifest.json. Windows already marked done with their file on
/// disk are skipped unless options.force. Throws SimulationDiverged naming the
/// first failed window after all others finish.
CampaignResult run_campaign(const RunConfig& config, const RunOptions& options);

struct CalibrationOutcome {
  std::filesystem::path schedule_path;
  std::filesystem::path report_path;
  CalibrationResult result;
};

/// Calibrates the config's ladder and writes schedule.txt and calibration.json.
CalibrationOutcome run_calibration(const RunConfig& config, const RunOptions& options);

/// Campaign outputs loaded back from a manifest.
struct LoadedCampaign {
  std::filesystem::path dir;
  Manifest manifest;
  std::shared_ptr<const PotentialSurface> surface;
  std::shared_ptr<const ItsSchedule> its;
  std::vector<TrajectoryFile> trajectories;  // one per manifest entry, same order
};

/// Throws ConfigError when a trajectory is missing or not marked done.
LoadedCampaign load_campaign(const std::filesystem::path& manifest_path);

WhamInput wham_input(const LoadedCampaign& campaign);

struct WhamOutcome {
  WhamSolution solution;
  std::filesystem::path f_path;
  std::filesystem::path weights_path;
  std::filesystem::path summary_path;
};

/// Solves WHAM for a campaign; writes f.csv, weights.csv and wham.json next to
/// the manifest (or into out_dir). Throws NotConverged after writing when the
/// solver did not reach its tolerance.
WhamOutcome run_wham(const std::filesystem::path& manifest_path, const WhamOptions& options,
                     std::optional<std::filesystem::path> out_dir = {}, const Logger& log = {});

/// "window_id,f" rows.
void write_free_energies(const std::filesystem::path& path, std::span<const int> ids, std::span<const double> f);
std::vector<std::pair<int, double>> read_free_energies(const std::filesystem::path& path);

/// "window_id,sample,log_weight" rows, window-major.
void write_weights(const std::filesystem::path& path, const LoadedCampaign& campaign,
                   std::span<const double> log_weights);
std::vector<double> read_weights(const std::filesystem::path& path);

struct PmfAxisSpec {
  std::string cv;
  int bins = 72;
  std::optional<std::pair<double, double>> range;  // CV units; periodic CVs default to a full period
};

struct PmfRequest {
  std::vector<PmfAxisSpec> axes;          // 1 or 2
  std::optional<std::size_t> marginalize;  // keep only this axis of a 2-D map
  bool bootstrap = true;
  BootstrapOptions bootstrap_options;
};

/// PMF from a campaign and its WHAM weights.
Pmf campaign_pmf(const LoadedCampaign& campaign, std::span<const double> weights, const PmfRequest& request);

struct CompareOptions {
  double tolerance = 0.15;  // kcal/mol on RMSD
  std::optional<std::pair<double, double>> barrier_range;
  double cutoff = std::numeric_limits<double>::infinity();  // ignore bins where the reference exceeds this
};

struct CompareReport {
  std::size_t shared_bins = 0;
  double rmsd = 0.0;
  double max_abs = 0.0;
  double barrier_a = 0.0;
  double barrier_b = 0.0;
  double barrier_delta = 0.0;
  double tolerance = 0.0;
  bool within = true;
};

/// Both PMFs are min-aligned before differencing; B is the reference. Throws
/// ConfigError for incompatible grids or no shared non-empty bins.
CompareReport compare_pmfs(const Pmf& a, const Pmf& b, const CompareOptions& options);
void write_compare_report(const std::filesystem::path& path, const CompareReport& r);

/// Oracle PMF on the grid of `like`, for the surface and temperature recorded
/// in its metadata.
Pmf oracle_like(const Pmf& like, OracleMode mode = OracleMode::BinAverage, int points = 2048, int jobs = 1);

}  // namespace itsus
