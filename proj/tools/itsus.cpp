// itsus: run, calibrate, wham, pmf and compare subcommands.
#include <iostream>

#include "CLI11.hpp"
#include "itsus/campaign.h"

using namespace itsus;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 1, kDiverged = 2, kCalibration = 3, kTolerance = 4 };

std::pair<double, double> parse_range(const std::string& s, double factor) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("expected lo:hi, got '" + s + "'", "range");
  return {parse_double(s.substr(0, colon), "range") * factor, parse_double(s.substr(colon + 1), "range") * factor};
}

void log_err(const std::string& s) { std::cerr << s << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Enhanced-sampling toolkit: plain MD, ITS, umbrella sampling and ITS-US on analytic surfaces"};
  app.require_subcommand(1);

  // run / calibrate
  fs::path config_path;
  RunOptions run_opt;
  std::uint64_t seed = 0;
  std::string out;
  int replicas = 0;
  auto* run = app.add_subcommand("run", "run all windows/replicas of a configuration");
  auto* cal = app.add_subcommand("calibrate", "calibrate ITS weights for a configuration");
  std::vector<CLI::Option*> seed_opts;
  for (auto* sc : {run, cal}) {
    sc->add_option("--config", config_path, "run configuration (JSON)")->required();
    seed_opts.push_back(sc->add_option("--seed", seed, "override the config seed"));
    sc->add_option("--out", out, "output directory");
    sc->add_flag("--force", run_opt.force, "redo finished windows / recalibrate");
  }
  run->add_option("--jobs", run_opt.jobs, "concurrent windows")->check(CLI::PositiveNumber);
  run->add_option("--replicas", replicas, "independent replicas for md/its")->check(CLI::PositiveNumber);

  // wham
  fs::path manifest;
  WhamOptions wopt;
  std::string wham_out;
  bool no_accel = false;
  auto* wham = app.add_subcommand("wham", "solve the generalized WHAM equations for a campaign");
  wham->add_option("--manifest", manifest, "campaign manifest.json")->required();
  wham->add_option("--tolerance", wopt.tolerance, "max |delta f| between sweeps (kcal/mol)");
  wham->add_option("--max-iter", wopt.max_iterations);
  wham->add_option("--jobs", wopt.jobs)->check(CLI::PositiveNumber);
  wham->add_option("--out", wham_out, "directory for f.csv, weights.csv, wham.json");
  wham->add_flag("--no-accelerate", no_accel, "plain fixed-point sweeps");

  // pmf
  fs::path pmf_manifest, weights_path;
  std::vector<std::string> cvs, ranges;
  std::vector<int> bins;
  bool degrees = false, no_bootstrap = false;
  int marginalize = -1;
  PmfRequest req;
  std::string pmf_out;
  auto* pmfc = app.add_subcommand("pmf", "PMF from WHAM weights");
  pmfc->add_option("--manifest", pmf_manifest, "campaign manifest.json")->required();
  pmfc->add_option("--weights", weights_path, "weights.csv (default: next to the manifest)");
  pmfc->add_option("--cv", cvs, "CV name; repeat for a 2-D map")->required();
  pmfc->add_option("--bins", bins, "bins per axis (default 72 for 1-D, 64 for 2-D)");
  pmfc->add_option("--range", ranges, "lo:hi per non-periodic axis");
  pmfc->add_flag("--degrees", degrees, "ranges are in degrees");
  pmfc->add_option("--marginalize", marginalize, "integrate a 2-D map down to this axis (0 or 1)");
  pmfc->add_flag("--no-bootstrap", no_bootstrap);
  pmfc->add_option("--blocks", req.bootstrap_options.blocks);
  pmfc->add_option("--resamples", req.bootstrap_options.resamples);
  pmfc->add_option("--seed", req.bootstrap_options.seed);
  pmfc->add_option("--jobs", req.bootstrap_options.jobs)->check(CLI::PositiveNumber);
  pmfc->add_option("--out", pmf_out, "output PMF file")->required();

  // compare
  fs::path pmf_a, pmf_b;
  bool use_oracle = false;
  CompareOptions copt;
  std::string barrier_range, report_out, oracle_out;
  int oracle_points = 2048, cmp_jobs = 1;
  auto* cmp = app.add_subcommand("compare", "compare two PMFs, or a PMF against the quadrature oracle");
  cmp->add_option("pmf_a", pmf_a, "PMF under test")->required();
  cmp->add_option("pmf_b", pmf_b, "reference PMF");
  cmp->add_flag("--oracle", use_oracle, "use the quadrature oracle as reference");
  cmp->add_option("--tolerance", copt.tolerance, "RMSD tolerance (kcal/mol)");
  cmp->add_option("--barrier-range", barrier_range, "lo:hi on the first axis for barrier heights");
  cmp->add_flag("--degrees", degrees, "barrier range in degrees");
  cmp->add_option("--cutoff", copt.cutoff, "ignore bins where the reference exceeds this (kcal/mol)");
  cmp->add_option("--oracle-points", oracle_points);
  cmp->add_option("--oracle-out", oracle_out, "also write the oracle PMF here");
  cmp->add_option("--jobs", cmp_jobs)->check(CLI::PositiveNumber);
  cmp->add_option("--out", report_out, "JSON report path");

  CLI11_PARSE(app, argc, argv);
  run_opt.log = log_err;

  try {
    if (*run || *cal) {
      const auto cfg = load_run_config(config_path);
      if (!out.empty()) run_opt.out = out;
      if (seed_opts[0]->count() + seed_opts[1]->count() > 0) run_opt.seed = seed;
      if (*run) {
        if (replicas > 0) run_opt.replicas = replicas;
        const auto r = run_campaign(cfg, run_opt);
        std::cout << r.manifest_path.string() << '\n';
        std::cerr << r.ran << " run, " << r.skipped << " skipped\n";
        return kOk;
      }
      const auto r = run_calibration(cfg, run_opt);
      std::cout << r.schedule_path.string() << '\n';
      return r.result.report.converged ? kOk : kCalibration;
    }
    if (*wham) {
      wopt.accelerate = !no_accel;
      std::optional<fs::path> dir;
      if (!wham_out.empty()) dir = wham_out;
      const auto r = run_wham(manifest, wopt, dir, log_err);
      std::cout << r.f_path.string() << '\n';
      return kOk;
    }
    if (*pmfc) {
      if (cvs.size() > 2) throw ConfigError("at most two CVs", "--cv");
      const double factor = degrees ? kPi / 180.0 : 1.0;
      for (std::size_t i = 0; i < cvs.size(); ++i) {
        PmfAxisSpec a;
        a.cv = cvs[i];
        a.bins = i < bins.size() ? bins[i] : (cvs.size() == 1 ? 72 : 64);
        if (i < ranges.size() && !ranges[i].empty() && ranges[i] != "-") a.range = parse_range(ranges[i], factor);
        req.axes.push_back(a);
      }
      if (marginalize >= 0) req.marginalize = static_cast<std::size_t>(marginalize);
      req.bootstrap = !no_bootstrap;
      const auto c = load_campaign(pmf_manifest);
      const auto w = read_weights(weights_path.empty() ? c.dir / "weights.csv" : weights_path);
      write_pmf(pmf_out, campaign_pmf(c, w, req));
      std::cout << pmf_out << '\n';
      return kOk;
    }
    if (*cmp) {
      if (use_oracle == !pmf_b.empty()) throw ConfigError("give either a reference PMF or --oracle", "compare");
      if (!barrier_range.empty()) copt.barrier_range = parse_range(barrier_range, degrees ? kPi / 180.0 : 1.0);
      const Pmf a = read_pmf(pmf_a);
      const Pmf b = use_oracle ? oracle_like(a, OracleMode::BinAverage, oracle_points, cmp_jobs) : read_pmf(pmf_b);
      if (!oracle_out.empty()) write_pmf(oracle_out, b);
      const auto r = compare_pmfs(a, b, copt);
      if (!report_out.empty()) write_compare_report(report_out, r);
      std::cout << "shared_bins " << r.shared_bins << "\nrmsd " << format_double(r.rmsd) << "\nmax_abs "
                << format_double(r.max_abs) << "\nbarrier_delta " << format_double(r.barrier_delta) << '\n';
      return r.within ? kOk : kTolerance;
    }
  } catch (const SimulationDiverged& e) {
    std::cerr << "simulation diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const NotConverged& e) {
    std::cerr << e.what() << '\n';
    return kDiverged;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}
