#include "itsus/fixtures.h"

#include <fstream>
#include <random>

#include "json.hpp"
#include "itsus/analysis.h"
#include "itsus/oracle.h"
#include "itsus/trajectory_io.h"

namespace itsus {

using nlohmann::json;
namespace fs = std::filesystem;

double gaussian_window_free_energy(double kappa, double k, double center, double beta0) {
  if (!(kappa > 0.0) || k < 0.0 || !(beta0 > 0.0)) throw ConfigError("need kappa > 0, K >= 0, beta > 0", "fixture");
  return -std::log(std::sqrt(kappa / (kappa + k))) / beta0 + 0.5 * kappa * k * center * center / (kappa + k);
}

GaussianFixture generate_gaussian_wham_fixture(const GaussianFixtureSpec& spec) {
  if (spec.k.size() != spec.centers.size()) throw ConfigError("K and centers differ in length", "fixture");
  if (spec.k.empty()) throw ConfigError("no windows", "fixture");
  if (spec.samples < 1) throw ConfigError("need samples >= 1", "fixture");
  const auto surface = make_surface({"harmonic", {{"kappa", spec.kappa}}});
  const auto cv = coordinate_cv(*surface, 0, "x");
  GaussianFixture fx;
  fx.input.beta0 = spec.beta0;
  fx.input.cv_names = {"x"};
  for (std::size_t i = 0; i < spec.k.size(); ++i) {
    WhamWindow w{static_cast<int>(i), {}, nullptr};
    if (spec.k[i] > 0.0) w.restraints.push_back(make_restraint(cv, spec.centers[i], spec.k[i]));
    const double prec = spec.beta0 * (spec.kappa + spec.k[i]);
    const double mean = spec.k[i] * spec.centers[i] / (spec.kappa + spec.k[i]);
    std::mt19937_64 rng(derive_seed(spec.seed, i));
    std::normal_distribution<double> normal(mean, 1.0 / std::sqrt(prec));
    std::vector<WhamSample> s(static_cast<std::size_t>(spec.samples));
    for (auto& x : s) {
      const double v = normal(rng);
      x = {0.5 * spec.kappa * v * v, {v}};
    }
    fx.input.windows.push_back(std::move(w));
    fx.input.samples.push_back(std::move(s));
    fx.analytic_f.push_back(gaussian_window_free_energy(spec.kappa, spec.k[i], spec.centers[i], spec.beta0));
  }
  const double g = fx.analytic_f[0];
  for (double& f : fx.analytic_f) f -= g;
  return fx;
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Paper: return "PAPER";
    case Provenance::Trivial: return "TRIVIAL";
    case Provenance::Derived: return "DERIVED";
  }
  return "?";
}

Provenance parse_provenance(const std::string& s) {
  if (s == "PAPER") return Provenance::Paper;
  if (s == "TRIVIAL") return Provenance::Trivial;
  if (s == "DERIVED") return Provenance::Derived;
  throw ConfigError("unknown provenance tag '" + s + "'", "provenance");
}

namespace {

double oracle_barrier(const std::string& surface_name, std::size_t index, const Axis& axis,
                      std::optional<std::pair<double, double>> range, int jobs) {
  const auto s = make_surface({surface_name, {}});
  const CollectiveVariable cvs[] = {default_cvs(*s)[index]};
  auto quad = default_quadrature(*s);
  quad.jobs = jobs;
  const auto p = reference_pmf(*s, cvs, HistogramGrid{{axis}}, beta_of(300.0), quad);
  return barrier_height(p, range);
}

int g_jobs = 1;

// Short plain-MD trajectory on the torsion surface kept as a regression record.
std::vector<TrajectoryRecord> short_torsion_run(const PotentialSurface& s) {
  DynamicsConfig cfg;
  cfg.n_steps = 2000;
  cfg.record_stride = 100;
  return run_trajectory(s, plain_force(s), default_cvs(s), cfg, {kPi}, 0, 20241015);
}

constexpr const char* kTrajectoryFile = "torsion_md_short.csv";

}  // namespace

const std::vector<GoldenGenerator>& golden_generators() {
  static const std::vector<GoldenGenerator> gens = {
      {"gaussian.f_analytic", Provenance::Derived, 1e-12,
       "kappa=1, K=4, center=1, beta0=1; closed-form Gaussian integral",
       [] { return gaussian_window_free_energy(1.0, 4.0, 1.0, 1.0); }},
      {"gaussian.f_recovered", Provenance::Derived, 1e-6,
       "binless WHAM on 1e5 direct samples per window (unbiased + K=4 at 1), seed 11; analytic 1.2047",
       [] {
         GaussianFixtureSpec spec;
         spec.k = {0.0, 4.0};
         spec.centers = {0.0, 1.0};
         spec.seed = 11;
         const auto fx = generate_gaussian_wham_fixture(spec);
         WhamOptions o;
         o.tolerance = 1e-10;
         o.jobs = g_jobs;
         return solve(fx.input, o).f[1];
       }},
      {"torsion.cis_barrier", Provenance::Paper, 1e-12, "U(0) - U(pi) on torsion-1d defaults; ~5.0 kcal/mol target",
       [] {
         const auto s = make_surface({"torsion-1d", {}});
         const double a[] = {0.0}, b[] = {kPi};
         return s->energy(a) - s->energy(b);
       }},
      {"torsion.z_ratio_273_450", Provenance::Derived, 1e-9, "Z(273 K)/Z(450 K), trapezoid 2048 points",
       [] {
         const auto s = make_surface({"torsion-1d", {}});
         const auto q = default_quadrature(*s);
         return std::exp(reference_log_partition(*s, beta_of(273.0), q) - reference_log_partition(*s, beta_of(450.0), q));
       }},
      {"double_channel.u_origin", Provenance::Trivial, 1e-12, "h + w + c with defaults",
       [] {
         const auto s = make_surface({"double-channel", {}});
         const double x[] = {0.0, 0.0};
         return s->energy(x);
       }},
      {"double_channel.oracle_barrier_x", Provenance::Derived, 1e-3,
       "oracle PMF along x at 300 K, 64 bins on [-1.6, 1.6], max over |x| <= 0.3",
       [] { return oracle_barrier("double-channel", 0, Axis{-1.6, 1.6, 64, false}, std::make_pair(-0.3, 0.3), g_jobs); }},
      {"amide.oracle_barrier_omega", Provenance::Derived, 1e-3,
       "oracle PMF along omega at 300 K, 72 bins; design target 12 +- 0.5",
       [] { return oracle_barrier("amide-2d", 0, angle_axis(72), std::nullopt, g_jobs); }},
      {"bias.minimal_image", Provenance::Derived, 1e-9, "K=45, center 170 deg, cv -170 deg",
       [] {
         const auto s = make_surface({"torsion-1d", {}});
         const auto r = make_restraint(default_cvs(*s)[0], deg2rad(170.0), 45.0);
         return bias_energy(r, deg2rad(-170.0));
       }},
      {"its.effective_energy_example", Provenance::Derived, 1e-12, "beta={1,0.8} (internal units), n={1,1}, U=10",
       [] {
         const ItsSchedule its({temperature_of(1.0), temperature_of(0.8)}, {0.0, 0.0}, temperature_of(1.0));
         return effective_energy(its, 10.0);
       }},
      {"its.force_scale_example", Provenance::Derived, 1e-12, "beta={1,0.8} (internal units), n={1,1}, U=10",
       [] {
         const ItsSchedule its({temperature_of(1.0), temperature_of(0.8)}, {0.0, 0.0}, temperature_of(1.0));
         return force_scale(its, 10.0);
       }},
      {"pmf.ratio10_300K", Provenance::Derived, 1e-9, "(1/beta0) ln 10 at 300 K",
       [] { return std::log(10.0) / beta_of(300.0); }},
  };
  return gens;
}

std::vector<GoldenEntry> read_golden(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read golden file", path.string());
  try {
    const json j = json::parse(in);
    std::vector<GoldenEntry> out;
    for (const auto& e : j.at("entries")) {
      GoldenEntry g;
      g.name = e.at("name").get<std::string>();
      g.value = e.at("value").get<double>();
      g.tolerance = e.at("tolerance").get<double>();
      g.provenance = parse_provenance(e.at("provenance").get<std::string>());
      g.note = e.value("note", "");
      out.push_back(std::move(g));
    }
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed golden file: ") + e.what(), path.string());
  }
}

void write_golden(const fs::path& path, const std::vector<GoldenEntry>& entries) {
  json j;
  j["version"] = 1;
  j["entries"] = json::array();
  for (const auto& e : entries)
    j["entries"].push_back({{"name", e.name},
                            {"value", e.value},
                            {"tolerance", e.tolerance},
                            {"provenance", to_string(e.provenance)},
                            {"note", e.note}});
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing", path.string());
  out << j.dump(1) << '\n';
}

bool DriftReport::ok() const {
  return errors.empty() && std::all_of(items.begin(), items.end(), [](const DriftItem& i) { return i.ok; });
}

DriftReport regenerate_golden(const fs::path& dir, int jobs) {
  g_jobs = jobs;
  DriftReport r;
  std::vector<GoldenEntry> pinned;
  try {
    pinned = read_golden(dir / "golden.json");
  } catch (const ConfigError& e) {
    r.errors.push_back(e.what());
    return r;
  }
  for (const auto& g : golden_generators()) {
    const auto it = std::find_if(pinned.begin(), pinned.end(), [&](const GoldenEntry& e) { return e.name == g.name; });
    if (it == pinned.end()) {
      r.errors.push_back("missing pinned value: " + g.name);
      continue;
    }
    if (it->provenance != g.provenance)
      r.errors.push_back(g.name + ": provenance " + to_string(it->provenance) + ", expected " + to_string(g.provenance));
    DriftItem d{g.name, it->value, g.compute(), it->tolerance, false};
    d.ok = std::isfinite(d.current) && std::abs(d.current - d.pinned) <= d.tolerance;
    r.items.push_back(d);
  }
  for (const auto& e : pinned)
    if (std::none_of(golden_generators().begin(), golden_generators().end(),
                     [&](const GoldenGenerator& g) { return g.name == e.name; }))
      r.errors.push_back("pinned value without a generator: " + e.name);

  try {
    const auto s = make_surface({"torsion-1d", {}});
    const auto stored = read_trajectory(dir / kTrajectoryFile);
    const auto fresh = short_torsion_run(*s);
    double worst = 0.0;
    if (stored.records.size() != fresh.size()) {
      r.errors.push_back(std::string(kTrajectoryFile) + ": record count differs");
    } else {
      for (std::size_t i = 0; i < fresh.size(); ++i) {
        worst = std::max(worst, std::abs(fresh[i].potential - stored.records[i].potential));
        for (std::size_t d = 0; d < fresh[i].coords.size(); ++d)
          worst = std::max(worst, std::abs(fresh[i].coords[d] - stored.records[i].coords[d]));
      }
      r.items.push_back({kTrajectoryFile, 0.0, worst, 1e-9, worst <= 1e-9});
    }
  } catch (const ConfigError& e) {
    r.errors.push_back(e.what());
  }
  return r;
}

void write_fixtures(const fs::path& dir, int jobs) {
  g_jobs = jobs;
  fs::create_directories(dir);
  std::vector<GoldenEntry> entries;
  for (const auto& g : golden_generators()) entries.push_back({g.name, g.compute(), g.tolerance, g.provenance, g.note});
  write_golden(dir / "golden.json", entries);
  const auto s = make_surface({"torsion-1d", {}});
  write_trajectory(dir / kTrajectoryFile, default_cvs(*s), short_torsion_run(*s), 1);
}

}  // namespace itsus
