#include "itsus/campaign.h"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>

#include "json.hpp"

namespace itsus {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json surface_json(const SurfaceSpec& s) {
  json p = json::object();
  for (const auto& [k, v] : s.params) p[k] = v;
  return {{"name", s.name}, {"params", p}};
}

SurfaceSpec surface_from_json(const json& j) {
  SurfaceSpec s;
  s.name = j.at("name").get<std::string>();
  for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it) s.params[it.key()] = it.value().get<double>();
  return s;
}

void log_line(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string entry_file(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "traj_%04d.csv", id);
  return buf;
}

}  // namespace

void write_manifest(const fs::path& path, const Manifest& m) {
  json j;
  j["name"] = m.name;
  j["method"] = to_string(m.method);
  j["surface"] = surface_json(m.surface);
  j["temperature"] = m.temperature;
  j["schedule_file"] = m.schedule_file ? json(*m.schedule_file) : json(nullptr);
  j["cv_names"] = m.cv_names;
  j["entries"] = json::array();
  for (const auto& e : m.entries) {
    json r = json::array();
    for (const auto& h : e.restraints) r.push_back({{"cv", h.cv.name}, {"center", h.center}, {"k", h.k}});
    j["entries"].push_back({{"id", e.id},
                            {"file", e.file},
                            {"seed", e.seed},
                            {"status", e.status},
                            {"wall_clock", e.wall_clock},
                            {"restraints", r}});
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot open for writing", tmp.string());
    out << j.dump(1) << '\n';
  }
  fs::rename(tmp, path);
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest", path.string());
  try {
    const json j = json::parse(in);
    Manifest m;
    m.name = j.at("name").get<std::string>();
    m.method = parse_method(j.at("method").get<std::string>());
    m.surface = surface_from_json(j.at("surface"));
    m.temperature = j.at("temperature").get<double>();
    if (!j.at("schedule_file").is_null()) m.schedule_file = j.at("schedule_file").get<std::string>();
    m.cv_names = j.at("cv_names").get<std::vector<std::string>>();
    const auto surface = make_surface(m.surface);
    for (const auto& e : j.at("entries")) {
      ManifestEntry me;
      me.id = e.at("id").get<int>();
      me.file = e.at("file").get<std::string>();
      me.seed = e.at("seed").get<std::uint64_t>();
      me.status = e.at("status").get<std::string>();
      if (me.status != "pending" && me.status != "done" && me.status != "failed")
        throw ConfigError("bad status '" + me.status + "'", path.string());
      me.wall_clock = e.at("wall_clock").get<double>();
      for (const auto& r : e.at("restraints"))
        me.restraints.push_back(make_restraint(find_cv(*surface, r.at("cv").get<std::string>()),
                                               r.at("center").get<double>(), r.at("k").get<double>()));
      m.entries.push_back(std::move(me));
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what(), path.string());
  }
}

fs::path resolve_output(const RunConfig& config, const RunOptions& options) {
  if (options.out) return *options.out;
  if (config.output.is_relative())
    if (const char* root = std::getenv("ITSUS_OUTPUT_ROOT"); root && *root) return fs::path(root) / config.output;
  return config.output;
}

std::vector<double> default_start(const PotentialSurface& surface) {
  const std::size_t dim = surface.dim();
  const int n = dim <= 2 ? 101 : 21;
  std::vector<double> best(dim), x(dim), g(dim);
  double best_u = std::numeric_limits<double>::infinity();
  std::vector<int> idx(dim, 0);
  while (true) {
    for (std::size_t d = 0; d < dim; ++d) {
      const auto [lo, hi] = surface.domain()[d];
      x[d] = lo + (hi - lo) * idx[d] / (n - 1);
    }
    const double u = surface.evaluate(x, g);
    if (u < best_u) {
      best_u = u;
      best = x;
    }
    std::size_t d = 0;
    while (d < dim && ++idx[d] == n) idx[d++] = 0;
    if (d == dim) break;
  }
  surface.wrap(best);
  return best;
}

namespace {

std::shared_ptr<const ItsSchedule> obtain_schedule(const RunConfig& config, const fs::path& dir,
                                                   const RunOptions& options, std::optional<std::string>& rel) {
  if (!config.its) return nullptr;
  if (config.its->schedule_file) {
    rel = fs::absolute(*config.its->schedule_file).string();
    return std::make_shared<ItsSchedule>(read_schedule(*config.its->schedule_file));
  }
  rel = "schedule.txt";
  const fs::path p = dir / "schedule.txt";
  if (fs::exists(p) && !options.force) {
    log_line(options.log, "reusing " + p.string());
    return std::make_shared<ItsSchedule>(read_schedule(p));
  }
  const auto out = run_calibration(config, options);
  if (!out.result.report.converged)
    log_line(options.log, "warning: calibration did not reach the flatness threshold (flatness " +
                              format_double(out.result.report.flatness) + "); using best schedule");
  return std::make_shared<ItsSchedule>(out.result.schedule);
}

}  // namespace

CalibrationOutcome run_calibration(const RunConfig& config, const RunOptions& options) {
  if (!config.its) throw ConfigError("calibration needs this section", "its");
  const auto surface = make_surface(config.surface);
  const fs::path dir = resolve_output(config, options);
  fs::create_directories(dir);
  const auto ladder = build_ladder(*config.its);
  DynamicsConfig trial = config.dynamics;
  trial.seed = derive_seed(options.seed.value_or(config.seed), 0xCA11B8A7EULL);
  const auto start = config.initial_coords.value_or(default_start(*surface));
  log_line(options.log, "calibrating " + std::to_string(ladder.size()) + " temperatures");
  CalibrationOutcome out{dir / "schedule.txt", dir / "calibration.json",
                         calibrate_weights(*surface, ladder, config.dynamics.temperature, trial,
                                           config.its->calibration, start)};
  write_schedule(out.schedule_path, out.result.schedule);
  write_calibration_report(out.report_path, out.result.report);
  log_line(options.log, "calibration: " + std::to_string(out.result.report.iterations) + " rounds, flatness " +
                            format_double(out.result.report.flatness) +
                            (out.result.report.converged ? "" : " (not converged)"));
  return out;
}

CampaignResult run_campaign(const RunConfig& config, const RunOptions& options) {
  const auto surface = make_surface(config.surface);
  const auto cvs = default_cvs(*surface);
  CampaignResult res;
  res.dir = resolve_output(config, options);
  res.manifest_path = res.dir / "manifest.json";
  fs::create_directories(res.dir);
  const std::uint64_t seed = options.seed.value_or(config.seed);

  Manifest& m = res.manifest;
  m.name = config.name;
  m.method = config.method;
  m.surface = config.surface;
  m.temperature = config.dynamics.temperature;
  for (const auto& cv : cvs) m.cv_names.push_back(cv.name);

  std::vector<std::optional<UmbrellaWindow>> windows;
  if (config.windows) {
    for (auto& w : build_windows(*config.windows, *surface).windows) windows.emplace_back(std::move(w));
  } else {
    const int replicas = options.replicas.value_or(config.replicas);
    if (replicas < 1) throw ConfigError("must be >= 1", "replicas");
    windows.assign(static_cast<std::size_t>(replicas), std::nullopt);
  }
  for (std::size_t i = 0; i < windows.size(); ++i) {
    ManifestEntry e;
    e.id = windows[i] ? windows[i]->id : static_cast<int>(i);
    e.file = entry_file(e.id);
    e.seed = derive_seed(seed, static_cast<std::uint64_t>(e.id));
    if (windows[i]) e.restraints = windows[i]->restraints;
    m.entries.push_back(std::move(e));
  }

  // carry over finished windows from a previous run of the same campaign
  if (!options.force && fs::exists(res.manifest_path)) {
    const Manifest old = read_manifest(res.manifest_path);
    for (auto& e : m.entries)
      for (const auto& o : old.entries)
        if (o.id == e.id && o.status == "done" && o.seed == e.seed && fs::exists(res.dir / o.file)) {
          e.status = "done";
          e.wall_clock = o.wall_clock;
        }
  }

  const auto its = obtain_schedule(config, res.dir, options, m.schedule_file);
  if (its && !its->brackets_t0())
    log_line(options.log, "warning: ladder does not bracket T0 = " + format_double(its->t0()));
  write_manifest(res.manifest_path, m);

  const auto start = config.initial_coords.value_or(default_start(*surface));
  const int seed_iterations = config.windows ? config.windows->seed_iterations : 0;
  std::mutex mu;
  std::optional<std::string> first_failure;
  std::vector<double> failure_coords;
  parallel_chunks(m.entries.size(), 1, options.jobs, [&](std::size_t i, std::size_t, std::size_t) {
    auto& e = m.entries[i];
    if (e.status == "done") {
      std::lock_guard lock(mu);
      ++res.skipped;
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      BiasedSystem sys(surface, its, windows[i]);
      auto x0 = windows[i] ? seed_window_coords(*surface, *windows[i], start, seed_iterations) : start;
      DynamicsConfig cfg = config.dynamics;
      cfg.seed = e.seed;
      const auto records = run_trajectory(*surface, sys.provider(), cvs, cfg, std::move(x0), e.id, e.seed);
      write_trajectory(res.dir / e.file, cvs, records, surface->dim());
      e.status = "done";
    } catch (const SimulationDiverged& ex) {
      e.status = "failed";
      std::lock_guard lock(mu);
      if (!first_failure) {
        first_failure = "window " + std::to_string(e.id) + ": " + ex.what();
        failure_coords = ex.coords();
      }
    }
    e.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::lock_guard lock(mu);
    ++res.ran;
    log_line(options.log, "window " + std::to_string(e.id) + " " + e.status);
  });
  write_manifest(res.manifest_path, m);
  if (first_failure) throw SimulationDiverged(*first_failure, failure_coords);
  return res;
}

LoadedCampaign load_campaign(const fs::path& manifest_path) {
  LoadedCampaign c;
  c.dir = manifest_path.parent_path();
  c.manifest = read_manifest(manifest_path);
  c.surface = make_surface(c.manifest.surface);
  if (c.manifest.schedule_file) {
    fs::path p = *c.manifest.schedule_file;
    if (p.is_relative()) p = c.dir / p;
    c.its = std::make_shared<ItsSchedule>(read_schedule(p));
  }
  for (const auto& e : c.manifest.entries) {
    if (e.status != "done") throw ConfigError("window " + std::to_string(e.id) + " is " + e.status, manifest_path.string());
    const fs::path p = c.dir / e.file;
    if (!fs::exists(p)) throw ConfigError("missing trajectory " + p.string(), manifest_path.string());
    c.trajectories.push_back(read_trajectory(p));
  }
  return c;
}

WhamInput wham_input(const LoadedCampaign& c) {
  WhamInput in;
  in.beta0 = beta_of(c.manifest.temperature);
  in.cv_names = c.manifest.cv_names;
  for (std::size_t i = 0; i < c.manifest.entries.size(); ++i) {
    const auto& e = c.manifest.entries[i];
    const auto& t = c.trajectories[i];
    if (t.cv_names != in.cv_names) throw ConfigError("CV columns differ from the manifest", e.file);
    in.windows.push_back({e.id, e.restraints, c.its});
    std::vector<WhamSample> s;
    s.reserve(t.records.size());
    for (const auto& r : t.records) s.push_back({r.potential, r.cvs});
    in.samples.push_back(std::move(s));
  }
  return in;
}

void write_free_energies(const fs::path& path, std::span<const int> ids, std::span<const double> f) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing", path.string());
  out << "window_id,f\n";
  for (std::size_t i = 0; i < f.size(); ++i) out << ids[i] << ',' << format_double(f[i]) << '\n';
}

std::vector<std::pair<int, double>> read_free_energies(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read", path.string());
  std::string line;
  std::getline(in, line);
  if (line != "window_id,f") throw ConfigError("unexpected header", path.string());
  std::vector<std::pair<int, double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2) throw ConfigError("wrong column count", path.string());
    out.emplace_back(static_cast<int>(parse_double(f[0], path.string())), parse_double(f[1], path.string()));
  }
  return out;
}

void write_weights(const fs::path& path, const LoadedCampaign& c, std::span<const double> log_weights) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing", path.string());
  out << "window_id,sample,log_weight\n";
  std::size_t k = 0;
  for (std::size_t i = 0; i < c.trajectories.size(); ++i)
    for (std::size_t s = 0; s < c.trajectories[i].records.size(); ++s, ++k)
      out << c.manifest.entries[i].id << ',' << s << ',' << format_double(log_weights[k]) << '\n';
  if (k != log_weights.size()) throw DimensionMismatch(log_weights.size(), k);
}

std::vector<double> read_weights(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read", path.string());
  std::string line;
  std::getline(in, line);
  if (line != "window_id,sample,log_weight") throw ConfigError("unexpected header", path.string());
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw ConfigError("wrong column count", path.string());
    out.push_back(std::exp(parse_double(f[2], path.string())));
  }
  return out;
}

WhamOutcome run_wham(const fs::path& manifest_path, const WhamOptions& options, std::optional<fs::path> out_dir,
                     const Logger& log) {
  const auto c = load_campaign(manifest_path);
  const auto input = wham_input(c);
  WhamOutcome out;
  out.solution = solve(input, options);
  const auto& sol = out.solution;
  const fs::path dir = out_dir.value_or(c.dir);
  fs::create_directories(dir);
  std::vector<int> ids;
  for (const auto& e : c.manifest.entries) ids.push_back(e.id);
  out.f_path = dir / "f.csv";
  out.weights_path = dir / "weights.csv";
  out.summary_path = dir / "wham.json";
  write_free_energies(out.f_path, ids, sol.f);
  write_weights(out.weights_path, c, sol.log_weights);
  json j;
  j["converged"] = sol.converged;
  j["iterations"] = sol.iterations;
  j["residual"] = sol.residual;
  j["tolerance"] = options.tolerance;
  j["warnings"] = json::array();
  for (const auto& w : sol.warnings) j["warnings"].push_back({{"window_id", w.window_id}, {"max_overlap", w.max_overlap}});
  std::ofstream(out.summary_path) << j.dump(1) << '\n';

  log_line(log, "wham: " + std::to_string(sol.iterations) + " iterations, residual " + format_double(sol.residual) +
                    (sol.converged ? "" : " (NOT converged)"));
  for (const auto& w : sol.warnings)
    log_line(log, "warning: window " + std::to_string(w.window_id) + " barely overlaps any other (max overlap " +
                      format_double(w.max_overlap) + ")");
  if (!sol.converged)
    throw NotConverged("WHAM did not converge: residual " + format_double(sol.residual) + " after " +
                       std::to_string(sol.iterations) + " iterations");
  return out;
}

Pmf campaign_pmf(const LoadedCampaign& c, std::span<const double> weights, const PmfRequest& req) {
  if (req.axes.empty() || req.axes.size() > 2) throw ConfigError("need one or two CV axes", "pmf.cv");
  HistogramGrid grid;
  std::vector<std::size_t> column;
  std::vector<std::string> names;
  for (const auto& a : req.axes) {
    const auto cv = find_cv(*c.surface, a.cv);
    const auto it = std::find(c.manifest.cv_names.begin(), c.manifest.cv_names.end(), a.cv);
    if (it == c.manifest.cv_names.end()) throw ConfigError("CV '" + a.cv + "' not recorded", "pmf.cv");
    column.push_back(static_cast<std::size_t>(it - c.manifest.cv_names.begin()));
    names.push_back(a.cv);
    if (cv.periodic) {
      if (a.range && std::abs((a.range->second - a.range->first) - cv.period) > 1e-9)
        throw ConfigError("periodic CV grids must span one period", "pmf.range");
      grid.axes.push_back(Axis{-0.5 * cv.period, 0.5 * cv.period, a.bins, true});
    } else {
      const auto r = a.range.value_or(c.surface->domain()[cv.index]);
      grid.axes.push_back(Axis{r.first, r.second, a.bins, false});
    }
  }
  grid.validate();
  std::vector<double> values;
  std::vector<int> segment;
  for (std::size_t i = 0; i < c.trajectories.size(); ++i)
    for (const auto& r : c.trajectories[i].records) {
      for (std::size_t col : column) values.push_back(r.cvs[col]);
      segment.push_back(static_cast<int>(i));
    }
  if (weights.size() != segment.size()) throw DimensionMismatch(segment.size(), weights.size());
  const double beta0 = beta_of(c.manifest.temperature);

  Pmf p;
  if (req.marginalize) {
    if (grid.dim() != 2 || *req.marginalize > 1) throw ConfigError("marginalize needs a 2-D grid and axis 0 or 1", "pmf.marginalize");
    p = pmf(marginalize(weighted_density(grid, values, weights), *req.marginalize), beta0,
            {names[*req.marginalize]});
  } else if (req.bootstrap && !uses_windows(c.manifest.method) && c.trajectories.size() > 1) {
    p = pmf_replica_spread(grid, values, weights, segment, beta0, names);
  } else if (req.bootstrap) {
    p = pmf_with_bootstrap(grid, values, weights, segment, beta0, req.bootstrap_options, names);
  } else {
    p = pmf(weighted_density(grid, values, weights), beta0, names);
  }
  p.meta["origin"] = "wham";
  p.meta["method"] = to_string(c.manifest.method);
  p.meta["surface"] = c.manifest.surface.name;
  p.meta["surface_params"] = surface_json(c.manifest.surface).at("params").dump();
  return p;
}

CompareReport compare_pmfs(const Pmf& a, const Pmf& b, const CompareOptions& opt) {
  if (a.grid.axes.size() != b.grid.axes.size()) throw ConfigError("incompatible grids: dimensions differ", "compare");
  for (std::size_t d = 0; d < a.grid.axes.size(); ++d) {
    const auto &x = a.grid.axes[d], &y = b.grid.axes[d];
    if (x.bins != y.bins || x.periodic != y.periodic || std::abs(x.min - y.min) > 1e-9 || std::abs(x.max - y.max) > 1e-9)
      throw ConfigError("incompatible grids on axis " + std::to_string(d), "compare");
  }
  auto aa = a.a, bb = b.a;
  align_min(aa);
  align_min(bb);
  CompareReport r;
  double sum2 = 0.0;
  for (std::size_t i = 0; i < aa.size(); ++i) {
    if (std::isnan(aa[i]) || std::isnan(bb[i]) || bb[i] > opt.cutoff) continue;
    const double d = aa[i] - bb[i];
    sum2 += d * d;
    r.max_abs = std::max(r.max_abs, std::abs(d));
    ++r.shared_bins;
  }
  if (r.shared_bins == 0) throw ConfigError("no shared non-empty bins", "compare");
  r.rmsd = std::sqrt(sum2 / static_cast<double>(r.shared_bins));
  Pmf pa = a, pb = b;
  pa.a = aa;
  pb.a = bb;
  r.barrier_a = barrier_height(pa, opt.barrier_range);
  r.barrier_b = barrier_height(pb, opt.barrier_range);
  r.barrier_delta = r.barrier_a - r.barrier_b;
  r.tolerance = opt.tolerance;
  r.within = r.rmsd <= opt.tolerance;
  return r;
}

void write_compare_report(const fs::path& path, const CompareReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j{{"shared_bins", r.shared_bins}, {"rmsd", num(r.rmsd)},           {"max_abs", num(r.max_abs)},
         {"barrier_a", num(r.barrier_a)}, {"barrier_b", num(r.barrier_b)}, {"barrier_delta", num(r.barrier_delta)},
         {"tolerance", r.tolerance},      {"within_tolerance", r.within}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing", path.string());
  out << j.dump(1) << '\n';
}

Pmf oracle_like(const Pmf& like, OracleMode mode, int points, int jobs) {
  const auto it = like.meta.find("surface");
  const auto t = like.meta.find("temperature");
  if (it == like.meta.end() || t == like.meta.end())
    throw ConfigError("PMF lacks surface/temperature metadata needed for the oracle", "compare");
  SurfaceSpec spec{it->second, {}};
  if (const auto p = like.meta.find("surface_params"); p != like.meta.end()) {
    try {
      const json j = json::parse(p->second);
      for (auto e = j.begin(); e != j.end(); ++e) spec.params[e.key()] = e.value().get<double>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad surface_params: ") + e.what(), "compare");
    }
  }
  const auto surface = make_surface(spec);
  std::vector<CollectiveVariable> cvs;
  for (const auto& n : like.cv_names) cvs.push_back(find_cv(*surface, n));
  auto quad = default_quadrature(*surface, points);
  quad.mode = mode;
  quad.jobs = jobs;
  return reference_pmf(*surface, cvs, like.grid, beta_of(parse_double(t->second, "temperature")), quad);
}

}  // namespace itsus
