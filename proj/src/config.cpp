#include "itsus/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace itsus {

using nlohmann::json;

Method parse_method(const std::string& s) {
  if (s == "md") return Method::Md;
  if (s == "its") return Method::Its;
  if (s == "us") return Method::Us;
  if (s == "its-us") return Method::ItsUs;
  throw ConfigError("unknown method '" + s + "' (expected md, its, us, its-us)", "method");
}

const char* to_string(Method m) {
  switch (m) {
    case Method::Md: return "md";
    case Method::Its: return "its";
    case Method::Us: return "us";
    case Method::ItsUs: return "its-us";
  }
  return "?";
}

namespace {

// Object reader that remembers which keys were consumed, so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("expected an object", path_.empty() ? "<root>" : path_);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing required key", field(key));
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key) {
    const json& v = raw(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("expected a number", field(key));
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError("expected an integer", field(key));
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("expected a string", field(key));
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("expected true/false", field(key));
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("wrong type: ") + e.what(), field(key));
    }
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError("expected a number or a list of numbers", field(key));
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("expected a list of numbers", field(key));
      out.push_back(e.get<double>());
    }
    return out;
  }

  Section child(const std::string& key) { return Section(raw(key), field(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("unknown key", field(it.key()));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double angle_factor(Section& s) {
  const std::string units = s.get<std::string>("units", "radians");
  if (units == "degrees") return kPi / 180.0;
  if (units == "radians" || units == "native") return 1.0;
  throw ConfigError("expected degrees, radians or native", s.field("units"));
}

WindowAxisSpec parse_axis(Section& s) {
  WindowAxisSpec a;
  a.cv = s.get<std::string>("cv");
  const double f = angle_factor(s);
  if (s.has("centers")) {
    if (s.has("range") || s.has("count"))
      throw ConfigError("give either centers or range+count", s.field("centers"));
    for (double c : s.numbers("centers")) a.centers.push_back(c * f);
    if (a.centers.empty()) throw ConfigError("window schedule is empty", s.field("centers"));
  } else {
    const auto range = s.numbers("range");
    if (range.size() != 2) throw ConfigError("expected [lo, hi]", s.field("range"));
    const int count = s.get<int>("count");
    if (count < 1) throw ConfigError("window schedule is empty", s.field("count"));
    a.range = std::make_pair(range[0] * f, range[1] * f);
    a.count = count;
  }
  a.k = s.numbers("k");
  for (double k : a.k)
    if (!(k > 0.0)) throw ConfigError("force constants must be > 0", s.field("k"));
  return a;
}

DynamicsConfig parse_dynamics(Section s) {
  DynamicsConfig d;
  d.dt = s.get<double>("dt", d.dt);
  d.temperature = s.get<double>("temperature", d.temperature);
  d.friction = s.get<double>("friction", d.friction);
  if (s.has("mass")) d.mass = s.numbers("mass");
  d.n_steps = s.get<std::int64_t>("n_steps");
  d.record_stride = s.get<std::int64_t>("record_stride", d.record_stride);
  d.equilibration_steps = s.get<std::int64_t>("equilibration_steps", d.equilibration_steps);
  s.finish();
  if (!(d.dt > 0.0)) throw ConfigError("must be > 0", "dynamics.dt");
  if (!(d.temperature > 0.0)) throw ConfigError("must be > 0", "dynamics.temperature");
  if (!(d.friction >= 0.0)) throw ConfigError("must be >= 0", "dynamics.friction");
  if (d.n_steps < 1) throw ConfigError("must be >= 1", "dynamics.n_steps");
  if (d.record_stride < 1) throw ConfigError("must be >= 1", "dynamics.record_stride");
  if (d.equilibration_steps < 0) throw ConfigError("must be >= 0", "dynamics.equilibration_steps");
  return d;
}

ItsSection parse_its(Section s, const std::filesystem::path& base) {
  ItsSection its;
  its.t_min = s.get<double>("t_min", its.t_min);
  its.t_max = s.get<double>("t_max", its.t_max);
  its.count = s.get<int>("count", its.count);
  const std::string spacing = s.get<std::string>("spacing", "geometric");
  if (spacing == "geometric")
    its.spacing = LadderSpacing::Geometric;
  else if (spacing == "linear")
    its.spacing = LadderSpacing::Linear;
  else
    throw ConfigError("expected geometric or linear", s.field("spacing"));
  if (s.has("schedule_file")) {
    std::filesystem::path p = s.get<std::string>("schedule_file");
    its.schedule_file = p.is_relative() ? base / p : p;
  }
  if (s.has("calibration")) {
    Section c = s.child("calibration");
    auto& o = its.calibration;
    o.rounds = c.get<int>("rounds", o.rounds);
    o.steps_per_round = c.get<std::int64_t>("steps_per_round", o.steps_per_round);
    o.record_stride = c.get<std::int64_t>("record_stride", o.record_stride);
    o.equilibration_steps = c.get<std::int64_t>("equilibration_steps", o.equilibration_steps);
    o.mixing = c.get<double>("mixing", o.mixing);
    o.flatness_threshold = c.get<double>("flatness", o.flatness_threshold);
    o.max_log_step = c.get<double>("max_log_step", o.max_log_step);
    c.finish();
    if (o.rounds < 1) throw ConfigError("must be >= 1", c.field("rounds"));
    if (o.steps_per_round < 1) throw ConfigError("must be >= 1", c.field("steps_per_round"));
    if (o.record_stride < 1) throw ConfigError("must be >= 1", c.field("record_stride"));
  }
  s.finish();
  if (its.count < 1) throw ConfigError("must be >= 1", "its.count");
  if (!(its.t_min > 0.0) || its.t_max < its.t_min) throw ConfigError("need 0 < t_min <= t_max", "its");
  return its;
}

WindowSection parse_windows(Section s) {
  WindowSection w;
  w.seed_iterations = s.get<int>("seed_iterations", w.seed_iterations);
  if (s.has("axes")) {
    const json& axes = s.raw("axes");
    if (!axes.is_array() || axes.empty()) throw ConfigError("expected a non-empty list", s.field("axes"));
    for (std::size_t i = 0; i < axes.size(); ++i) {
      Section a(axes[i], s.field("axes[" + std::to_string(i) + "]"));
      w.axes.push_back(parse_axis(a));
      a.finish();
    }
  } else {
    w.axes.push_back(parse_axis(s));
  }
  s.finish();
  return w;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& source_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("not valid JSON: ") + e.what(), "<root>");
  }
  Section s(root, "");
  RunConfig c;
  c.source_dir = source_dir;
  c.name = s.get<std::string>("name", "run");
  c.description = s.get<std::string>("description", "");
  c.budget_scaling = s.get<std::string>("budget_scaling", "");
  {
    Section sf = s.child("surface");
    c.surface.name = sf.get<std::string>("name");
    if (sf.has("params")) {
      const json& p = sf.raw("params");
      if (!p.is_object()) throw ConfigError("expected an object", "surface.params");
      for (auto it = p.begin(); it != p.end(); ++it) {
        if (!it.value().is_number()) throw ConfigError("expected a number", "surface.params." + it.key());
        c.surface.params[it.key()] = it.value().get<double>();
      }
    }
    sf.finish();
    // surface names and parameter keys are checked here, at parse time
    try {
      make_surface(c.surface);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), "surface");
    }
  }
  c.method = parse_method(s.get<std::string>("method"));
  c.dynamics = parse_dynamics(s.child("dynamics"));
  c.seed = s.get<std::uint64_t>("seed", 0);
  c.replicas = s.get<int>("replicas", 1);
  if (c.replicas < 1) throw ConfigError("must be >= 1", "replicas");
  if (s.has("initial_coords")) c.initial_coords = s.numbers("initial_coords");
  if (s.has("its")) c.its = parse_its(s.child("its"), source_dir);
  if (s.has("windows")) c.windows = parse_windows(s.child("windows"));
  c.output = s.get<std::string>("output", c.name);
  s.finish();

  if (uses_its(c.method) && !c.its) throw ConfigError("method '" + std::string(to_string(c.method)) + "' requires this section", "its");
  if (uses_windows(c.method) && !c.windows)
    throw ConfigError("method '" + std::string(to_string(c.method)) + "' requires this section", "windows");
  if (!uses_windows(c.method) && c.windows) throw ConfigError("not used by method '" + std::string(to_string(c.method)) + "'", "windows");
  if (!uses_its(c.method) && c.its) throw ConfigError("not used by method '" + std::string(to_string(c.method)) + "'", "its");

  const auto surface = make_surface(c.surface);
  c.dynamics.validate(surface->dim());
  if (c.initial_coords && c.initial_coords->size() != surface->dim())
    throw ConfigError("needs " + std::to_string(surface->dim()) + " values", "initial_coords");
  if (c.windows) build_windows(*c.windows, *surface);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file", path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

CollectiveVariable find_cv(const PotentialSurface& surface, const std::string& name) {
  for (const auto& cv : default_cvs(surface))
    if (cv.name == name) return cv;
  std::string known;
  for (const auto& cv : default_cvs(surface)) known += (known.empty() ? "" : ", ") + cv.name;
  throw ConfigError("unknown CV '" + name + "' for surface " + surface.name() + " (known: " + known + ")", "cv");
}

WindowSchedule build_windows(const WindowSection& section, const PotentialSurface& surface) {
  std::optional<WindowSchedule> out;
  for (std::size_t i = 0; i < section.axes.size(); ++i) {
    const auto& a = section.axes[i];
    const std::string field = "windows.axes[" + std::to_string(i) + "]";
    WindowSchedule s;
    try {
      const auto cv = find_cv(surface, a.cv);
      s = a.range ? window_schedule(cv, a.range->first, a.range->second, a.count, a.k)
                  : window_schedule(cv, a.centers, a.k);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), field);
    }
    out = out ? outer_product(*out, s) : std::move(s);
  }
  if (!out) throw ConfigError("window schedule is empty", "windows");
  return *out;
}

std::vector<double> build_ladder(const ItsSection& its) {
  return temperature_ladder(its.t_min, its.t_max, its.count, its.spacing);
}

}  // namespace itsus
