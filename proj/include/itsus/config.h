#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "itsus/tempering.h"
#include "itsus/umbrella.h"

namespace itsus {

enum class Method { Md, Its, Us, ItsUs };

Method parse_method(const std::string& s);
const char* to_string(Method m);
inline bool uses_its(Method m) { return m == Method::Its || m == Method::ItsUs; }
inline bool uses_windows(Method m) { return m == Method::Us || m == Method::ItsUs; }

struct ItsSection {
  double t_min = 273.0;
  double t_max = 450.0;
  int count = 60;
  LadderSpacing spacing = LadderSpacing::Geometric;
  std::optional<std::filesystem::path> schedule_file;  // skips calibration when set
  CalibrationOptions calibration;
};

/// One window axis in CV units (radians for angles): explicit centers, or a
/// range with a count whose spacing depends on the CV's periodicity.
struct WindowAxisSpec {
  std::string cv;
  std::vector<double> centers;
  std::optional<std::pair<double, double>> range;
  int count = 0;
  std::vector<double> k;  // one value or one per window
};

struct WindowSection {
  std::vector<WindowAxisSpec> axes;  // several axes form an outer product
  int seed_iterations = 500;
};

struct RunConfig {
  std::string name;
  std::string description;
  std::string budget_scaling;
  SurfaceSpec surface;
  Method method = Method::Md;
  DynamicsConfig dynamics;
  std::uint64_t seed = 0;
  int replicas = 1;
  std::optional<std::vector<double>> initial_coords;
  std::optional<ItsSection> its;
  std::optional<WindowSection> windows;
  std::filesystem::path output;      // relative paths resolve against the output root
  std::filesystem::path source_dir;  // directory of the config file
};

/// Parses a JSON run configuration. Unknown keys, wrong types, and missing
/// method-required sections raise ConfigError naming the field path.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& source_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Window schedule described by the config, resolved against the surface's
/// CVs. Throws ConfigError for unknown CV names.
WindowSchedule build_windows(const WindowSection& section, const PotentialSurface& surface);

std::vector<double> build_ladder(const ItsSection& its);

/// Finds a CV of the surface by name (see default_cvs).
CollectiveVariable find_cv(const PotentialSurface& surface, const std::string& name);

}  // namespace itsus
