#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "itsus/integrator.h"

namespace itsus {

/// Trajectory file: comma-separated text. One header line naming the columns
///   time,q0,...,q{d-1},U,<cv names...>,window_id
/// then one row per record. Values are written in shortest round-trip form.
struct TrajectoryFile {
  std::size_t dim = 0;
  std::vector<std::string> cv_names;
  std::vector<TrajectoryRecord> records;
};

void write_trajectory(const std::filesystem::path& path, std::span<const CollectiveVariable> cvs,
                      std::span<const TrajectoryRecord> records, std::size_t dim);

/// Throws ConfigError on malformed files.
TrajectoryFile read_trajectory(const std::filesystem::path& path);

/// Splits a line on commas (no quoting; none of our fields contain commas).
std::vector<std::string> split_csv(const std::string& line);

/// Parses a double; "NA" and "nan" yield NaN. Throws ConfigError otherwise.
double parse_double(const std::string& field, const std::string& context);

}  // namespace itsus
