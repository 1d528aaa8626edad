#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "itsus/surface.h"

namespace testing {

// Central difference of f along each coordinate.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double dn = f(x);
    x[i] = x0;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

// |a - b| relative to max(|a|, 1): plain relative error, with a unit floor so
// components that vanish at a point are compared absolutely.
inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), 1.0); }

inline double max_rel_err(std::span<const double> a, std::span<const double> b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, rel_err(a[i], b[i]));
  return e;
}

inline std::vector<double> random_point(const itsus::PotentialSurface& s, std::mt19937_64& rng) {
  std::vector<double> x;
  for (const auto& [lo, hi] : s.domain()) x.push_back(std::uniform_real_distribution<double>(lo, hi)(rng));
  return x;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("itsus-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testing
