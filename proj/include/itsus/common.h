#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace itsus {

/// Boltzmann constant in kcal/(mol K).
inline constexpr double kBoltzmann = 0.0019872041;

/// Converts a force/mass ratio in (kcal/mol/unit) / (amu unit^2) into unit/fs^2.
/// Coordinates are in Angstrom (or radians with mass in amu A^2).
inline constexpr double kAccelerationUnit = 4.184e-4;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline double beta_of(double temperature) { return 1.0 / (kBoltzmann * temperature); }
inline double temperature_of(double beta) { return 1.0 / (kBoltzmann * beta); }

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: unknown names, out-of-range parameters, bad files.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string field = {})
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

/// Non-finite force or coordinates during dynamics.
class SimulationDiverged : public Error {
 public:
  SimulationDiverged(const std::string& what, std::vector<double> coords)
      : Error(what), coords_(std::move(coords)) {}
  const std::vector<double>& coords() const { return coords_; }

 private:
  std::vector<double> coords_;
};

/// Wraps v into (-period/2, period/2].
inline double wrap_periodic(double v, double period) {
  const double half = 0.5 * period;
  double r = std::fmod(v + half, period);
  if (r < 0.0) r += period;
  // r in [0, period); map 0 to +half so that the interval is half-open on the left
  if (r == 0.0) return half;
  return r - half;
}

/// Stable log(sum(exp(x))). Returns -inf for an empty span.
double log_sum_exp(std::span<const double> x);

/// Runs body(begin, end, chunk_index) on fixed-size chunks of [0, n). Chunk
/// boundaries depend only on n and chunk_size, so per-chunk results combined in
/// chunk order are independent of the worker count.
void parallel_chunks(std::size_t n, std::size_t chunk_size, int jobs,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
  return (n + chunk_size - 1) / chunk_size;
}

/// Derives an independent 64-bit seed from (seed, stream) with splitmix64.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace itsus
