#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "itsus/wham.h"

namespace itsus {

/// Harmonic reference U = kappa/2 x^2 sampled directly (no dynamics) under
/// harmonic biases K_i/2 (x - c_i)^2. A window with K_i = 0 is unbiased.
struct GaussianFixtureSpec {
  double kappa = 1.0;
  std::vector<double> k;
  std::vector<double> centers;
  int samples = 100000;
  std::uint64_t seed = 0;
  double beta0 = 1.0;
};

struct GaussianFixture {
  WhamInput input;
  std::vector<double> analytic_f;  // gauge f[0] = 0
};

/// f of one window, e^{-beta f} = <e^{-beta V}> over the unbiased Gaussian:
/// f = -(1/beta) ln sqrt(kappa/(kappa+K)) + kappa K c^2 / (2 (kappa+K)).
double gaussian_window_free_energy(double kappa, double k, double center, double beta0);

GaussianFixture generate_gaussian_wham_fixture(const GaussianFixtureSpec& spec);

/// Provenance tag of a pinned value.
enum class Provenance { Paper, Trivial, Derived };
const char* to_string(Provenance p);
Provenance parse_provenance(const std::string& s);

struct GoldenEntry {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  Provenance provenance = Provenance::Derived;
  std::string note;
};

/// Registered fixture: how to recompute a pinned value from code.
struct GoldenGenerator {
  std::string name;
  Provenance provenance;
  double tolerance;
  std::string note;
  std::function<double()> compute;
};

const std::vector<GoldenGenerator>& golden_generators();

std::vector<GoldenEntry> read_golden(const std::filesystem::path& path);
void write_golden(const std::filesystem::path& path, const std::vector<GoldenEntry>& entries);

struct DriftItem {
  std::string name;
  double pinned = 0.0;
  double current = 0.0;
  double tolerance = 0.0;
  bool ok = false;
};

struct DriftReport {
  std::vector<DriftItem> items;
  std::vector<std::string> errors;  // missing, unknown, or malformed entries
  bool ok() const;
};

/// Recomputes every pinned value under `dir` (golden.json plus the recorded
/// short trajectory) and reports drift. Malformed files are reported as errors.
DriftReport regenerate_golden(const std::filesystem::path& dir, int jobs = 1);

/// Writes golden.json and the recorded trajectory from the current code.
void write_fixtures(const std::filesystem::path& dir, int jobs = 1);

}  // namespace itsus
