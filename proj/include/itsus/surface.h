#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "itsus/common.h"

namespace itsus {

struct Periodicity {
  bool periodic = false;
  double period = 0.0;
};

struct EnergyGradient {
  double energy = 0.0;
  std::vector<double> gradient;
};

/// Analytic potential-energy surface U(R) in kcal/mol. Immutable after
/// construction; evaluation is thread-safe.
class PotentialSurface {
 public:
  virtual ~PotentialSurface() = default;

  const std::string& name() const { return name_; }
  std::size_t dim() const { return periodicity_.size(); }
  const std::vector<Periodicity>& periodicity() const { return periodicity_; }
  const std::map<std::string, double>& params() const { return params_; }
  /// Box used for random testing and as the default quadrature domain.
  const std::vector<std::pair<double, double>>& domain() const { return domain_; }

  /// Unchecked hot-path evaluation: returns U and writes dU/dR into grad.
  virtual double evaluate(std::span<const double> x, std::span<double> grad) const = 0;
  /// Unchecked energy only.
  virtual double energy(std::span<const double> x) const;

  /// Checked evaluation (throws DimensionMismatch).
  EnergyGradient evaluate_checked(std::span<const double> x) const;

  /// Maps periodic coordinates into their principal interval.
  void wrap(std::span<double> x) const;

 protected:
  PotentialSurface(std::string name, std::vector<Periodicity> periodicity,
                   std::map<std::string, double> params,
                   std::vector<std::pair<double, double>> domain)
      : name_(std::move(name)),
        periodicity_(std::move(periodicity)),
        params_(std::move(params)),
        domain_(std::move(domain)) {}

 private:
  std::string name_;
  std::vector<Periodicity> periodicity_;
  std::map<std::string, double> params_;
  std::vector<std::pair<double, double>> domain_;
};

/// Surface name plus parameter overrides, as read from a run configuration.
struct SurfaceSpec {
  std::string name;
  std::map<std::string, double> params;
};

/// Builds a built-in surface. Throws ConfigError for unknown surfaces or
/// invalid/unknown parameters (the message names the key).
std::shared_ptr<const PotentialSurface> make_surface(const SurfaceSpec& spec);

std::vector<std::string> builtin_surface_names();

/// Default parameter set of a built-in surface.
std::map<std::string, double> default_surface_params(const std::string& name);

/// Design target for the amide-2d marginal barrier along omega (kcal/mol).
inline constexpr double kAmideBarrierTarget = 12.0;

/// Scalar function of the coordinates. All shipped CVs are coordinate
/// projections; periodic CVs report values in (-period/2, period/2].
struct CollectiveVariable {
  std::string name;
  std::size_t index = 0;
  bool periodic = false;
  double period = 0.0;
};

/// CV projecting coordinate `index` of the surface, inheriting its periodicity.
CollectiveVariable coordinate_cv(const PotentialSurface& surface, std::size_t index,
                                 std::string name);

/// Conventional CV names per surface ("x","y"; "phi"; "omega","eta").
std::vector<CollectiveVariable> default_cvs(const PotentialSurface& surface);

double cv_value(const CollectiveVariable& cv, std::span<const double> coords);

}  // namespace itsus
