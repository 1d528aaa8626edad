#include "itsus/surface.h"

#include <algorithm>
#include <cmath>

namespace itsus {

double PotentialSurface::energy(std::span<const double> x) const {
  std::vector<double> g(dim());
  return evaluate(x, g);
}

EnergyGradient PotentialSurface::evaluate_checked(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionMismatch(dim(), x.size());
  EnergyGradient out;
  out.gradient.assign(dim(), 0.0);
  out.energy = evaluate(x, out.gradient);
  return out;
}

void PotentialSurface::wrap(std::span<double> x) const {
  for (std::size_t i = 0; i < x.size() && i < periodicity_.size(); ++i)
    if (periodicity_[i].periodic) x[i] = wrap_periodic(x[i], periodicity_[i].period);
}

namespace {

using Params = std::map<std::string, double>;

double get(const Params& p, const char* key) { return p.at(key); }

void require_positive(const Params& p, const char* key) {
  if (!(p.at(key) > 0.0))
    throw ConfigError("must be > 0 (got " + format_double(p.at(key)) + ")", key);
}

// U(x,y) = h (x^2-1)^2 + w g(x) (y^2-1)^2 + c exp(-(x^2+y^2)/(2 sc^2)) + t g(x) y,
// g(x) = exp(-x^2/(2 sx^2)). Minima A(-1,.), B(+1,.), channels at y = +-1 near
// x = 0, hidden barrier C at the origin. The tilt t (default 0) makes the two
// channels inequivalent.
class DoubleChannel final : public PotentialSurface {
 public:
  explicit DoubleChannel(Params p)
      : PotentialSurface("double-channel", {{}, {}}, p, {{-2.2, 2.2}, {-5.0, 5.0}}),
        h_(get(p, "h")),
        w_(get(p, "w")),
        c_(get(p, "c")),
        sx_(get(p, "sigma_x")),
        sc_(get(p, "sigma_c")),
        t_(get(p, "tilt")) {}

  double evaluate(std::span<const double> r, std::span<double> grad) const override {
    const double x = r[0], y = r[1];
    const double x2 = x * x, y2 = y * y;
    const double g = std::exp(-x2 / (2.0 * sx_ * sx_));
    const double dg = -x / (sx_ * sx_) * g;
    const double e = std::exp(-(x2 + y2) / (2.0 * sc_ * sc_));
    const double qx = x2 - 1.0, qy = y2 - 1.0;
    grad[0] = 4.0 * h_ * x * qx + w_ * dg * qy * qy - c_ * e * x / (sc_ * sc_) + t_ * dg * y;
    grad[1] = 4.0 * w_ * g * y * qy - c_ * e * y / (sc_ * sc_) + t_ * g;
    return h_ * qx * qx + w_ * g * qy * qy + c_ * e + t_ * g * y;
  }

 private:
  double h_, w_, c_, sx_, sc_, t_;
};

// Butane-like torsion, phi = pi is anti:
// U = 1/2 [V1 (1+cos phi) + V2 (1-cos 2phi) + V3 (1+cos 3phi)].
class Torsion1D final : public PotentialSurface {
 public:
  explicit Torsion1D(Params p)
      : PotentialSurface("torsion-1d", {{true, kTwoPi}}, p, {{-kPi, kPi}}),
        v1_(get(p, "V1")),
        v2_(get(p, "V2")),
        v3_(get(p, "V3")) {}

  double evaluate(std::span<const double> r, std::span<double> grad) const override {
    const double phi = r[0];
    grad[0] = 0.5 * (-v1_ * std::sin(phi) + 2.0 * v2_ * std::sin(2.0 * phi) -
                     3.0 * v3_ * std::sin(3.0 * phi));
    return 0.5 * (v1_ * (1.0 + std::cos(phi)) + v2_ * (1.0 - std::cos(2.0 * phi)) +
                  v3_ * (1.0 + std::cos(3.0 * phi)));
  }

 private:
  double v1_, v2_, v3_;
};

// Peptide-bond analog in (omega, eta'), both periodic:
//   U = Vc (1+cos w)/2 + Vb (1-cos 2w)/2
//     + (1-g(w)) kp (1-cos e)
//     + g(w) H (u/u* - 1)^2 + g(w)^2 a sin e,   u = 1-cos e, u* = 1-cos e*,
//   g(w) = exp(-cos^2 w / (2 s^2)).
// Trans at w = pi, cis at w = 0 (raised by Vc). Away from the omega transition
// region eta' is planar (e = 0); near w = +-90 deg it splits into two paths at
// e = +-e* separated by a hidden barrier of height ~H at e = 0. The skew a
// makes the e > 0 path the higher one, mostly near the middle of the split.
class Amide2D final : public PotentialSurface {
 public:
  explicit Amide2D(Params p)
      : PotentialSurface("amide-2d", {{true, kTwoPi}, {true, kTwoPi}}, p,
                         {{-kPi, kPi}, {-kPi, kPi}}),
        vc_(get(p, "V_cis")),
        vb_(get(p, "V_barrier")),
        kp_(get(p, "k_planar")),
        hb_(get(p, "hidden")),
        skew_(get(p, "skew")),
        ustar_(1.0 - std::cos(get(p, "eta_star"))),
        s_(get(p, "width")) {}

  double evaluate(std::span<const double> r, std::span<double> grad) const override {
    const double w = r[0], e = r[1];
    const double cw = std::cos(w), sw = std::sin(w);
    const double ce = std::cos(e), se = std::sin(e);
    const double inv2s2 = 1.0 / (2.0 * s_ * s_);
    const double g = std::exp(-cw * cw * inv2s2);
    const double dg = g * 2.0 * cw * sw * inv2s2;
    const double u = 1.0 - ce;
    const double q = u / ustar_ - 1.0;
    const double planar = kp_ * u;
    const double split = hb_ * q * q;
    grad[0] = -0.5 * vc_ * sw + vb_ * std::sin(2.0 * w) + dg * (split - planar) + 2.0 * g * dg * skew_ * se;
    grad[1] = (1.0 - g) * kp_ * se + g * 2.0 * hb_ * q * se / ustar_ + g * g * skew_ * ce;
    return 0.5 * vc_ * (1.0 + cw) + 0.5 * vb_ * (1.0 - std::cos(2.0 * w)) + (1.0 - g) * planar +
           g * split + g * g * skew_ * se;
  }

 private:
  double vc_, vb_, kp_, hb_, skew_, ustar_, s_;
};

// U = kappa/2 (x - center)^2; used by tests and the thermostat checks.
class Harmonic final : public PotentialSurface {
 public:
  explicit Harmonic(Params p)
      : PotentialSurface("harmonic", {{}}, p,
                         {{get(p, "center") - 20.0 / std::sqrt(get(p, "kappa")),
                           get(p, "center") + 20.0 / std::sqrt(get(p, "kappa"))}}),
        k_(get(p, "kappa")),
        c_(get(p, "center")) {}

  double evaluate(std::span<const double> r, std::span<double> grad) const override {
    const double d = r[0] - c_;
    grad[0] = k_ * d;
    return 0.5 * k_ * d * d;
  }

 private:
  double k_, c_;
};

Params merge_params(const std::string& name, const Params& overrides) {
  Params p = default_surface_params(name);
  for (const auto& [k, v] : overrides) {
    if (!p.count(k)) throw ConfigError("unknown parameter for surface '" + name + "'", k);
    if (!std::isfinite(v)) throw ConfigError("parameter must be finite", k);
    p[k] = v;
  }
  return p;
}

}  // namespace

std::vector<std::string> builtin_surface_names() {
  return {"double-channel", "torsion-1d", "amide-2d", "harmonic"};
}

std::map<std::string, double> default_surface_params(const std::string& name) {
  if (name == "double-channel")
    return {{"h", 5.0}, {"w", 4.0}, {"c", 6.0}, {"sigma_x", 0.5}, {"sigma_c", 0.3}, {"tilt", 0.0}};
  if (name == "torsion-1d")
    // Butane-like ratios scaled so that U(0) - U(pi) = V1 + V3 = 5.0 kcal/mol.
    return {{"V1", 1.55}, {"V2", -0.30}, {"V3", 3.45}};
  if (name == "amide-2d")
    // V_barrier sets the oracle marginal omega barrier to kAmideBarrierTarget.
    return {{"V_cis", 2.0},  {"V_barrier", 13.8},           {"k_planar", 10.0}, {"hidden", 12.0},
            {"skew", 3.5},   {"eta_star", deg2rad(50.0)}, {"width", 0.5}};
  if (name == "harmonic") return {{"kappa", 1.0}, {"center", 0.0}};
  throw ConfigError("unknown surface '" + name + "'", "surface.name");
}

std::shared_ptr<const PotentialSurface> make_surface(const SurfaceSpec& spec) {
  const Params p = merge_params(spec.name, spec.params);
  if (spec.name == "double-channel") {
    for (const char* k : {"h", "w", "c", "sigma_x", "sigma_c"}) require_positive(p, k);
    return std::make_shared<DoubleChannel>(p);
  }
  if (spec.name == "torsion-1d") return std::make_shared<Torsion1D>(p);
  if (spec.name == "amide-2d") {
    for (const char* k : {"k_planar", "hidden", "width"}) require_positive(p, k);
    const double es = p.at("eta_star");
    if (!(es > 0.0 && es < kPi)) throw ConfigError("must lie in (0, pi)", "eta_star");
    return std::make_shared<Amide2D>(p);
  }
  if (spec.name == "harmonic") {
    require_positive(p, "kappa");
    return std::make_shared<Harmonic>(p);
  }
  throw ConfigError("unknown surface '" + spec.name + "'", "surface.name");
}

CollectiveVariable coordinate_cv(const PotentialSurface& surface, std::size_t index,
                                 std::string name) {
  if (index >= surface.dim()) throw DimensionMismatch(surface.dim(), index + 1);
  const auto& per = surface.periodicity()[index];
  return {std::move(name), index, per.periodic, per.period};
}

std::vector<CollectiveVariable> default_cvs(const PotentialSurface& s) {
  if (s.name() == "double-channel") return {coordinate_cv(s, 0, "x"), coordinate_cv(s, 1, "y")};
  if (s.name() == "torsion-1d") return {coordinate_cv(s, 0, "phi")};
  if (s.name() == "amide-2d") return {coordinate_cv(s, 0, "omega"), coordinate_cv(s, 1, "eta")};
  std::vector<CollectiveVariable> out;
  for (std::size_t i = 0; i < s.dim(); ++i)
    out.push_back(coordinate_cv(s, i, s.dim() == 1 ? "x" : "x" + std::to_string(i)));
  return out;
}

double cv_value(const CollectiveVariable& cv, std::span<const double> coords) {
  if (cv.index >= coords.size()) throw DimensionMismatch(cv.index + 1, coords.size());
  const double v = coords[cv.index];
  return cv.periodic ? wrap_periodic(v, cv.period) : v;
}

}  // namespace itsus
