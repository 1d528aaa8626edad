#include "itsus/oracle.h"

#include <algorithm>
#include <cmath>

namespace itsus {

namespace {

struct Nodes {
  std::vector<double> x;
  std::vector<double> log_w;
  std::vector<char> boundary;
};

Nodes coordinate_nodes(double lo, double hi, int n, bool periodic) {
  Nodes q;
  if (periodic) {
    const double h = (hi - lo) / n;
    for (int i = 0; i < n; ++i) {
      q.x.push_back(lo + i * h);
      q.log_w.push_back(std::log(h));
      q.boundary.push_back(0);
    }
    return q;
  }
  const double h = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) {
    q.x.push_back(lo + i * h);
    q.log_w.push_back(std::log(i == 0 || i == n - 1 ? 0.5 * h : h));
    q.boundary.push_back(i == 0 || i == n - 1);
  }
  return q;
}

Nodes bin_nodes(const Axis& axis, int bin, int sub) {
  Nodes q;
  const double w = axis.width();
  const double lo = axis.min + bin * w;
  for (int j = 0; j < sub; ++j) {
    q.x.push_back(lo + (j + 0.5) * w / sub);
    q.log_w.push_back(-std::log(static_cast<double>(sub)));
    q.boundary.push_back(0);
  }
  return q;
}

// Running log-sum-exp.
struct LogAcc {
  double m = -std::numeric_limits<double>::infinity();
  double s = 0.0;
  void add(double v) {
    if (v <= m) {
      s += std::exp(v - m);
    } else {
      s = s * std::exp(m - v) + 1.0;
      m = v;
    }
  }
  double value() const { return m + std::log(s); }
};

struct TensorResult {
  double log_integral;
  double max_log_density;
  double max_boundary_log_density;
};

// Integrates exp(-beta U) over the tensor product of per-coordinate nodes.
TensorResult integrate(const PotentialSurface& surface, const std::vector<const Nodes*>& nodes, double beta) {
  const std::size_t dim = nodes.size();
  std::vector<std::size_t> idx(dim, 0);
  std::vector<double> x(dim), g(dim);
  LogAcc acc;
  double max_ld = -std::numeric_limits<double>::infinity();
  double max_bd = max_ld;
  while (true) {
    double lw = 0.0;
    bool on_boundary = false;
    for (std::size_t d = 0; d < dim; ++d) {
      x[d] = nodes[d]->x[idx[d]];
      lw += nodes[d]->log_w[idx[d]];
      on_boundary = on_boundary || nodes[d]->boundary[idx[d]];
    }
    const double ld = -beta * surface.evaluate(x, g);
    acc.add(lw + ld);
    max_ld = std::max(max_ld, ld);
    if (on_boundary) max_bd = std::max(max_bd, ld);
    std::size_t d = dim;
    while (d > 0) {
      --d;
      if (++idx[d] < nodes[d]->x.size()) break;
      idx[d] = 0;
      if (d == 0) return {acc.value(), max_ld, max_bd};
    }
    if (dim == 0) return {acc.value(), max_ld, max_bd};
  }
}

void check_quadrature(const PotentialSurface& surface, const QuadratureSpec& quad) {
  if (quad.resolution.size() != surface.dim()) throw DimensionMismatch(surface.dim(), quad.resolution.size());
  if (quad.domain.size() != surface.dim()) throw DimensionMismatch(surface.dim(), quad.domain.size());
  for (std::size_t d = 0; d < surface.dim(); ++d) {
    if (quad.resolution[d] < 64) throw ConfigError("resolution must be >= 64", "quadrature.resolution");
    if (!(quad.domain[d].second > quad.domain[d].first))
      throw ConfigError("empty integration domain", "quadrature.domain");
  }
}

constexpr double kBoundaryRatio = 1e-12;

void check_boundary(double max_ld, double max_bd) {
  if (max_bd - max_ld > std::log(kBoundaryRatio))
    throw ConfigError("domain too small: boundary density " + format_double(std::exp(max_bd - max_ld)) +
                          " of maximum",
                      "quadrature.domain");
}

std::vector<double> pmf_values(const PotentialSurface& surface, std::span<const CollectiveVariable> cvs,
                               const HistogramGrid& grid, double beta0, const QuadratureSpec& quad,
                               int scale) {
  const std::size_t dim = surface.dim();
  std::vector<int> axis_of(dim, -1);
  for (std::size_t a = 0; a < cvs.size(); ++a) {
    if (cvs[a].index >= dim) throw DimensionMismatch(dim, cvs[a].index + 1);
    if (axis_of[cvs[a].index] >= 0) throw ConfigError("CV listed twice", "oracle.cvs");
    axis_of[cvs[a].index] = static_cast<int>(a);
  }
  std::vector<Nodes> others(dim);
  for (std::size_t d = 0; d < dim; ++d)
    if (axis_of[d] < 0)
      others[d] = coordinate_nodes(quad.domain[d].first, quad.domain[d].second, quad.resolution[d] * scale,
                                   surface.periodicity()[d].periodic);

  const std::size_t nbins = grid.size();
  std::vector<double> log_rho(nbins);
  std::vector<double> max_ld(nbins), max_bd(nbins);
  parallel_chunks(nbins, 1, quad.jobs, [&](std::size_t b, std::size_t, std::size_t) {
    // bin index per grid axis, row-major
    std::vector<int> bi(grid.dim());
    std::size_t f = b;
    for (std::size_t a = grid.dim(); a-- > 0;) {
      bi[a] = static_cast<int>(f % static_cast<std::size_t>(grid.axes[a].bins));
      f /= static_cast<std::size_t>(grid.axes[a].bins);
    }
    std::vector<Nodes> own(dim);
    std::vector<const Nodes*> nodes(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      if (axis_of[d] < 0) {
        nodes[d] = &others[d];
        continue;
      }
      const auto& axis = grid.axes[static_cast<std::size_t>(axis_of[d])];
      const int sub = quad.mode == OracleMode::Point ? 1 : std::max(1, quad.resolution[d] * scale / axis.bins);
      if (quad.mode == OracleMode::Point) {
        own[d] = Nodes{{axis.center(bi[axis_of[d]])}, {0.0}, {0}};
      } else {
        own[d] = bin_nodes(axis, bi[axis_of[d]], sub);
      }
      nodes[d] = &own[d];
    }
    const auto r = integrate(surface, nodes, beta0);
    log_rho[b] = r.log_integral;
    max_ld[b] = r.max_log_density;
    max_bd[b] = r.max_boundary_log_density;
  });
  check_boundary(*std::max_element(max_ld.begin(), max_ld.end()),
                 *std::max_element(max_bd.begin(), max_bd.end()));
  std::vector<double> a(nbins);
  for (std::size_t b = 0; b < nbins; ++b) a[b] = -log_rho[b] / beta0;
  align_min(a);
  return a;
}

}  // namespace

QuadratureSpec default_quadrature(const PotentialSurface& surface, int points) {
  QuadratureSpec q;
  q.resolution.assign(surface.dim(), points);
  q.domain = surface.domain();
  return q;
}

Pmf reference_pmf(const PotentialSurface& surface, std::span<const CollectiveVariable> cvs,
                  const HistogramGrid& grid, double beta0, const QuadratureSpec& quad) {
  grid.validate();
  check_quadrature(surface, quad);
  if (cvs.size() != grid.dim()) throw DimensionMismatch(grid.dim(), cvs.size());
  if (!(beta0 > 0.0)) throw ConfigError("beta0 must be > 0", "oracle.beta");
  auto a = pmf_values(surface, cvs, grid, beta0, quad, 1);
  if (quad.check_convergence) {
    auto fine = pmf_values(surface, cvs, grid, beta0, quad, 2);
    double worst = 0.0;
    for (std::size_t b = 0; b < a.size(); ++b) worst = std::max(worst, std::abs(fine[b] - a[b]));
    if (worst > 1e-3)
      throw Error("oracle PMF not self-converged: doubling resolution moved a bin by " + format_double(worst));
    a = std::move(fine);
  }
  Pmf p;
  p.grid = grid;
  for (const auto& cv : cvs) p.cv_names.push_back(cv.name);
  p.a = std::move(a);
  p.uncertainty.assign(p.a.size(), 0.0);
  p.count.assign(p.a.size(), 0.0);
  p.meta["origin"] = "oracle";
  p.meta["temperature"] = format_double(temperature_of(beta0));
  p.meta["gauge"] = "min";
  p.meta["surface"] = surface.name();
  p.meta["oracle_mode"] = quad.mode == OracleMode::Point ? "point" : "bin-average";
  return p;
}

double reference_log_partition(const PotentialSurface& surface, double beta, const QuadratureSpec& quad) {
  check_quadrature(surface, quad);
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0", "oracle.beta");
  std::vector<Nodes> nodes(surface.dim());
  std::vector<const Nodes*> ptr;
  for (std::size_t d = 0; d < surface.dim(); ++d) {
    nodes[d] = coordinate_nodes(quad.domain[d].first, quad.domain[d].second, quad.resolution[d],
                                surface.periodicity()[d].periodic);
    ptr.push_back(&nodes[d]);
  }
  const auto r = integrate(surface, ptr, beta);
  check_boundary(r.max_log_density, r.max_boundary_log_density);
  return r.log_integral;
}

double reference_partition(const PotentialSurface& surface, double beta, const QuadratureSpec& quad) {
  return std::exp(reference_log_partition(surface, beta, quad));
}

const char* to_string(StationaryType t) {
  switch (t) {
    case StationaryType::Minimum: return "min";
    case StationaryType::Saddle: return "saddle";
    case StationaryType::Maximum: return "max";
  }
  return "?";
}

namespace {

std::vector<double> gradient_at(const PotentialSurface& s, std::vector<double> x) {
  std::vector<double> g(x.size());
  s.evaluate(x, g);
  return g;
}

// Central differences of the analytic gradient, symmetrized.
std::vector<std::vector<double>> hessian(const PotentialSurface& s, const std::vector<double>& x) {
  const std::size_t n = x.size();
  const double h = 1e-5;
  std::vector<std::vector<double>> hm(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    auto xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const auto gp = gradient_at(s, xp), gm = gradient_at(s, xm);
    for (std::size_t i = 0; i < n; ++i) hm[i][j] = (gp[i] - gm[i]) / (2.0 * h);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) hm[i][j] = hm[j][i] = 0.5 * (hm[i][j] + hm[j][i]);
  return hm;
}

std::vector<double> eigenvalues(const std::vector<std::vector<double>>& h) {
  if (h.size() == 1) return {h[0][0]};
  const double tr = h[0][0] + h[1][1];
  const double det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  return {0.5 * tr - disc, 0.5 * tr + disc};
}

double grad_norm2(const PotentialSurface& s, std::span<const double> x, std::span<double> g) {
  s.evaluate(x, g);
  double n = 0.0;
  for (double v : g) n += v * v;
  return n;
}

}  // namespace

std::vector<StationaryPoint> locate_stationary(const PotentialSurface& surface,
                                               const std::vector<std::pair<double, double>>& region,
                                               int points) {
  const std::size_t dim = surface.dim();
  if (dim < 1 || dim > 2) throw ConfigError("stationary-point scan supports 1-D and 2-D surfaces", "oracle");
  if (region.size() != dim) throw DimensionMismatch(dim, region.size());
  if (points < 5) throw ConfigError("need >= 5 points per dimension", "oracle.points");

  const std::size_t n = static_cast<std::size_t>(points);
  const std::size_t total = dim == 1 ? n : n * n;
  std::vector<double> g2(total), g(dim), x(dim);
  auto coord = [&](std::size_t d, std::size_t i) {
    return region[d].first + (region[d].second - region[d].first) * static_cast<double>(i) / (n - 1);
  };
  for (std::size_t f = 0; f < total; ++f) {
    const std::size_t i0 = dim == 1 ? f : f / n, i1 = f % n;
    x[0] = coord(0, i0);
    if (dim == 2) x[1] = coord(1, i1);
    g2[f] = grad_norm2(surface, x, g);
  }

  std::vector<StationaryPoint> found;
  for (std::size_t f = 0; f < total; ++f) {
    const long i0 = static_cast<long>(dim == 1 ? f : f / n), i1 = static_cast<long>(f % n);
    bool is_min = true;
    for (long a = -1; a <= 1 && is_min; ++a)
      for (long b = (dim == 2 ? -1 : 0); b <= (dim == 2 ? 1 : 0) && is_min; ++b) {
        if (a == 0 && b == 0) continue;
        const long j0 = i0 + a, j1 = i1 + b;
        if (j0 < 0 || j0 >= static_cast<long>(n) || (dim == 2 && (j1 < 0 || j1 >= static_cast<long>(n))))
          continue;
        const std::size_t nb = dim == 1 ? static_cast<std::size_t>(j0)
                                        : static_cast<std::size_t>(j0) * n + static_cast<std::size_t>(j1);
        if (g2[nb] < g2[f]) is_min = false;
      }
    if (!is_min) continue;

    std::vector<double> p(dim);
    p[0] = coord(0, static_cast<std::size_t>(i0));
    if (dim == 2) p[1] = coord(1, static_cast<std::size_t>(i1));
    bool ok = false;
    for (int it = 0; it < 100; ++it) {
      const auto gr = gradient_at(surface, p);
      double gn = 0.0;
      for (double v : gr) gn = std::max(gn, std::abs(v));
      if (gn < 1e-9) {
        ok = true;
        break;
      }
      const auto h = hessian(surface, p);
      std::vector<double> step(dim);
      if (dim == 1) {
        if (h[0][0] == 0.0) break;
        step[0] = gr[0] / h[0][0];
      } else {
        const double det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if (std::abs(det) < 1e-14) break;
        step[0] = (h[1][1] * gr[0] - h[0][1] * gr[1]) / det;
        step[1] = (h[0][0] * gr[1] - h[1][0] * gr[0]) / det;
      }
      for (std::size_t d = 0; d < dim; ++d) p[d] -= step[d];
      surface.wrap(p);
    }
    if (!ok) continue;
    bool inside = true;
    for (std::size_t d = 0; d < dim; ++d) {
      const double pad = 1e-9 * (region[d].second - region[d].first);
      if (!surface.periodicity()[d].periodic && (p[d] < region[d].first - pad || p[d] > region[d].second + pad))
        inside = false;
    }
    if (!inside) continue;
    bool dup = false;
    for (const auto& s : found) {
      double dist = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        double dd = p[d] - s.coords[d];
        if (surface.periodicity()[d].periodic) dd = wrap_periodic(dd, surface.periodicity()[d].period);
        dist = std::max(dist, std::abs(dd));
      }
      if (dist < 1e-5) dup = true;
    }
    if (dup) continue;
    const auto ev = eigenvalues(hessian(surface, p));
    const bool all_pos = std::all_of(ev.begin(), ev.end(), [](double v) { return v > 0.0; });
    const bool all_neg = std::all_of(ev.begin(), ev.end(), [](double v) { return v < 0.0; });
    StationaryPoint sp;
    sp.coords = p;
    sp.energy = surface.energy(p);
    sp.type = all_pos ? StationaryType::Minimum : all_neg ? StationaryType::Maximum : StationaryType::Saddle;
    found.push_back(std::move(sp));
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.energy < b.energy; });
  return found;
}

}  // namespace itsus
