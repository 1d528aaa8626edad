#include "itsus/analysis.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "itsus/trajectory_io.h"

namespace itsus {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::optional<int> Axis::index(double v) const {
  if (!std::isfinite(v)) return std::nullopt;
  if (periodic) {
    const double p = max - min;
    double r = std::fmod(v - min, p);
    if (r < 0.0) r += p;
    int i = static_cast<int>(r / width());
    return std::clamp(i, 0, bins - 1);
  }
  if (v < min || v > max) return std::nullopt;
  return std::min(static_cast<int>((v - min) / width()), bins - 1);
}

Axis angle_axis(int bins) { return {-kPi, kPi, bins, true}; }

void HistogramGrid::validate() const {
  if (axes.empty()) throw ConfigError("grid has no axes", "grid");
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const auto& a = axes[i];
    const std::string field = "grid.axis" + std::to_string(i);
    if (a.bins < 2) throw ConfigError("bin count must be >= 2", field);
    if (!(a.max > a.min)) throw ConfigError("max must exceed min", field);
    if (a.periodic && std::abs((a.max - a.min) - kTwoPi) > 1e-9)
      throw ConfigError("periodic axis must span exactly one period", field);
  }
}

std::size_t HistogramGrid::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= static_cast<std::size_t>(a.bins);
  return n;
}

double HistogramGrid::bin_volume() const {
  double v = 1.0;
  for (const auto& a : axes) v *= a.width();
  return v;
}

std::optional<std::size_t> HistogramGrid::flat_index(std::span<const double> values) const {
  if (values.size() != axes.size()) throw DimensionMismatch(axes.size(), values.size());
  std::size_t flat = 0;
  for (std::size_t d = 0; d < axes.size(); ++d) {
    const auto i = axes[d].index(values[d]);
    if (!i) return std::nullopt;
    flat = flat * static_cast<std::size_t>(axes[d].bins) + static_cast<std::size_t>(*i);
  }
  return flat;
}

std::vector<double> HistogramGrid::centers(std::size_t flat) const {
  std::vector<double> c(axes.size());
  for (std::size_t d = axes.size(); d-- > 0;) {
    const auto b = static_cast<std::size_t>(axes[d].bins);
    c[d] = axes[d].center(static_cast<int>(flat % b));
    flat /= b;
  }
  return c;
}

Density weighted_density(const HistogramGrid& grid, std::span<const double> values,
                         std::span<const double> weights) {
  grid.validate();
  const std::size_t dim = grid.dim();
  if (values.size() != weights.size() * dim) throw DimensionMismatch(weights.size() * dim, values.size());
  Density d{grid, std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0),
            std::vector<double>(grid.size(), 0.0)};
  std::vector<double> w2(grid.size(), 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < weights.size(); ++s) {
    const auto idx = grid.flat_index(values.subspan(s * dim, dim));
    if (!idx) continue;
    d.rho[*idx] += weights[s];
    w2[*idx] += weights[s] * weights[s];
    d.count[*idx] += 1.0;
    total += weights[s];
  }
  if (!(total > 0.0)) throw ConfigError("all samples fall outside the grid", "grid");
  const double norm = 1.0 / (total * grid.bin_volume());
  for (std::size_t b = 0; b < d.rho.size(); ++b) {
    d.n_eff[b] = w2[b] > 0.0 ? d.rho[b] * d.rho[b] / w2[b] : 0.0;
    d.rho[b] *= norm;
  }
  return d;
}

Density marginalize(const Density& joint, std::size_t keep) {
  const auto& axes = joint.grid.axes;
  if (keep >= axes.size()) throw DimensionMismatch(axes.size(), keep + 1);
  double other_volume = 1.0;
  for (std::size_t d = 0; d < axes.size(); ++d)
    if (d != keep) other_volume *= axes[d].width();
  const auto nb = static_cast<std::size_t>(axes[keep].bins);
  Density out{HistogramGrid{{axes[keep]}}, std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0),
              std::vector<double>(nb, 0.0)};
  // stride of axis `keep` in the row-major layout
  std::size_t inner = 1;
  for (std::size_t d = keep + 1; d < axes.size(); ++d) inner *= static_cast<std::size_t>(axes[d].bins);
  std::vector<double> w2(nb, 0.0);
  for (std::size_t f = 0; f < joint.rho.size(); ++f) {
    const std::size_t b = (f / inner) % nb;
    out.rho[b] += joint.rho[f] * other_volume;
    out.count[b] += joint.count[f];
  }
  // effective counts do not marginalize exactly; report the sum as an upper bound
  for (std::size_t f = 0; f < joint.rho.size(); ++f) out.n_eff[(f / inner) % nb] += joint.n_eff[f];
  return out;
}

void align_min(std::span<double> a) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : a)
    if (!std::isnan(v)) m = std::min(m, v);
  if (!std::isfinite(m)) return;
  for (double& v : a)
    if (!std::isnan(v)) v -= m;
}

Pmf pmf(const Density& density, double beta0, std::vector<std::string> cv_names) {
  if (!(beta0 > 0.0)) throw ConfigError("beta0 must be > 0", "pmf");
  Pmf p;
  p.grid = density.grid;
  p.cv_names = std::move(cv_names);
  p.a.resize(density.rho.size());
  for (std::size_t b = 0; b < p.a.size(); ++b)
    p.a[b] = density.rho[b] > 0.0 ? -std::log(density.rho[b]) / beta0 : kNaN;
  align_min(p.a);
  p.uncertainty.assign(p.a.size(), kNaN);
  p.count = density.count;
  p.meta["temperature"] = format_double(temperature_of(beta0));
  p.meta["gauge"] = "min";
  return p;
}

double barrier_height(const Pmf& p, std::optional<std::pair<double, double>> range) {
  double best = kNaN;
  for (std::size_t b = 0; b < p.a.size(); ++b) {
    if (std::isnan(p.a[b])) continue;
    if (range) {
      const double c = p.grid.centers(b)[0];
      if (c < range->first || c > range->second) continue;
    }
    if (std::isnan(best) || p.a[b] > best) best = p.a[b];
  }
  return best;
}

Pmf pmf_with_bootstrap(const HistogramGrid& grid, std::span<const double> values,
                       std::span<const double> weights, std::span<const int> segment, double beta0,
                       const BootstrapOptions& opt, std::vector<std::string> cv_names) {
  if (segment.size() != weights.size()) throw DimensionMismatch(weights.size(), segment.size());
  if (opt.blocks < 1) throw ConfigError("must be >= 1", "bootstrap.blocks");
  if (opt.resamples < 2) throw ConfigError("must be >= 2", "bootstrap.resamples");
  Pmf central = pmf(weighted_density(grid, values, weights), beta0, std::move(cv_names));

  // per-sample bin, resolved once
  const std::size_t dim = grid.dim();
  std::vector<std::ptrdiff_t> bin(weights.size(), -1);
  for (std::size_t s = 0; s < weights.size(); ++s)
    if (const auto idx = grid.flat_index(values.subspan(s * dim, dim))) bin[s] = static_cast<std::ptrdiff_t>(*idx);

  // blocks: contiguous runs of each segment's samples, in input order
  std::map<int, std::vector<std::size_t>> by_segment;
  for (std::size_t s = 0; s < segment.size(); ++s) by_segment[segment[s]].push_back(s);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> blocks;  // per segment
  for (const auto& [id, idx] : by_segment) {
    std::vector<std::pair<std::size_t, std::size_t>> bl;
    const std::size_t nb = std::min<std::size_t>(static_cast<std::size_t>(opt.blocks), idx.size());
    for (std::size_t b = 0; b < nb; ++b) bl.emplace_back(b * idx.size() / nb, (b + 1) * idx.size() / nb);
    blocks.push_back(std::move(bl));
  }
  std::vector<std::vector<std::size_t>> seg_index;
  for (auto& [id, idx] : by_segment) seg_index.push_back(std::move(idx));

  const std::size_t nbins = grid.size();
  std::vector<std::vector<double>> samples(static_cast<std::size_t>(opt.resamples));
  parallel_chunks(samples.size(), 1, opt.jobs, [&](std::size_t r, std::size_t, std::size_t) {
    std::mt19937_64 rng(derive_seed(opt.seed, r));
    std::vector<double> hist(nbins, 0.0);
    for (std::size_t g = 0; g < blocks.size(); ++g) {
      std::uniform_int_distribution<std::size_t> pick(0, blocks[g].size() - 1);
      for (std::size_t k = 0; k < blocks[g].size(); ++k) {
        const auto [b, e] = blocks[g][pick(rng)];
        for (std::size_t i = b; i < e; ++i) {
          const std::size_t s = seg_index[g][i];
          if (bin[s] >= 0) hist[static_cast<std::size_t>(bin[s])] += weights[s];
        }
      }
    }
    for (double& h : hist) h = h > 0.0 ? -std::log(h) / beta0 : kNaN;
    align_min(hist);
    samples[r] = std::move(hist);
  });

  for (std::size_t b = 0; b < nbins; ++b) {
    if (std::isnan(central.a[b])) continue;
    double sum = 0.0, sum2 = 0.0;
    int n = 0;
    for (const auto& s : samples)
      if (!std::isnan(s[b])) {
        sum += s[b];
        sum2 += s[b] * s[b];
        ++n;
      }
    if (n >= 2) {
      const double mean = sum / n;
      central.uncertainty[b] = std::sqrt(std::max(0.0, (sum2 - n * mean * mean) / (n - 1)));
    }
  }
  central.meta["uncertainty"] = "block-bootstrap blocks=" + std::to_string(opt.blocks) +
                                " resamples=" + std::to_string(opt.resamples);
  return central;
}

Pmf pmf_replica_spread(const HistogramGrid& grid, std::span<const double> values, std::span<const double> weights,
                       std::span<const int> segment, double beta0, std::vector<std::string> cv_names) {
  if (segment.size() != weights.size()) throw DimensionMismatch(weights.size(), segment.size());
  const std::size_t dim = grid.dim();
  if (values.size() != dim * weights.size()) throw DimensionMismatch(dim * weights.size(), values.size());
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> parts;
  for (std::size_t s = 0; s < segment.size(); ++s) {
    auto& [v, w] = parts[segment[s]];
    v.insert(v.end(), values.begin() + static_cast<std::ptrdiff_t>(s * dim),
             values.begin() + static_cast<std::ptrdiff_t>((s + 1) * dim));
    w.push_back(weights[s]);
  }
  if (parts.size() < 2) throw ConfigError("need at least two replicas", "pmf.replicas");

  Pmf out = pmf(weighted_density(grid, values, weights), beta0, std::move(cv_names));
  std::vector<std::vector<double>> each;
  for (const auto& [id, vw] : parts) each.push_back(pmf(weighted_density(grid, vw.first, vw.second), beta0).a);
  for (std::size_t b = 0; b < out.a.size(); ++b) {
    double sum = 0.0, sum2 = 0.0;
    int n = 0;
    for (const auto& a : each)
      if (!std::isnan(a[b])) {
        sum += a[b];
        sum2 += a[b] * a[b];
        ++n;
      }
    if (n == 0) continue;
    const double mean = sum / n;
    out.a[b] = mean;
    out.uncertainty[b] = n >= 2 ? std::sqrt(std::max(0.0, (sum2 - n * mean * mean) / (n - 1))) : kNaN;
  }
  align_min(out.a);
  out.meta["uncertainty"] = "replica std n=" + std::to_string(parts.size());
  return out;
}

EnergyDistribution energy_distribution(std::span<const double> u, int bins, std::span<const double> weights) {
  if (u.size() < 2) throw ConfigError("need at least 2 samples", "energy_distribution");
  if (bins < 1) throw ConfigError("bins must be >= 1", "energy_distribution");
  if (!weights.empty() && weights.size() != u.size()) throw DimensionMismatch(u.size(), weights.size());
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double total = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    total += w(i);
    mean += w(i) * u[i];
  }
  mean /= total;
  double var = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) var += w(i) * (u[i] - mean) * (u[i] - mean);
  var /= total;

  EnergyDistribution d;
  d.mean = mean;
  d.std = std::sqrt(var);
  const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
  d.lo = *lo;
  d.hi = *hi;
  if (d.hi == d.lo) {
    d.lo -= 0.5;
    d.hi += 0.5;
  }
  const Axis axis{d.lo, d.hi, bins, false};
  d.density.assign(static_cast<std::size_t>(bins), 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) d.density[static_cast<std::size_t>(*axis.index(u[i]))] += w(i);
  for (double& v : d.density) v /= total * axis.width();
  return d;
}

namespace {

std::vector<double> rc_histogram(std::span<const double> v, const Axis& axis) {
  std::vector<double> h(static_cast<std::size_t>(axis.bins), 0.0);
  double n = 0.0;
  for (double x : v)
    if (const auto i = axis.index(x)) {
      h[static_cast<std::size_t>(*i)] += 1.0;
      n += 1.0;
    }
  if (n > 0.0)
    for (double& x : h) x /= n;
  return h;
}

}  // namespace

double overlap_coefficient(std::span<const double> a, std::span<const double> b, const Axis& axis) {
  const auto ha = rc_histogram(a, axis), hb = rc_histogram(b, axis);
  double s = 0.0;
  for (std::size_t i = 0; i < ha.size(); ++i) s += std::min(ha[i], hb[i]);
  return s;
}

WindowDiagnostics overlap_and_occupancy(std::span<const WindowSamples> windows, const Axis& rc_axis,
                                        double threshold) {
  WindowDiagnostics d;
  std::vector<std::vector<double>> hist;
  for (const auto& w : windows) {
    d.ids.push_back(w.id);
    double below = 0.0;
    for (double h : w.hidden)
      if (h < threshold) below += 1.0;
    const double n = static_cast<double>(w.hidden.size());
    d.occupancy.emplace_back(n > 0 ? below / n : 0.0, n > 0 ? 1.0 - below / n : 0.0);
    hist.push_back(rc_histogram(w.rc, rc_axis));
  }
  d.overlap.assign(windows.size(), std::vector<double>(windows.size(), 0.0));
  for (std::size_t i = 0; i < hist.size(); ++i)
    for (std::size_t j = 0; j < hist.size(); ++j) {
      double s = 0.0;
      for (std::size_t b = 0; b < hist[i].size(); ++b) s += std::min(hist[i][b], hist[j][b]);
      d.overlap[i][j] = s;
    }
  return d;
}

void write_pmf(const std::filesystem::path& path, const Pmf& p) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing", path.string());
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : format_double(v); };
  for (const auto& [k, v] : p.meta) out << "# " << k << " = " << v << '\n';
  for (std::size_t d = 0; d < p.grid.axes.size(); ++d) {
    const auto& a = p.grid.axes[d];
    const std::string name = d < p.cv_names.size() ? p.cv_names[d] : "cv" + std::to_string(d);
    out << "# axis" << d << " = " << name << ',' << format_double(a.min) << ',' << format_double(a.max)
        << ',' << a.bins << ',' << (a.periodic ? "periodic" : "bounded") << '\n';
  }
  if (p.grid.dim() == 1) {
    out << "center";
  } else {
    for (std::size_t d = 0; d < p.grid.dim(); ++d) out << (d ? "," : "") << "center_" << d;
  }
  out << ",A,uncertainty,count\n";
  for (std::size_t b = 0; b < p.a.size(); ++b) {
    for (double c : p.grid.centers(b)) out << format_double(c) << ',';
    out << num(p.a[b]) << ',' << num(p.uncertainty[b]) << ',' << format_double(p.count[b]) << '\n';
  }
  if (!out) throw ConfigError("write failed", path.string());
}

Pmf read_pmf(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open PMF file", path.string());
  const std::string ctx = path.string();
  Pmf p;
  std::map<int, Axis> axes;
  std::map<int, std::string> names;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = trim(line.substr(1, eq - 1));
      const std::string val = trim(line.substr(eq + 1));
      if (key.rfind("axis", 0) == 0) {
        const auto f = split_csv(val);
        if (f.size() != 5) throw ConfigError("malformed axis line", ctx);
        const int d = std::stoi(key.substr(4));
        axes[d] = Axis{parse_double(f[1], ctx), parse_double(f[2], ctx), std::stoi(f[3]), f[4] == "periodic"};
        names[d] = f[0];
      } else {
        p.meta[key] = val;
      }
      continue;
    }
    if (!header) {
      header = true;
      for (const auto& [d, a] : axes) {
        p.grid.axes.push_back(a);
        p.cv_names.push_back(names[d]);
      }
      p.grid.validate();
      const auto cols = split_csv(line);
      if (cols.size() != p.grid.dim() + 3 || cols[cols.size() - 3] != "A")
        throw ConfigError("unexpected PMF header", ctx);
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != p.grid.dim() + 3) throw ConfigError("wrong column count", ctx);
    p.a.push_back(parse_double(f[p.grid.dim()], ctx));
    p.uncertainty.push_back(parse_double(f[p.grid.dim() + 1], ctx));
    p.count.push_back(parse_double(f[p.grid.dim() + 2], ctx));
  }
  if (!header) throw ConfigError("no data", ctx);
  if (p.a.size() != p.grid.size()) throw ConfigError("row count does not match grid", ctx);
  return p;
}

}  // namespace itsus
