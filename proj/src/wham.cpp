#include "itsus/wham.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

namespace itsus {

double bias_log_factor(const WhamWindow& window, double beta0, const WhamSample& sample,
                       std::span<const std::string> cv_names) {
  double v = 0.0;
  for (const auto& r : window.restraints) {
    const auto it = std::find(cv_names.begin(), cv_names.end(), r.cv.name);
    if (it == cv_names.end()) throw ConfigError("sample lacks restrained CV '" + r.cv.name + "'", "wham");
    const auto col = static_cast<std::size_t>(it - cv_names.begin());
    if (col >= sample.cvs.size()) throw ConfigError("sample lacks CV column", "wham");
    v += bias_energy(r, sample.cvs[col]);
  }
  const double its_part = window.its ? effective_energy(*window.its, sample.potential) - sample.potential : 0.0;
  return beta0 * (its_part + v);
}

namespace {

constexpr std::size_t kChunk = 4096;

using Terms = std::vector<std::pair<std::uint32_t, double>>;

struct ResolvedRestraint {
  std::size_t column;
  HarmonicRestraint restraint;
};

// Flattened, pre-resolved form of a WhamInput shared by all sweeps.
class Prepared {
 public:
  explicit Prepared(const WhamInput& in) : beta0_(in.beta0) {
    if (!(in.beta0 > 0.0)) throw ConfigError("beta0 must be > 0", "wham");
    if (in.windows.empty()) throw ConfigError("no windows", "wham");
    if (in.samples.size() != in.windows.size())
      throw ConfigError("samples and windows differ in count", "wham");
    const std::size_t ncv = in.cv_names.size();
    ncv_ = ncv;
    windows_ = in.windows.size();
    std::map<const ItsSchedule*, int> its_index;
    for (std::size_t j = 0; j < windows_; ++j) {
      const auto& w = in.windows[j];
      if (in.samples[j].empty())
        throw ConfigError("window " + std::to_string(w.id) + " has no samples", "wham");
      log_m_.push_back(std::log(static_cast<double>(in.samples[j].size())));
      std::vector<ResolvedRestraint> rr;
      for (const auto& r : w.restraints) {
        const auto it = std::find(in.cv_names.begin(), in.cv_names.end(), r.cv.name);
        if (it == in.cv_names.end())
          throw ConfigError("restrained CV '" + r.cv.name + "' missing from samples", "wham");
        rr.push_back({static_cast<std::size_t>(it - in.cv_names.begin()), r});
      }
      restraints_.push_back(std::move(rr));
      if (w.its) {
        auto [pos, inserted] = its_index.emplace(w.its.get(), static_cast<int>(schedules_.size()));
        if (inserted) schedules_.push_back(w.its.get());
        window_its_.push_back(pos->second);
      } else {
        window_its_.push_back(-1);
      }
    }
    for (std::size_t j = 0; j < windows_; ++j) {
      window_begin_.push_back(potential_.size());
      for (const auto& s : in.samples[j]) {
        if (!std::isfinite(s.potential)) throw ConfigError("non-finite U in samples", "wham");
        if (s.cvs.size() != ncv) throw ConfigError("sample CV count mismatch", "wham");
        potential_.push_back(s.potential);
        cvs_.insert(cvs_.end(), s.cvs.begin(), s.cvs.end());
      }
    }
    window_begin_.push_back(potential_.size());
    its_term_.resize(schedules_.size());
    for (std::size_t t = 0; t < schedules_.size(); ++t) {
      its_term_[t].resize(potential_.size());
      for (std::size_t s = 0; s < potential_.size(); ++s)
        its_term_[t][s] = beta0_ * (effective_energy(*schedules_[t], potential_[s]) - potential_[s]);
    }
  }

  std::size_t windows() const { return windows_; }
  std::size_t samples() const { return potential_.size(); }
  double beta0() const { return beta0_; }
  const std::vector<double>& log_m() const { return log_m_; }
  std::size_t window_begin(std::size_t j) const { return window_begin_[j]; }

  double bias(std::size_t j, std::size_t s) const {
    double v = 0.0;
    const double* row = cvs_.data() + s * ncv_;
    for (const auto& r : restraints_[j]) {
      const double d = restraint_delta(r.restraint, row[r.column]);
      v += 0.5 * r.restraint.k * d * d;
    }
    const int t = window_its_[j];
    return beta0_ * v + (t >= 0 ? its_term_[t][s] : 0.0);
  }

  // Caches, per sample, the windows whose bias lies within `cut` of the
  // smallest one; the rest cannot contribute while beta0 * span(f) stays well
  // below the cut. Falls back to on-the-fly evaluation if the table is too big.
  void build_table(double cut) {
    constexpr std::size_t kMaxEntries = std::size_t{1} << 26;
    const std::size_t n = samples();
    cut_ = cut;
    table_ = false;
    offset_.assign(1, 0);
    idx_.clear();
    val_.clear();
    std::vector<double> b(windows_);
    for (std::size_t s = 0; s < n; ++s) {
      double lo = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < windows_; ++j) lo = std::min(lo, b[j] = bias(j, s));
      for (std::size_t j = 0; j < windows_; ++j)
        if (b[j] <= lo + cut) {
          idx_.push_back(static_cast<std::uint32_t>(j));
          val_.push_back(b[j]);
        }
      offset_.push_back(idx_.size());
      if (idx_.size() > kMaxEntries) {
        offset_.clear();
        idx_.clear();
        val_.clear();
        idx_.shrink_to_fit();
        val_.shrink_to_fit();
        return;
      }
    }
    table_ = true;
  }

  // Rebuilds the table when f has spread too far for the current cut.
  void ensure_cut(std::span<const double> f) {
    const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
    const auto [mlo, mhi] = std::minmax_element(log_m_.begin(), log_m_.end());
    const double need = beta0_ * (*hi - *lo) + (*mhi - *mlo) + 50.0;
    if (std::isfinite(need) && need > cut_) build_table(need + 50.0);
  }

  // For sample s at free energies f: fills `terms` with (window, posterior)
  // pairs and returns log D(s) = log sum_j m_j exp(beta0 f_j - b_j(s)).
  double posterior(std::size_t s, std::span<const double> f, Terms& terms) const {
    terms.clear();
    if (table_) {
      for (std::size_t k = offset_[s]; k < offset_[s + 1]; ++k)
        terms.emplace_back(idx_[k], log_m_[idx_[k]] + beta0_ * f[idx_[k]] - val_[k]);
    } else {
      for (std::size_t j = 0; j < windows_; ++j)
        terms.emplace_back(static_cast<std::uint32_t>(j), log_m_[j] + beta0_ * f[j] - bias(j, s));
    }
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms) m = std::max(m, t.second);
    double sum = 0.0;
    for (auto& t : terms) sum += (t.second = std::exp(t.second - m));
    for (auto& t : terms) t.second /= sum;
    return m + std::log(sum);
  }

  // One update sweep. Returns the new gauge-fixed f; fills log D per sample.
  std::vector<double> sweep(std::span<const double> f, int jobs, std::vector<double>* log_d) const {
    const std::size_t n = samples();
    const std::size_t chunks = chunk_count(n, kChunk);
    std::vector<std::vector<double>> acc(chunks, std::vector<double>(windows_, 0.0));
    if (log_d) log_d->assign(n, 0.0);
    parallel_chunks(n, kChunk, jobs, [&](std::size_t b, std::size_t e, std::size_t c) {
      Terms terms;
      auto& a = acc[c];
      for (std::size_t s = b; s < e; ++s) {
        const double ld = posterior(s, f, terms);
        if (log_d) (*log_d)[s] = ld;
        for (const auto& t : terms) a[t.first] += t.second;
      }
    });
    std::vector<double> total(windows_, 0.0);
    for (const auto& a : acc)
      for (std::size_t j = 0; j < windows_; ++j) total[j] += a[j];
    std::vector<double> next(windows_);
    for (std::size_t j = 0; j < windows_; ++j)
      next[j] = f[j] + (log_m_[j] - std::log(std::max(total[j], 1e-300))) / beta0_;
    const double g = next[0];
    for (double& v : next) v -= g;
    return next;
  }

 private:
  double beta0_;
  std::size_t ncv_ = 0;
  std::size_t windows_ = 0;
  std::vector<double> log_m_;
  std::vector<std::vector<ResolvedRestraint>> restraints_;
  std::vector<int> window_its_;
  std::vector<const ItsSchedule*> schedules_;
  std::vector<std::vector<double>> its_term_;
  std::vector<std::size_t> window_begin_;
  std::vector<double> potential_;
  std::vector<double> cvs_;
  bool table_ = false;
  double cut_ = -1.0;
  std::vector<std::size_t> offset_;
  std::vector<std::uint32_t> idx_;
  std::vector<double> val_;
};

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Solves (A + lambda I) x = b in place for a small dense system.
bool solve_small(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (std::abs(a[p][c]) < 1e-300) return false;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double m = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= m * a[c][k];
      b[r] -= m * b[c];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

// Anderson mixing on the fixed-point map x -> G(x).
class Anderson {
 public:
  explicit Anderson(std::size_t depth) : depth_(depth) {}

  std::vector<double> next(const std::vector<double>& x, const std::vector<double>& gx) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = gx[i] - x[i];
    if (have_prev_) {
      std::vector<double> dr(r.size()), dg(r.size());
      for (std::size_t i = 0; i < r.size(); ++i) {
        dr[i] = r[i] - prev_r_[i];
        dg[i] = gx[i] - prev_g_[i];
      }
      d_r_.push_back(std::move(dr));
      d_g_.push_back(std::move(dg));
      if (d_r_.size() > depth_) {
        d_r_.pop_front();
        d_g_.pop_front();
      }
    }
    prev_r_ = r;
    prev_g_ = gx;
    have_prev_ = true;
    if (d_r_.empty()) return gx;

    const std::size_t m = d_r_.size();
    std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
    std::vector<double> b(m, 0.0);
    double trace = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = 0; q < m; ++q) {
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) s += d_r_[p][i] * d_r_[q][i];
        a[p][q] = s;
      }
      trace += a[p][p];
      for (std::size_t i = 0; i < r.size(); ++i) b[p] += d_r_[p][i] * r[i];
    }
    for (std::size_t p = 0; p < m; ++p) a[p][p] += 1e-10 * trace + 1e-300;
    std::vector<double> gamma;
    if (!solve_small(a, b, gamma)) {
      reset();
      return gx;
    }
    std::vector<double> out = gx;
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t i = 0; i < out.size(); ++i) out[i] -= gamma[p] * d_g_[p][i];
    return out;
  }

  void reset() {
    d_r_.clear();
    d_g_.clear();
    have_prev_ = false;
  }

 private:
  std::size_t depth_;
  std::deque<std::vector<double>> d_r_, d_g_;
  std::vector<double> prev_r_, prev_g_;
  bool have_prev_ = false;
};

std::vector<double> normalized_log_weights(const std::vector<double>& log_d) {
  std::vector<double> lw(log_d.size());
  for (std::size_t s = 0; s < lw.size(); ++s) lw[s] = -log_d[s];
  const double z = log_sum_exp(lw);
  for (double& v : lw) v -= z;
  return lw;
}

void fill_overlap(const Prepared& p, std::span<const double> f, int jobs, WhamSolution& sol,
                  double threshold, const WhamInput& in) {
  const std::size_t w = p.windows();
  sol.overlap.assign(w, std::vector<double>(w, 0.0));
  parallel_chunks(w, 1, jobs, [&](std::size_t i, std::size_t, std::size_t) {
    Terms terms;
    auto& row = sol.overlap[i];
    const std::size_t b = p.window_begin(i), e = p.window_begin(i + 1);
    for (std::size_t s = b; s < e; ++s) {
      p.posterior(s, f, terms);
      for (const auto& t : terms) row[t.first] += t.second;
    }
    for (double& v : row) v /= static_cast<double>(e - b);
  });
  if (w < 2) return;
  for (std::size_t i = 0; i < w; ++i) {
    double best = 0.0;
    for (std::size_t j = 0; j < w; ++j)
      if (j != i) best = std::max(best, std::max(sol.overlap[i][j], sol.overlap[j][i]));
    if (best < threshold) sol.warnings.push_back({in.windows[i].id, best});
  }
}

}  // namespace

WhamSolution solve(const WhamInput& input, const WhamOptions& opt) {
  if (!(opt.tolerance > 0.0)) throw ConfigError("tolerance must be > 0", "wham.tolerance");
  Prepared p(input);
  const std::size_t w = p.windows();

  WhamSolution sol;
  std::vector<double> f(w, 0.0);
  std::vector<double> best_f = f;
  double best_res = std::numeric_limits<double>::infinity();
  Anderson anderson(static_cast<std::size_t>(std::max(1, opt.anderson_depth)));
  std::vector<double> log_d, best_log_d;

  for (int it = 1; it <= opt.max_iterations; ++it) {
    p.ensure_cut(f);
    const auto g = p.sweep(f, opt.jobs, &log_d);
    const double res = max_abs_diff(g, f);
    sol.iterations = it;
    if (!std::isfinite(res)) {
      anderson.reset();
      f = best_f;
      continue;
    }
    if (res < best_res) {
      best_res = res;
      best_f = f;
      best_log_d = log_d;
    }
    if (res < opt.tolerance) {
      sol.converged = true;
      break;
    }
    if (opt.accelerate && w > 1) {
      if (res > 1e3 * best_res) {
        anderson.reset();
        p.ensure_cut(best_f);
        f = p.sweep(best_f, opt.jobs, nullptr);
        continue;
      }
      // f[0] is pinned to zero; mix only the free components.
      std::vector<double> x(f.begin() + 1, f.end()), gx(g.begin() + 1, g.end());
      auto nx = anderson.next(x, gx);
      f[0] = 0.0;
      std::copy(nx.begin(), nx.end(), f.begin() + 1);
    } else {
      f = g;
    }
  }
  sol.f = best_f;
  sol.residual = best_res;
  sol.log_weights = normalized_log_weights(best_log_d);
  p.ensure_cut(sol.f);
  fill_overlap(p, sol.f, opt.jobs, sol, opt.isolation_threshold, input);
  return sol;
}

std::vector<double> wham_sweep(const WhamInput& input, std::span<const double> f, int jobs) {
  Prepared p(input);
  if (f.size() != p.windows()) throw DimensionMismatch(p.windows(), f.size());
  p.ensure_cut(f);
  return p.sweep(f, jobs, nullptr);
}

std::vector<double> unbiased_weights(const WhamInput& input, std::span<const double> f, int jobs) {
  Prepared p(input);
  if (f.size() != p.windows()) throw DimensionMismatch(p.windows(), f.size());
  p.ensure_cut(f);
  std::vector<double> log_d;
  p.sweep(f, jobs, &log_d);
  auto lw = normalized_log_weights(log_d);
  for (double& v : lw) v = std::exp(v);
  return lw;
}

}  // namespace itsus
