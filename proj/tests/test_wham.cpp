#include "doctest.h"
#include "itsus/fixtures.h"
#include "itsus/wham.h"
#include "support.h"

using namespace itsus;

namespace {

GaussianFixture fixture(std::vector<double> k, std::vector<double> c, std::uint64_t seed, int samples = 100000) {
  GaussianFixtureSpec spec;
  spec.k = std::move(k);
  spec.centers = std::move(c);
  spec.seed = seed;
  spec.samples = samples;
  return generate_gaussian_wham_fixture(spec);
}

// Textbook histogram WHAM on samples snapped to bin centers; shares nothing
// with the library solver. Returns f with f[0] = 0.
std::vector<double> histogram_wham(const WhamInput& in, double lo, double hi, int bins) {
  const std::size_t nw = in.windows.size();
  const double width = (hi - lo) / bins;
  std::vector<double> count(bins, 0.0), m(nw);
  for (std::size_t i = 0; i < nw; ++i) {
    m[i] = static_cast<double>(in.samples[i].size());
    for (const auto& s : in.samples[i]) {
      const int b = static_cast<int>(std::floor((s.cvs[0] - lo) / width));
      if (b >= 0 && b < bins) count[b] += 1.0;
    }
  }
  std::vector<std::vector<double>> c(nw, std::vector<double>(bins));
  for (std::size_t i = 0; i < nw; ++i)
    for (int b = 0; b < bins; ++b) {
      const double x = lo + (b + 0.5) * width;
      double v = 0.0;
      for (const auto& r : in.windows[i].restraints) v += 0.5 * r.k * (x - r.center) * (x - r.center);
      c[i][b] = std::exp(-in.beta0 * v);
    }
  std::vector<double> f(nw, 0.0);
  for (int it = 0; it < 200000; ++it) {
    std::vector<double> p(bins);
    for (int b = 0; b < bins; ++b) {
      double den = 0.0;
      for (std::size_t j = 0; j < nw; ++j) den += m[j] * c[j][b] * std::exp(in.beta0 * f[j]);
      p[b] = count[b] / den;
    }
    std::vector<double> nf(nw);
    for (std::size_t i = 0; i < nw; ++i) {
      double z = 0.0;
      for (int b = 0; b < bins; ++b) z += c[i][b] * p[b];
      nf[i] = -std::log(z) / in.beta0;
    }
    const double g = nf[0];
    double delta = 0.0;
    for (std::size_t i = 0; i < nw; ++i) {
      nf[i] -= g;
      delta = std::max(delta, std::abs(nf[i] - f[i]));
    }
    f = nf;
    if (delta < 1e-13) break;
  }
  return f;
}

WhamInput snapped(const WhamInput& in, double lo, double hi, int bins) {
  WhamInput out = in;
  const double width = (hi - lo) / bins;
  for (auto& w : out.samples)
    for (auto& s : w) {
      const int b = std::clamp(static_cast<int>(std::floor((s.cvs[0] - lo) / width)), 0, bins - 1);
      s.cvs[0] = lo + (b + 0.5) * width;
    }
  return out;
}

}  // namespace

TEST_SUITE("wham") {
  TEST_CASE("bias log factor: trivial cases") {
    const auto s = make_surface({"double-channel", {}});
    const auto x = default_cvs(*s)[0];
    const std::vector<std::string> names = {"x"};
    const WhamWindow at_center{0, {make_restraint(x, 0.4, 50.0)}, nullptr};
    CHECK(bias_log_factor(at_center, 1.7, {3.0, {0.4}}, names) == 0.0);
    const WhamWindow shifted{0, {}, std::make_shared<ItsSchedule>(ItsSchedule({300.0}, {std::log(2.0)}, 300.0))};
    CHECK(bias_log_factor(shifted, beta_of(300.0), {8.0, {0.0}}, names) == doctest::Approx(-std::log(2.0)).epsilon(1e-13));
    const std::vector<std::string> wrong = {"y"};
    CHECK_THROWS_AS(bias_log_factor(at_center, 1.0, {0.0, {0.0}}, wrong), ConfigError);
  }

  TEST_CASE("bias log factor: full ladder against extended precision") {
    const auto temps = temperature_ladder(273.0, 450.0, 60);
    std::vector<double> log_n(60);
    for (std::size_t k = 0; k < 60; ++k) log_n[k] = -0.37 * static_cast<double>(k) + 0.01 * static_cast<double>(k * k);
    const auto its = std::make_shared<ItsSchedule>(temps, log_n, 300.0);
    const auto s = make_surface({"double-channel", {}});
    const auto x = default_cvs(*s)[0];
    // V = 2 kcal/mol: K = 4 at distance 1
    const WhamWindow w{0, {make_restraint(x, 0.0, 4.0)}, its};
    const double b0 = beta_of(300.0);
    long double sum = 0.0L;
    for (std::size_t k = 0; k < 60; ++k) sum += std::exp(static_cast<long double>(log_n[k]) - static_cast<long double>(beta_of(temps[k])) * 15.0L);
    const long double ut = -std::log(sum) / b0;
    const double want = static_cast<double>(b0 * (ut - 15.0L + 2.0L));
    const std::vector<std::string> names = {"x"};
    CHECK(bias_log_factor(w, b0, {15.0, {1.0}}, names) == doctest::Approx(want).epsilon(1e-12));
  }

  TEST_CASE("single unbiased window") {
    const auto fx = fixture({0.0}, {0.0}, 1, 1000);
    const auto sol = solve(fx.input);
    REQUIRE(sol.f.size() == 1);
    CHECK(sol.f[0] == 0.0);
    CHECK(sol.converged);
    double total = 0.0;
    for (double lw : sol.log_weights) {
      CHECK(std::exp(lw) == doctest::Approx(1.0 / 1000.0).epsilon(1e-12));
      total += std::exp(lw);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("identical windows get equal free energies") {
    auto fx = fixture({4.0, 4.0}, {0.5, 0.5}, 2, 5000);
    const auto sol = solve(fx.input);
    CHECK(std::abs(sol.f[1]) < 1e-9);
  }

  TEST_CASE("fixture closed form") {
    CHECK(gaussian_window_free_energy(1.0, 4.0, 1.0, 1.0) == doctest::Approx(-0.5 * std::log(0.2) + 0.4).epsilon(1e-14));
    CHECK(gaussian_window_free_energy(1.0, 4.0, 1.0, 1.0) == doctest::Approx(1.2047).epsilon(1e-4));
    CHECK(gaussian_window_free_energy(1.0, 0.0, 3.0, 1.0) == 0.0);
    const auto sym = fixture({3.0, 3.0}, {-0.7, 0.7}, 1, 10);
    CHECK(sym.analytic_f[1] == doctest::Approx(sym.analytic_f[0]).epsilon(1e-15));
  }

  TEST_CASE("Gaussian fixture recovered within 0.05") {
    const auto fx = fixture({0.0, 4.0}, {0.0, 1.0}, 11);
    const auto sol = solve(fx.input);
    CHECK(sol.converged);
    CHECK(std::abs(sol.f[1] - fx.analytic_f[1]) < 0.05);

    const auto many = fixture({4.0, 4.0, 4.0, 4.0, 4.0}, {-2.0, -1.0, 0.0, 1.0, 2.0}, 12);
    const auto s2 = solve(many.input);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(s2.f[i] - many.analytic_f[i]) < 0.05);
    CHECK(std::abs(s2.f[4] - s2.f[0]) < 0.05);  // symmetric pair
  }

  TEST_CASE("solution is a fixed point; gauge and order invariance") {
    const auto fx = fixture({4.0, 4.0, 4.0}, {-1.0, 0.0, 1.0}, 13, 20000);
    WhamOptions opt;
    opt.tolerance = 1e-10;
    const auto sol = solve(fx.input, opt);
    const auto again = wham_sweep(fx.input, sol.f);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(again[i] - sol.f[i]) < 1e-9);

    std::vector<double> shifted = sol.f;
    for (double& v : shifted) v += 7.3;
    const auto from_shift = wham_sweep(fx.input, shifted);
    for (std::size_t i = 0; i < 3; ++i) CHECK(from_shift[i] == doctest::Approx(again[i]).epsilon(1e-12));
    const auto w1 = unbiased_weights(fx.input, sol.f), w2 = unbiased_weights(fx.input, shifted);
    for (std::size_t i = 0; i < w1.size(); i += 97) CHECK(w1[i] == doctest::Approx(w2[i]).epsilon(1e-10));

    WhamInput perm = fx.input;
    std::mt19937_64 rng(1);
    for (auto& s : perm.samples) std::shuffle(s.begin(), s.end(), rng);
    std::swap(perm.windows[0], perm.windows[2]);
    std::swap(perm.samples[0], perm.samples[2]);
    const auto sp = solve(perm, opt);
    // perm window 0 is original window 2
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs((sp.f[2 - i] - sp.f[2]) - (sol.f[i] - sol.f[0])) < 1e-10);
  }

  TEST_CASE("plain and accelerated sweeps agree") {
    const auto fx = fixture({4.0, 4.0, 4.0, 4.0}, {-1.5, -0.5, 0.5, 1.5}, 14, 20000);
    WhamOptions a, b;
    a.tolerance = b.tolerance = 1e-10;
    b.accelerate = false;
    const auto sa = solve(fx.input, a), sb = solve(fx.input, b);
    CHECK(sa.converged);
    CHECK(sb.converged);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(sa.f[i] - sb.f[i]) < 1e-8);
    CHECK(sa.iterations <= sb.iterations);
  }

  TEST_CASE("matches an independent histogram WHAM on discretized samples") {
    const auto fx = fixture({4.0, 4.0, 4.0}, {-1.0, 0.0, 1.0}, 15, 20000);
    const double lo = -5.0, hi = 5.0;
    const int bins = 200;
    const auto in = snapped(fx.input, lo, hi, bins);
    WhamOptions opt;
    opt.tolerance = 1e-12;
    const auto sol = solve(in, opt);
    const auto ref = histogram_wham(in, lo, hi, bins);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(sol.f[i] - ref[i]) < 1e-8);
  }

  TEST_CASE("reweighted mean matches the unbiased Gaussian within 3 standard errors") {
    // harmonic kappa = 1 around 0: <x> = 0, <x^2> = 1 at beta0 = 1.
    // the error bar comes from independent replicas; sum w^2 alone ignores the noise in f
    std::vector<double> means;
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
      const auto fx = fixture({1.0, 1.0, 1.0}, {-1.5, 0.2, 1.5}, seed, 50000);
      const auto sol = solve(fx.input);
      double m = 0.0, m2 = 0.0;
      std::size_t n = 0;
      for (const auto& win : fx.input.samples)
        for (const auto& s : win) {
          const double w = std::exp(sol.log_weights[n++]);
          m += w * s.cvs[0];
          m2 += w * s.cvs[0] * s.cvs[0];
        }
      CHECK(std::abs(m2 - 1.0) < 0.05);
      means.push_back(m);
    }
    const double r = static_cast<double>(means.size());
    double mu = 0.0, var = 0.0;
    for (double m : means) mu += m / r;
    for (double m : means) var += (m - mu) * (m - mu) / (r - 1.0);
    CHECK(std::abs(mu) < 3.0 * std::sqrt(var / r));
  }

  TEST_CASE("overlap rows sum to one; isolated windows are flagged") {
    const auto fx = fixture({4.0, 4.0}, {-0.5, 0.5}, 17, 5000);
    const auto sol = solve(fx.input);
    for (const auto& row : sol.overlap) {
      double t = 0.0;
      for (double v : row) t += v;
      CHECK(t == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(sol.warnings.empty());

    const auto far = fixture({400.0, 400.0}, {-3.0, 3.0}, 18, 2000);
    const auto s2 = solve(far.input);
    CHECK(s2.warnings.size() == 2);
  }

  TEST_CASE("iteration cap returns a flagged best iterate") {
    const auto fx = fixture({4.0, 4.0, 4.0}, {-1.0, 0.0, 1.0}, 19, 5000);
    WhamOptions opt;
    opt.max_iterations = 1;
    opt.tolerance = 1e-14;
    const auto sol = solve(fx.input, opt);
    CHECK_FALSE(sol.converged);
    CHECK(sol.f.size() == 3);
    CHECK(std::isfinite(sol.f[2]));
  }

  TEST_CASE("empty windows are rejected") {
    auto fx = fixture({4.0, 4.0}, {-1.0, 1.0}, 20, 100);
    fx.input.samples[1].clear();
    CHECK_THROWS_AS(solve(fx.input), ConfigError);
  }

  TEST_CASE("thread count does not change the answer") {
    const auto fx = fixture({4.0, 4.0, 4.0}, {-1.0, 0.0, 1.0}, 21, 30000);
    WhamOptions a, b;
    b.jobs = 3;
    const auto sa = solve(fx.input, a), sb = solve(fx.input, b);
    CHECK(sa.f == sb.f);
    CHECK(sa.log_weights == sb.log_weights);
  }
}
