#include "doctest.h"
#include "itsus/analysis.h"
#include "itsus/integrator.h"
#include "itsus/oracle.h"
#include "support.h"

using namespace itsus;

namespace {

double total_mass(const Density& d) {
  double s = 0.0;
  for (double r : d.rho) s += r * d.grid.bin_volume();
  return s;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("all weight in one bin") {
    const HistogramGrid g{{Axis{0.0, 1.0, 10, false}}};
    const std::vector<double> v = {0.31, 0.33, 0.39}, w = {1.0, 2.0, 0.5};
    const auto d = weighted_density(g, v, w);
    for (int b = 0; b < 10; ++b) CHECK(d.rho[b] == doctest::Approx(b == 3 ? 10.0 : 0.0).epsilon(1e-14));
    CHECK(d.count[3] == 3.0);
  }

  TEST_CASE("uniform samples give a flat density; normalization holds") {
    const HistogramGrid g{{angle_axis(36)}};
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    std::vector<double> v(360000), w(360000, 1.0);
    for (double& x : v) x = u(rng);
    const auto d = weighted_density(g, v, w);
    CHECK(std::abs(total_mass(d) - 1.0) <= 1e-12);
    for (double r : d.rho) CHECK(r * kTwoPi == doctest::Approx(1.0).epsilon(0.03));
    const auto p = pmf(d, beta_of(300.0));
    for (double a : p.a) CHECK(a < 0.05);
  }

  TEST_CASE("samples outside every bin are an error") {
    const HistogramGrid g{{Axis{0.0, 1.0, 4, false}}};
    const std::vector<double> v = {2.0}, w = {1.0};
    CHECK_THROWS_AS(weighted_density(g, v, w), ConfigError);
  }

  TEST_CASE("flat density has zero PMF; 10:1 ratio gives ln 10 / beta0") {
    Density flat{HistogramGrid{{Axis{0.0, 1.0, 5, false}}}, std::vector<double>(5, 1.0), std::vector<double>(5, 1.0), {}};
    for (double a : pmf(flat, 1.0).a) CHECK(a == 0.0);

    Density two{HistogramGrid{{Axis{0.0, 1.0, 2, false}}}, {10.0 / 5.5, 1.0 / 5.5}, {10, 1}, {}};
    const auto p = pmf(two, beta_of(300.0));
    CHECK(p.a[0] == 0.0);
    CHECK(p.a[1] == doctest::Approx(std::log(10.0) * kBoltzmann * 300.0).epsilon(1e-12));
    CHECK(p.a[1] == doctest::Approx(1.372).epsilon(1e-3));
  }

  TEST_CASE("empty bins are NaN in memory and NA on disk") {
    const HistogramGrid g{{Axis{0.0, 1.0, 4, false}, Axis{0.0, 1.0, 3, false}}};
    const std::vector<double> v = {0.1, 0.1, 0.6, 0.9}, w = {1.0, 3.0};
    const auto p = pmf(weighted_density(g, v, w), 1.0, {"x", "y"});
    int nan = 0;
    for (double a : p.a) nan += std::isnan(a);
    CHECK(nan == 10);
    const auto dir = testing::scratch("analysis-na");
    write_pmf(dir / "p.txt", p);
    const auto text = testing::slurp(dir / "p.txt");
    CHECK(text.find("NA") != std::string::npos);
    CHECK(text.find("inf") == std::string::npos);
    const auto back = read_pmf(dir / "p.txt");
    REQUIRE(back.a.size() == p.a.size());
    for (std::size_t b = 0; b < p.a.size(); ++b) {
      CHECK(std::isnan(back.a[b]) == std::isnan(p.a[b]));
      if (!std::isnan(p.a[b])) CHECK(back.a[b] == p.a[b]);
    }
    CHECK(back.cv_names == p.cv_names);
    CHECK(back.grid.axes[1].bins == 3);
  }

  TEST_CASE("marginalizing a joint density equals the direct 1-D density") {
    const HistogramGrid g2{{angle_axis(24), Axis{-2.0, 2.0, 16, false}}};
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 0.7);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    const std::size_t count = 50000;
    std::vector<double> v2, vx, vy, w(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double a = wrap_periodic(n(rng) * 2.0, kTwoPi), b = n(rng);
      v2.push_back(a);
      v2.push_back(b);
      vx.push_back(a);
      vy.push_back(b);
      w[i] = u(rng);
    }
    // keep samples inside the y range so both views see the same set
    std::vector<double> kv2, kvx, kvy, kw;
    for (std::size_t i = 0; i < count; ++i)
      if (std::abs(vy[i]) < 2.0) {
        kv2.push_back(vx[i]);
        kv2.push_back(vy[i]);
        kvx.push_back(vx[i]);
        kvy.push_back(vy[i]);
        kw.push_back(w[i]);
      }
    const auto joint = weighted_density(g2, kv2, kw);
    CHECK(std::abs(total_mass(joint) - 1.0) <= 1e-12);
    const auto mx = marginalize(joint, 0), my = marginalize(joint, 1);
    const auto dx = weighted_density(HistogramGrid{{g2.axes[0]}}, kvx, kw);
    const auto dy = weighted_density(HistogramGrid{{g2.axes[1]}}, kvy, kw);
    for (std::size_t b = 0; b < dx.rho.size(); ++b) CHECK(std::abs(mx.rho[b] - dx.rho[b]) <= 1e-12);
    for (std::size_t b = 0; b < dy.rho.size(); ++b) CHECK(std::abs(my.rho[b] - dy.rho[b]) <= 1e-12);
    CHECK(mx.count == dx.count);
  }

  TEST_CASE("barrier height is the largest value in range") {
    Pmf p;
    p.grid = HistogramGrid{{Axis{0.0, 4.0, 4, false}}};
    p.a = {0.0, 3.0, std::numeric_limits<double>::quiet_NaN(), 1.0};
    CHECK(barrier_height(p) == 3.0);
    CHECK(barrier_height(p, std::make_pair(2.0, 4.0)) == 1.0);
    CHECK(std::isnan(barrier_height(p, std::make_pair(2.2, 2.8))));
  }

  TEST_CASE("energy distribution") {
    const std::vector<double> c(100, 4.2);
    const auto d = energy_distribution(c, 10);
    CHECK(d.std < 1e-12);
    CHECK(d.mean == doctest::Approx(4.2));
    const std::vector<double> one = {1.0};
    CHECK_THROWS_AS(energy_distribution(one, 10), ConfigError);

    // U = x^2/2 in thermal equilibrium: std(U) = kT / sqrt(2)
    const auto s = make_surface({"harmonic", {}});
    DynamicsConfig cfg;
    cfg.n_steps = 2000000;
    cfg.record_stride = 20;
    cfg.equilibration_steps = 20000;
    std::vector<double> u;
    for (const auto& r : run_trajectory(*s, plain_force(*s), {}, cfg, {0.0}, 0, 31)) u.push_back(r.potential);
    const auto h = energy_distribution(u, 50);
    CHECK(std::abs(h.std / (kBoltzmann * 300.0 / std::sqrt(2.0)) - 1.0) < 0.05);
    double area = 0.0;
    for (double v : h.density) area += v * (h.hi - h.lo) / 50.0;
    CHECK(area == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("occupancy and overlap diagnostics") {
    WindowSamples trapped{0, {0.1, 0.2, 0.15}, {0.9, 1.1, 1.0}};
    WindowSamples mixed{1, {0.1, 0.2, 0.15, 0.12}, {0.9, -1.1, 1.0, -1.0}};
    const WindowSamples ws[] = {trapped, mixed};
    const auto d = overlap_and_occupancy(ws, Axis{-1.0, 1.0, 20, false});
    CHECK(d.occupancy[0].first == 0.0);
    CHECK(d.occupancy[0].second == 1.0);
    CHECK(d.occupancy[1].first == 0.5);
    CHECK(d.overlap[0][0] == doctest::Approx(1.0));
    const std::vector<double> a = {0.1, 0.5, -0.3};
    CHECK(overlap_coefficient(a, a, Axis{-1.0, 1.0, 20, false}) == doctest::Approx(1.0).epsilon(1e-14));
    const std::vector<double> b = {0.9};
    CHECK(overlap_coefficient(a, b, Axis{-1.0, 1.0, 20, false}) == 0.0);
  }

  TEST_CASE("replica spread") {
    const HistogramGrid g{{Axis{0.0, 1.0, 2, false}}};
    const std::vector<double> v = {0.2, 0.7, 0.2, 0.7, 0.2, 0.2};
    const std::vector<double> w(6, 1.0);
    const std::vector<int> seg = {0, 0, 1, 1, 2, 2};
    const auto p = pmf_replica_spread(g, v, w, seg, 1.0);
    // replicas: ln1, ln1, inf gap in the third; bin 1 mean over the two that saw it
    CHECK(p.a[0] == 0.0);
    CHECK(p.uncertainty[0] == 0.0);
    CHECK(p.uncertainty[1] == 0.0);
    const std::vector<int> one(6, 0);
    CHECK_THROWS_AS(pmf_replica_spread(g, v, w, one, 1.0), ConfigError);
  }

  TEST_CASE("torsion MD pipeline agrees with U - min U within 3 bootstrap errors") {
    const auto s = make_surface({"torsion-1d", {}});
    DynamicsConfig cfg;
    cfg.n_steps = 4000000;
    cfg.record_stride = 100;
    cfg.equilibration_steps = 1000;
    const auto recs = run_trajectory(*s, plain_force(*s), default_cvs(*s), cfg, {kPi}, 0, 77);
    std::vector<double> v, w;
    for (const auto& r : recs) v.push_back(r.cvs[0]), w.push_back(1.0);
    const std::vector<int> seg(v.size(), 0);
    const HistogramGrid g{{angle_axis(36)}};
    BootstrapOptions bo;
    bo.seed = 3;
    const double b0 = beta_of(300.0);
    const auto p = pmf_with_bootstrap(g, v, w, seg, b0, bo, {"phi"});
    const CollectiveVariable cvs[] = {default_cvs(*s)[0]};
    const auto ref = reference_pmf(*s, cvs, g, b0, default_quadrature(*s));
    int checked = 0;
    for (std::size_t b = 0; b < p.a.size(); ++b) {
      if (p.count[b] < 200) continue;  // well-sampled bins only
      ++checked;
      CAPTURE(b);
      CHECK(std::abs(p.a[b] - ref.a[b]) <= 3.0 * p.uncertainty[b]);
    }
    CHECK(checked >= 18);
  }

  TEST_CASE("bootstrap is reproducible and independent of thread count") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(20000), w(20000, 1.0);
    for (double& x : v) x = n(rng);
    const std::vector<int> seg(v.size(), 0);
    const HistogramGrid g{{Axis{-3.0, 3.0, 12, false}}};
    BootstrapOptions a, b;
    b.jobs = 3;
    const auto pa = pmf_with_bootstrap(g, v, w, seg, 1.0, a), pb = pmf_with_bootstrap(g, v, w, seg, 1.0, b);
    for (std::size_t i = 0; i < pa.a.size(); ++i) {
      CHECK(pa.uncertainty[i] == pb.uncertainty[i]);
      CHECK(pa.uncertainty[i] > 0.0);
    }
  }
}
