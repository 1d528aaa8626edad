#include "doctest.h"
#include "itsus/oracle.h"
#include "itsus/tempering.h"
#include "support.h"

using namespace itsus;

namespace {

// Straight summation in long double, no max shift.
long double direct_effective(const std::vector<double>& beta, const std::vector<double>& n, double beta0, double u) {
  long double s = 0.0L;
  for (std::size_t k = 0; k < beta.size(); ++k) s += n[k] * std::exp(-static_cast<long double>(beta[k]) * u);
  return -std::log(s) / beta0;
}

long double direct_scale(const std::vector<double>& beta, const std::vector<double>& n, double beta0, double u) {
  long double num = 0.0L, den = 0.0L;
  for (std::size_t k = 0; k < beta.size(); ++k) {
    const long double e = n[k] * std::exp(-static_cast<long double>(beta[k]) * u);
    num += beta[k] * e;
    den += e;
  }
  return num / (den * beta0);
}

ItsSchedule unit_pair() { return ItsSchedule({temperature_of(1.0), temperature_of(0.8)}, {0.0, 0.0}, temperature_of(1.0)); }

double flatness(const std::vector<double>& p) {
  return *std::max_element(p.begin(), p.end()) / *std::min_element(p.begin(), p.end());
}

}  // namespace

TEST_SUITE("tempering") {
  TEST_CASE("single-term schedule is the identity") {
    const auto its = ItsSchedule::uniform({300.0}, 300.0);
    for (double u : {-20.0, 0.0, 3.7, 150.0}) {
      CHECK(effective_energy(its, u) == doctest::Approx(u).epsilon(1e-14));
      CHECK(force_scale(its, u) == doctest::Approx(1.0).epsilon(1e-14));
    }
  }

  TEST_CASE("n = 2 on a single term shifts by -ln 2 / beta0") {
    const ItsSchedule its({300.0}, {std::log(2.0)}, 300.0);
    const double b0 = beta_of(300.0);
    for (double u : {-5.0, 0.0, 12.0}) CHECK(effective_energy(its, u) == doctest::Approx(u - std::log(2.0) / b0).epsilon(1e-13));
  }

  TEST_CASE("two-temperature example against extended-precision summation") {
    const auto its = unit_pair();
    const long double ue = direct_effective({1.0, 0.8}, {1.0, 1.0}, 1.0, 10.0);
    const long double se = direct_scale({1.0, 0.8}, {1.0, 1.0}, 1.0, 10.0);
    CHECK(effective_energy(its, 10.0) == doctest::Approx(static_cast<double>(ue)).epsilon(1e-12));
    CHECK(force_scale(its, 10.0) == doctest::Approx(static_cast<double>(se)).epsilon(1e-12));
    CHECK(effective_energy(its, 10.0) == doctest::Approx(7.873).epsilon(1e-4));
  }

  TEST_CASE("force scale tends to min beta / beta0 for large U") {
    const auto its = ItsSchedule::uniform(temperature_ladder(273.0, 450.0, 60), 300.0);
    CHECK(force_scale(its, 1e5) == doctest::Approx(its.min_beta() / its.beta0()).epsilon(1e-12));
    CHECK(force_scale(its, -1e5) == doctest::Approx(its.max_beta() / its.beta0()).epsilon(1e-12));
  }

  TEST_CASE("no overflow far outside the ladder's natural range") {
    const auto its = ItsSchedule::uniform(temperature_ladder(273.0, 450.0, 60), 300.0);
    CHECK(std::isfinite(effective_energy(its, 1e6)));
    CHECK(std::isfinite(effective_energy(its, -1e4)));
    CHECK(std::isfinite(force_scale(its, -1e4)));
  }

  TEST_CASE("effective energy monotone, scale is its derivative, bounded and non-increasing") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ln(-30.0, 0.0);
    const auto temps = temperature_ladder(273.0, 450.0, 60);
    std::vector<double> log_n(temps.size());
    for (double& l : log_n) l = ln(rng);
    const ItsSchedule its(temps, log_n, 300.0);
    const double lo = its.min_beta() / its.beta0(), hi = its.max_beta() / its.beta0();
    double prev_u = -1e300, prev_s = 1e300, worst = 0.0;
    for (int i = 0; i <= 55000; ++i) {
      const double u = -50.0 + i * 0.01;
      const auto e = effective_potential(its, u);
      CHECK_MESSAGE(e.energy > prev_u, u);
      CHECK_MESSAGE(e.scale <= prev_s + 1e-15, u);
      CHECK_MESSAGE(e.scale >= lo * (1 - 1e-15), u);
      CHECK_MESSAGE(e.scale <= hi * (1 + 1e-15), u);
      const double h = 1e-4;
      const double fd = (effective_energy(its, u + h) - effective_energy(its, u - h)) / (2 * h);
      worst = std::max(worst, std::abs(fd - e.scale));
      prev_u = e.energy;
      prev_s = e.scale;
    }
    CHECK(worst <= 1e-8);
  }

  TEST_CASE("temperature weights") {
    const ItsSchedule its({300.0, 400.0}, {0.0, 0.0}, 300.0);
    const double z[] = {3.0, 1.0};
    const auto p = temperature_weights(its, z);
    CHECK(p[0] == doctest::Approx(0.75));
    CHECK(p[1] == doctest::Approx(0.25));

    const ItsSchedule its3({300.0, 350.0, 400.0}, {0.0, std::log(2.0), std::log(4.0)}, 300.0);
    const double z3[] = {4.0, 2.0, 1.0};
    for (double v : temperature_weights(its3, z3)) CHECK(v == doctest::Approx(1.0 / 3.0));

    const double bad[] = {1.0, 0.0};
    CHECK_THROWS_AS(temperature_weights(its, bad), ConfigError);
  }

  TEST_CASE("schedule validation") {
    CHECK_THROWS_AS(ItsSchedule({}, {}, 300.0), ConfigError);
    CHECK_THROWS_AS(ItsSchedule({300.0, 300.0}, {0.0, 0.0}, 300.0), ConfigError);
    CHECK_THROWS_AS(ItsSchedule({300.0}, {0.0, 0.0}, 300.0), ConfigError);
    CHECK_THROWS_AS(ItsSchedule({-1.0}, {0.0}, 300.0), ConfigError);
    CHECK_THROWS_AS(ItsSchedule({300.0}, {std::numeric_limits<double>::infinity()}, 300.0), ConfigError);
    CHECK(ItsSchedule::uniform(temperature_ladder(273.0, 450.0, 60), 300.0).brackets_t0());
    CHECK_FALSE(ItsSchedule::uniform({310.0, 400.0}, 300.0).brackets_t0());
  }

  TEST_CASE("ladders hit both ends") {
    const auto g = temperature_ladder(273.0, 450.0, 60);
    REQUIRE(g.size() == 60);
    CHECK(g.front() == 273.0);
    CHECK(g.back() == 450.0);
    CHECK(g[1] / g[0] == doctest::Approx(g[59] / g[58]));
    const auto l = temperature_ladder(100.0, 200.0, 3, LadderSpacing::Linear);
    CHECK(l[1] == doctest::Approx(150.0));
    CHECK_THROWS_AS(temperature_ladder(300.0, 400.0, 0), ConfigError);
  }

  TEST_CASE("calibration with one temperature needs no rounds") {
    const auto s = make_surface({"harmonic", {}});
    DynamicsConfig cfg;
    const double t[] = {300.0};
    const auto r = calibrate_weights(*s, t, 300.0, cfg, {}, {0.0});
    CHECK(r.report.iterations == 0);
    CHECK(r.report.converged);
    CHECK(r.schedule.log_n()[0] == 0.0);
    CHECK(r.report.share_history.back()[0] == 1.0);
  }

  TEST_CASE("harmonic calibration recovers n_k proportional to sqrt(beta_k)") {
    const auto s = make_surface({"harmonic", {}});
    DynamicsConfig cfg;
    cfg.seed = 21;
    CalibrationOptions opt;
    opt.rounds = 40;
    opt.steps_per_round = 100000;
    opt.flatness_threshold = 1.05;  // push past the default stopping point
    const auto temps = temperature_ladder(150.0, 1500.0, 8);
    const auto r = calibrate_weights(*s, temps, 300.0, cfg, opt, {0.0});
    std::vector<double> ratio;
    for (std::size_t k = 0; k < temps.size(); ++k)
      ratio.push_back(std::exp(r.schedule.log_n()[k]) / std::sqrt(r.schedule.betas()[k]));
    double lg = 0.0;
    for (double v : ratio) lg += std::log(v);
    const double gm = std::exp(lg / ratio.size());
    for (double v : ratio) CHECK(std::abs(v / gm - 1.0) < 0.2);
  }

  TEST_CASE("torsion calibration: oracle flatness agrees with the report") {
    const auto s = make_surface({"torsion-1d", {}});
    DynamicsConfig cfg;
    cfg.seed = 8;
    CalibrationOptions opt;
    opt.steps_per_round = 50000;
    const auto temps = temperature_ladder(273.0, 450.0, 60);
    const auto r = calibrate_weights(*s, temps, 300.0, cfg, opt, {kPi});
    CHECK(r.report.converged);
    CHECK(r.report.flatness < 5.0);
    const auto quad = default_quadrature(*s);
    std::vector<double> log_z;
    for (double b : r.schedule.betas()) log_z.push_back(reference_log_partition(*s, b, quad));
    const double oracle = flatness(temperature_weights_log(r.schedule, log_z));
    CHECK(oracle / r.report.flatness < 2.0);
    CHECK(r.report.flatness / oracle < 2.0);
  }

  TEST_CASE("double-channel calibration flattens within 30 rounds") {
    const auto s = make_surface({"double-channel", {}});
    DynamicsConfig cfg;
    cfg.seed = 12;
    CalibrationOptions opt;
    opt.rounds = 30;
    opt.steps_per_round = 50000;
    const auto r = calibrate_weights(*s, temperature_ladder(273.0, 450.0, 60), 300.0, cfg, opt, {1.0, 1.0});
    CHECK(r.report.converged);
    CHECK(r.report.iterations <= 30);
    CHECK(r.report.flatness < 5.0);
  }

  TEST_CASE("schedule and report files round-trip") {
    const auto dir = testing::scratch("tempering");
    const ItsSchedule its(temperature_ladder(273.0, 450.0, 5), {0.0, -1.25, -2.5, -3.0, -3.125}, 300.0);
    write_schedule(dir / "s.txt", its);
    const auto back = read_schedule(dir / "s.txt");
    CHECK(back.temperatures() == its.temperatures());
    CHECK(back.log_n() == its.log_n());
    CHECK(back.t0() == its.t0());

    CalibrationReport r;
    r.iterations = 3;
    r.flatness = 2.5;
    r.converged = true;
    r.final_log_n = {0.0, -0.1};
    r.share_history = {{0.4, 0.6}, {0.5, 0.5}};
    write_calibration_report(dir / "r.json", r);
    const auto rb = read_calibration_report(dir / "r.json");
    CHECK(rb.iterations == 3);
    CHECK(rb.flatness == 2.5);
    CHECK(rb.share_history == r.share_history);

    std::ofstream(dir / "bad.txt") << "# T0 = 300\n300 1.0 0\n";
    CHECK_THROWS_AS(read_schedule(dir / "bad.txt"), ConfigError);
  }
}
