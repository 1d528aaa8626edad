#include "doctest.h"
#include "itsus/surface.h"
#include "support.h"

using namespace itsus;

TEST_SUITE("potentials") {
  TEST_CASE("torsion surface is one periodic coordinate") {
    const auto s = make_surface({"torsion-1d", {}});
    CHECK(s->dim() == 1);
    CHECK(s->periodicity()[0].periodic);
    CHECK(s->periodicity()[0].period == doctest::Approx(kTwoPi));
  }

  TEST_CASE("torsion cis barrier is engineered to 5 kcal/mol") {
    const auto s = make_surface({"torsion-1d", {}});
    const double cis[] = {0.0}, anti[] = {kPi};
    CHECK(s->energy(cis) - s->energy(anti) == doctest::Approx(5.0).epsilon(1e-12));
  }

  TEST_CASE("double-channel global minimum sits at the four (+-1, +-1) corners") {
    const auto s = make_surface({"double-channel", {{"h", 5.0}}});
    // dense scan oracle
    double best = 1e300;
    std::vector<double> arg(2);
    for (int i = 0; i <= 800; ++i)
      for (int j = 0; j <= 800; ++j) {
        const double x[] = {-2.0 + 4.0 * i / 800.0, -2.0 + 4.0 * j / 800.0};
        const double u = s->energy(x);
        if (u < best) best = u, arg = {x[0], x[1]};
      }
    CHECK(std::abs(std::abs(arg[0]) - 1.0) < 0.01);
    CHECK(std::abs(std::abs(arg[1]) - 1.0) < 0.01);
    for (double sx : {-1.0, 1.0})
      for (double sy : {-1.0, 1.0}) {
        const double x[] = {sx, sy};
        CHECK(s->energy(x) <= best + 1e-9);
      }
  }

  TEST_CASE("unknown surface and unknown parameters are rejected") {
    CHECK_THROWS_AS(make_surface({"nonexistent", {}}), ConfigError);
    try {
      make_surface({"double-channel", {{"hh", 1.0}}});
      FAIL("no throw");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "hh");
    }
    CHECK_THROWS_AS(make_surface({"double-channel", {{"sigma_x", -1.0}}}), ConfigError);
  }

  TEST_CASE("double-channel at the origin is h + w + c") {
    const auto s = make_surface({"double-channel", {}});
    const double x[] = {0.0, 0.0};
    CHECK(s->energy(x) == doctest::Approx(15.0).epsilon(1e-14));
  }

  TEST_CASE("torsion energy repeats every full turn") {
    const auto s = make_surface({"torsion-1d", {}});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 100; ++i) {
      const double a[] = {u(rng)}, b[] = {a[0] + kTwoPi};
      CHECK(std::abs(s->energy(a) - s->energy(b)) < 1e-12);
    }
  }

  TEST_CASE("double-channel gradient at (0.3, -0.7) matches finite differences") {
    const auto s = make_surface({"double-channel", {}});
    const std::vector<double> x = {0.3, -0.7};
    const auto eg = s->evaluate_checked(x);
    const auto fd = testing::numeric_gradient([&](std::span<const double> r) { return s->energy(r); }, x);
    CHECK(testing::max_rel_err(eg.gradient, fd) <= 1e-6);
  }

  TEST_CASE("all surfaces: finite energy and gradient matching finite differences") {
    std::mt19937_64 rng(11);
    for (const auto& name : builtin_surface_names()) {
      CAPTURE(name);
      const auto s = make_surface({name, {}});
      double worst = 0.0;
      for (int i = 0; i < 200; ++i) {
        const auto x = testing::random_point(*s, rng);
        const auto eg = s->evaluate_checked(x);
        REQUIRE(std::isfinite(eg.energy));
        const auto fd = testing::numeric_gradient([&](std::span<const double> r) { return s->energy(r); }, x);
        worst = std::max(worst, testing::max_rel_err(eg.gradient, fd));
      }
      CHECK(worst <= 1e-6);
    }
  }

  TEST_CASE("checked evaluation rejects wrong dimension") {
    const auto s = make_surface({"double-channel", {}});
    const double x[] = {0.0};
    CHECK_THROWS_AS(s->evaluate_checked(x), DimensionMismatch);
  }

  TEST_CASE("collective variables project and wrap") {
    const auto dc = make_surface({"double-channel", {}});
    const double r[] = {0.4, 1.1};
    CHECK(cv_value(default_cvs(*dc)[0], r) == 0.4);

    const auto t = make_surface({"torsion-1d", {}});
    const double a[] = {3.5 * kPi};
    CHECK(cv_value(default_cvs(*t)[0], a) == doctest::Approx(-0.5 * kPi).epsilon(1e-14));

    const auto am = make_surface({"amide-2d", {}});
    const auto cvs = default_cvs(*am);
    CHECK(cvs[1].name == "eta");
    const double q[] = {0.0, -0.9 * kPi};
    CHECK(cv_value(cvs[1], q) == doctest::Approx(-0.9 * kPi).epsilon(1e-14));
  }

  TEST_CASE("periodic CV values lie in (-period/2, period/2]") {
    CHECK(wrap_periodic(kPi, kTwoPi) == doctest::Approx(kPi));
    CHECK(wrap_periodic(-kPi, kTwoPi) == doctest::Approx(kPi));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 1000; ++i) {
      const double w = wrap_periodic(u(rng), kTwoPi);
      CHECK(w > -kPi);
      CHECK(w <= kPi);
    }
  }

  TEST_CASE("amide: cis sits V_cis above trans on every eta slice") {
    const auto s = make_surface({"amide-2d", {}});
    for (double e = -kPi; e < kPi; e += 0.1) {
      const double trans[] = {kPi, e}, cis[] = {0.0, e};
      CHECK(s->energy(cis) - s->energy(trans) == doctest::Approx(2.0).epsilon(1e-12));
    }
  }
}
