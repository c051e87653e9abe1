#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kamlab/gridfn.hpp"

using namespace kamlab;

TEST_CASE("torus grid interpolation accuracy") {
  auto f = [](const std::vector<double>& x) {
    return std::sin(TWO_PI * x[0]) * std::cos(TWO_PI * 2 * x[1]) + 0.3 * std::cos(TWO_PI * x[1]);
  };
  GridFunction g = GridFunction::sample({64, 64}, f);
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x = {u(rng), u(rng)};
    CHECK(std::fabs(g.eval(x) - f(x)) < 3e-4);
    double dfdx0 = TWO_PI * std::cos(TWO_PI * x[0]) * std::cos(TWO_PI * 2 * x[1]);
    CHECK(std::fabs(g.deriv(x, 0) - dfdx0) < 2e-2);
  }
}

TEST_CASE("box grid complex interpolation and derivative") {
  PBox box{{-1.0, 0.2}, {1.0, 0.9}};
  auto f = [](const std::vector<double>& p) {
    return cplx(std::exp(0.5 * p[0]) * p[1], std::sin(p[0] * p[1]));
  };
  BoxGridC g = BoxGridC::sample(box, {41, 41}, f);
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> p = {box.lo[0] + u(rng) * (box.hi[0] - box.lo[0]),
                             box.lo[1] + u(rng) * (box.hi[1] - box.lo[1])};
    CHECK(std::abs(g.eval(p) - f(p)) < 1e-5);
    cplx d0 = cplx(0.5 * std::exp(0.5 * p[0]) * p[1], p[1] * std::cos(p[0] * p[1]));
    CHECK(std::abs(g.deriv(p, 0) - d0) < 1e-3);
  }
}

TEST_CASE("dft recovers trig coefficients") {
  GridFunction g = GridFunction::sample({32, 32}, [](const std::vector<double>& x) {
    return 0.25 + std::cos(TWO_PI * (2 * x[0] - x[1]));
  });
  TrigPoly t = dft_trig(g, 0);
  const PolyP* mean = t.mode({0, 0});
  REQUIRE(mean != nullptr);
  CHECK(std::abs(mean->eval({}) - 0.25) < 1e-12);
  const PolyP* m = t.mode({2, -1});
  REQUIRE(m != nullptr);
  CHECK(std::abs(m->eval({}) - 0.5) < 1e-12);
}

TEST_CASE("smoothing preserves constants exactly") {
  GridFunction g = GridFunction::sample({16, 16},
                                        [](const std::vector<double>&) { return 1.375; });
  TrigPoly s = smooth_approx(g, 0.3, 4, 0);
  CHECK(s.terms().size() == 1);
  CHECK(std::abs(s.mode({0, 0})->eval({}) - 1.375) < 1e-14);
}

TEST_CASE("smoothing keeps low modes when tau is below the cutoff scale") {
  auto f = [](const std::vector<double>& x) {
    return std::cos(TWO_PI * 3 * x[0]) + 0.5 * std::sin(TWO_PI * x[0]);
  };
  GridFunction g = GridFunction::sample({64}, f);
  TrigPoly s = smooth_approx(g, 1e-4, 4, 0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    double x = i / 200.0;
    worst = std::max(worst, std::fabs(s.eval({x}, {}) - f({x})));
  }
  CHECK(worst / 1.5 <= 1e-6);
}

TEST_CASE("smoothing error decreases monotonically in tau on a triangle wave") {
  auto tri = [](const std::vector<double>& x) {
    return 1.0 - 4.0 * std::fabs(wrap01(x[0]) - 0.5);
  };
  GridFunction g = GridFunction::sample({256}, tri);
  double prev = 1e100;
  for (double tau : {0.25, 0.12, 0.06, 0.03}) {
    TrigPoly s = smooth_approx(g, tau, 4, 0);
    double err = 0.0;
    for (int i = 0; i < 400; ++i) {
      double x = (i + 0.5) / 400.0;
      err = std::max(err, std::fabs(s.eval({x}, {}) - tri({x})));
    }
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("smoothing flags unresolved grids") {
  // White-noise-like content up to Nyquist on a tiny grid, tau asking for a
  // finer scale than the grid carries.
  Rng rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GridFunction g({8});
  for (auto& v : g.data()) v = u(rng);
  CHECK_THROWS_AS(smooth_approx(g, 0.01, 4, 0), ResolutionError);
}
