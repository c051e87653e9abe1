#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kamlab/normalform.hpp"

using namespace kamlab;

namespace {

// Slow-pendulum forcing: -cos(2 pi th_s) (1 + 1/2 cos 2 pi th_f + 1/4 cos 2 pi t),
// optionally rescaled.
TrigPoly make_forcing(double scale = 1.0) {
  TrigPoly h(3, 2);
  auto c = [&](cplx v) { return PolyP::constant(2, v * scale); };
  h.add_mode({1, 0, 0}, c(-0.5));
  h.add_mode({1, 1, 0}, c(-0.125));
  h.add_mode({1, -1, 0}, c(-0.125));
  h.add_mode({1, 0, 1}, c(-0.0625));
  h.add_mode({1, 0, -1}, c(-0.0625));
  return h;
}

struct Setup {
  ConvexIntegrable H0 = ConvexIntegrable::identity(2);
  double eps = 1e-3;
  int K = 2;
  double s = 0.05 / 6.0;  // 3*K*s = 0.05
  double beta = 0.0;
  std::pair<double, double> arc = {0.3, 0.45};

  Setup() { beta = s / std::pow(eps, 0.25); }

  PBox tube() const {
    return PBox{{-s, arc.first}, {s, arc.second}};
  }
};

}  // namespace

TEST_CASE("resonance curve solves the slow stationarity system") {
  EMat M(2, 2);
  M << 1.3, 0.2, 0.2, 0.9;
  ResonanceFrame frame(ConvexIntegrable{M});
  for (double pf : {0.0, 0.3, 0.7, 1.0}) {
    CHECK(frame.gamma_residual(pf) < 1e-12);
    EVec p = frame.p_star(pf);
    CHECK(p[1] == pf);
  }
  // Fast frequency is affine: three points collinear.
  double w0 = frame.omega_f(0.0), w1 = frame.omega_f(0.5), w2 = frame.omega_f(1.0);
  CHECK(std::fabs(w1 - 0.5 * (w0 + w2)) < 1e-13);
  CHECK(w2 > w0);
}

TEST_CASE("punctures agree with a brute-force frequency scan") {
  EMat M(2, 2);
  M << 1.0, 0.15, 0.15, 1.1;
  ResonanceFrame frame(ConvexIntegrable{M});
  int K = 3;
  double s = 0.01, margin = 3.0 * K * s;
  auto ps = compute_punctures(frame, K, s, {0.0, 1.0});

  auto admissible = [&](double pf) {
    double wf = frame.omega_f(pf);
    for (int kf = -K; kf <= K; ++kf)
      for (int kt = -K; kt <= K; ++kt) {
        if (std::max(std::abs(kf), std::abs(kt)) == 0) continue;
        if (std::fabs(kf * wf + kt) < margin) return false;
      }
    return true;
  };
  auto in_arcs = [&](double pf) {
    for (auto& a : ps.arcs)
      if (pf >= a.first && pf <= a.second) return true;
    return false;
  };
  int disagreements = 0;
  for (int i = 0; i <= 2000; ++i) {
    double pf = i / 2000.0;
    // Skip points within a hair of any window boundary.
    bool boundary = false;
    for (auto& e : ps.excluded)
      if (std::fabs(pf - e.first) < 1e-6 || std::fabs(pf - e.second) < 1e-6)
        boundary = true;
    if (boundary) continue;
    if (admissible(pf) != in_arcs(pf)) ++disagreements;
  }
  CHECK(disagreements == 0);
}

TEST_CASE("K = 0 excludes nothing") {
  ResonanceFrame frame(ConvexIntegrable::identity(2));
  auto ps = compute_punctures(frame, 0, 0.01, {0.2, 0.8});
  CHECK(ps.excluded.empty());
  REQUIRE(ps.arcs.size() == 1);
  CHECK(ps.arcs[0].first == 0.2);
  CHECK(ps.arcs[0].second == 0.8);
}

TEST_CASE("averaging matches quadrature over fast angle and time") {
  TrigPoly H1 = make_forcing();
  ResonanceFrame frame(ConvexIntegrable::identity(2));
  auto ap = average_perturbation(H1, frame, {0.3, 0.45});

  Rng rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    double ths = u(rng);
    std::vector<double> p = {0.02 * (u(rng) - 0.5), 0.3 + 0.15 * u(rng)};
    double avg = 0.0;
    int N = 8;  // exact quadrature for this bandwidth
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b)
        avg += H1.eval({ths, (double)a / N, (double)b / N}, p);
    avg /= N * N;
    CHECK(std::fabs(ap.Z.eval({ths, 0.0, 0.0}, p) - avg) < 1e-10);
  }
}

TEST_CASE("dominant maximizer branch of the slow pendulum") {
  TrigPoly H1 = make_forcing();
  ResonanceFrame frame(ConvexIntegrable::identity(2));
  auto ap = average_perturbation(H1, frame, {0.3, 0.45});
  REQUIRE(!ap.branches.empty());
  CHECK(!ap.degenerate);
  // Z = -cos(2 pi th): peak at 1/2 with curvature 4 pi^2.
  CHECK(std::fabs(ap.theta_star(0.375) - 0.5) < 1e-8);
  CHECK(ap.lambda == doctest::Approx(4 * M_PI * M_PI).epsilon(1e-8));
  CHECK(!ap.double_peak);
}

TEST_CASE("flat averaged potential is reported degenerate") {
  TrigPoly H1(3, 2);
  H1.add_mode({0, 1, 0}, PolyP::constant(2, 0.5));  // fast-angle mode only
  ResonanceFrame frame(ConvexIntegrable::identity(2));
  auto ap = average_perturbation(H1, frame, {0.3, 0.45});
  CHECK(ap.degenerate);
  CHECK(ap.branches.empty());
}

TEST_CASE("twin peaks are reported") {
  TrigPoly H1(3, 2);
  H1.add_mode({2, 0, 0}, PolyP::constant(2, 0.5));  // cos(4 pi th_s)
  ResonanceFrame frame(ConvexIntegrable::identity(2));
  auto ap = average_perturbation(H1, frame, {0.3, 0.45});
  CHECK(ap.double_peak);
  REQUIRE(ap.branches.size() >= 2);
  double t0 = ap.branches[0].theta[0], t1 = ap.branches[1].theta[0];
  CHECK(circ_dist(t0, t1) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("cohomological identity holds on the certification tube") {
  Setup su;
  TrigPoly H1 = make_forcing(1.0 / 69.1);
  auto res = solve_cohomological(su.H0, H1, su.K, su.beta, su.eps, su.tube());
  CHECK(res.tail.empty());

  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    double phi[3] = {u(rng), u(rng), u(rng)};
    double p[2] = {su.s * (2 * u(rng) - 1),
                   su.arc.first + (su.arc.second - su.arc.first) * u(rng)};
    double gval, dphi[3], dp[2];
    res.G->eval_all(phi, p, gval, dphi, dp);
    // D_omega G = omega . dG/dtheta + dG/dt with omega = M p.
    double dw = p[0] * dphi[0] + p[1] * dphi[1] + dphi[2];
    double lhs = res.head.eval({phi[0], phi[1], phi[2]}, {p[0], p[1]}) - dw;
    double rhs = res.R1->value(phi, p);
    worst = std::max(worst, std::fabs(lhs - rhs));
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("modes on the cutoff plateau produce no generator") {
  // A single slow mode whose denominator coordinate stays inside [-1,1]
  // over the whole box: fully resonant, G empty, R1 reproduces the input.
  Setup su;
  TrigPoly H1(3, 2);
  H1.add_mode({1, 0, 0}, PolyP::constant(2, -0.5));
  auto res = solve_cohomological(su.H0, H1, su.K, su.beta, su.eps, su.tube());
  CHECK(res.G->modes.empty());
  double phi[3] = {0.21, 0.47, 0.83}, p[2] = {0.0, 0.375};
  CHECK(res.R1->value(phi, p) ==
        doctest::Approx(H1.eval({0.21, 0.47, 0.83}, {0.0, 0.375})).epsilon(1e-12));
}

TEST_CASE("nonresonant modes are solved away completely") {
  Setup su;
  TrigPoly H1(3, 2);
  H1.add_mode({0, 1, 0}, PolyP::constant(2, 0.25));
  auto res = solve_cohomological(su.H0, H1, su.K, su.beta, su.eps, su.tube());
  CHECK(res.R1->modes.empty());
  CHECK(!res.G->modes.empty());
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    double phi[3] = {u(rng), u(rng), u(rng)};
    double p[2] = {su.s * (2 * u(rng) - 1), 0.3 + 0.15 * u(rng)};
    double gval, dphi[3], dp[2];
    res.G->eval_all(phi, p, gval, dphi, dp);
    double dw = p[0] * dphi[0] + p[1] * dphi[1] + dphi[2];
    CHECK(std::fabs(H1.eval({phi[0], phi[1], phi[2]}, {p[0], p[1]}) - dw) < 1e-7);
  }
}

TEST_CASE("generator flow is symplectic and invertible") {
  Setup su;
  TrigPoly H1 = make_forcing(1.0 / 69.1);
  auto res = solve_cohomological(su.H0, H1, su.K, su.beta, su.eps, su.tube());
  GeneratorFlow flow{res.G, su.eps, 0.05};

  Vec th0 = {0.3, 0.7}, p0 = {0.002, 0.36};
  double t = 0.4;

  // Round trip.
  Vec th1, p1, th2, p2;
  double es1, es2;
  flow.map(th0, p0, t, +1, th1, p1, es1);
  flow.map(th1, p1, t, -1, th2, p2, es2);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::fabs(th2[i] - th0[i]) < 1e-12);
    CHECK(std::fabs(p2[i] - p0[i]) < 1e-12);
  }
  CHECK(std::fabs(es1 + es2) < 1e-12);

  // Jacobian by central differences; check J^T Omega J = Omega.
  const double h = 1e-6;
  double J[4][4];
  for (int j = 0; j < 4; ++j) {
    Vec tha = th0, pa = p0, thb = th0, pb = p0;
    (j < 2 ? tha[j] : pa[j - 2]) += h;
    (j < 2 ? thb[j] : pb[j - 2]) -= h;
    Vec thA, pA, thB, pB;
    double e;
    flow.map(tha, pa, t, +1, thA, pA, e);
    flow.map(thb, pb, t, +1, thB, pB, e);
    for (int i = 0; i < 2; ++i) {
      J[i][j] = (thA[i] - thB[i]) / (2 * h);
      J[i + 2][j] = (pA[i] - pB[i]) / (2 * h);
    }
  }
  double Om[4][4] = {};
  Om[0][2] = Om[1][3] = 1.0;
  Om[2][0] = Om[3][1] = -1.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) acc += J[a][i] * Om[a][b] * J[b][j];
      CHECK(std::fabs(acc - Om[i][j]) < 1e-6);
    }
}

TEST_CASE("full normal form build certifies the slow pendulum scenario") {
  Setup su;
  TrigPoly H1 = make_forcing(1.0 / 69.1);
  NormalFormParams params;
  params.eps = su.eps;
  params.K = su.K;
  params.beta = su.beta;
  params.delta = 0.5;
  params.res_angle_samples = 8;
  params.res_p_samples = 11;
  params.flow_step = 0.05;
  auto nf = build_normal_form(su.H0, H1, params, su.arc);

  CHECK(nf.Phi_C0 <= std::sqrt(su.eps));
  CHECK(nf.R_C2 <= params.delta);
  CHECK(nf.certified);
  CHECK(nf.r2_fit_error < 1e-3);
  CHECK(!nf.Z.degenerate);

  // The model reproduces the conjugated system at the fit momentum up to the
  // recorded fit error plus the momentum-Taylor slack absorbed into delta.
  GeneratorFlow flow{nf.coh.G, params.eps, params.flow_step};
  ResonanceFrame frame(su.H0);
  Vec pc = to_vec(frame.p_star(0.5 * (su.arc.first + su.arc.second)));
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    Vec th = {u(rng), u(rng)};
    double t = u(rng);
    Vec th1, p1;
    double es;
    flow.map(th, pc, t, +1, th1, p1, es);
    double conj = nf.raw->value(th1, p1, t) + es;
    double model = nf.model->value(th, pc, t);
    CHECK(std::fabs(conj - model) < params.eps * (nf.r2_fit_error + 1e-6) + 1e-12);
  }
}

TEST_CASE("displacement scales like sqrt(eps)") {
  Setup su;
  TrigPoly H1 = make_forcing(1.0 / 69.1);
  auto phi_c0 = [&](double eps) {
    double s = 0.05 / 6.0;  // keep the cutoff geometry fixed
    double beta = s / std::pow(eps, 0.25);
    PBox tube{{-s, 0.3}, {s, 0.45}};
    auto res = solve_cohomological(su.H0, H1, su.K, beta, eps, tube);
    GeneratorFlow flow{res.G, eps, 0.05};
    double worst = 0.0;
    Rng rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
      Vec th = {u(rng), u(rng)}, p = {s * (2 * u(rng) - 1), 0.3 + 0.15 * u(rng)};
      Vec th1, p1;
      double es;
      flow.map(th, p, u(rng), +1, th1, p1, es);
      for (int j = 0; j < 2; ++j) {
        worst = std::max(worst, std::fabs(th1[j] - th[j]));
        worst = std::max(worst, std::fabs(p1[j] - p[j]));
      }
    }
    return worst;
  };
  double a = phi_c0(1e-3), b = phi_c0(4e-3);
  double ratio = b / a;  // ideal: sqrt(4) = 2
  CHECK(ratio > 2.0 / 2.5);
  CHECK(ratio < 2.0 * 2.5);
}
