#pragma once
// Independent oracles shared between the unit tests and the acceptance suite.
// These deliberately avoid the code paths they are used to check.

#include "kamlab/action.hpp"

namespace kamlab::oracle {

// Integrate the Hamiltonian flow together with the running action
// integral A = int (p . dN/dp - N) dt.
inline void flow_with_action(const Ham& N, Vec& th, Vec& p, double& A, double t0, double t1,
                             int nsteps) {
  int nn = N.n();
  double h = (t1 - t0) / nsteps;
  // State: (th, p, A).
  auto field = [&](const std::vector<double>& s, double t, std::vector<double>& ds) {
    Vec a_th(s.begin(), s.begin() + nn), a_p(s.begin() + nn, s.begin() + 2 * nn);
    Vec dth, dp;
    N.grad(a_th, a_p, t, dth, dp);
    double pv = 0.0;
    for (int i = 0; i < nn; ++i) pv += a_p[i] * dp[i];
    for (int i = 0; i < nn; ++i) ds[i] = dp[i];
    for (int i = 0; i < nn; ++i) ds[nn + i] = -dth[i];
    ds[2 * nn] = pv - N.value(a_th, a_p, t);
  };
  std::vector<double> s(2 * nn + 1);
  for (int i = 0; i < nn; ++i) s[i] = th[i], s[nn + i] = p[i];
  s[2 * nn] = A;
  std::vector<double> k1(s.size()), k2(s), k3(s), k4(s), tmp(s);
  for (int j = 0; j < nsteps; ++j) {
    double t = t0 + j * h;
    field(s, t, k1);
    for (size_t i = 0; i < s.size(); ++i) tmp[i] = s[i] + 0.5 * h * k1[i];
    field(tmp, t + 0.5 * h, k2);
    for (size_t i = 0; i < s.size(); ++i) tmp[i] = s[i] + 0.5 * h * k2[i];
    field(tmp, t + 0.5 * h, k3);
    for (size_t i = 0; i < s.size(); ++i) tmp[i] = s[i] + h * k3[i];
    field(tmp, t + h, k4);
    for (size_t i = 0; i < s.size(); ++i)
      s[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  for (int i = 0; i < nn; ++i) th[i] = s[i], p[i] = s[nn + i];
  A = s[2 * nn];
}

// Shooting solver for the one-step boundary value problem: find p0 with
// theta(1) = x1 (as lifts), return the continuous action minus c . (x1 - x0).
// Newton preconditioned by the reference mass matrix.
inline double shoot_action(const Ham& N, const Vec& x0, const Vec& x1, const Vec& c,
                           double t0 = 0.0, int nsteps = 400) {
  int nn = N.n();
  EMat M = N.hess_p(Vec(nn, 0.0), Vec(nn, 0.0), 0.0);
  EVec target = to_evec(x1);
  EVec p0 = M.ldlt().solve(target - to_evec(x0));
  for (int it = 0; it < 60; ++it) {
    Vec th = x0, p = to_vec(p0);
    double A = 0.0;
    flow_with_action(N, th, p, A, t0, t0 + 1.0, nsteps);
    EVec res = to_evec(th) - target;
    if (res.lpNorm<Eigen::Infinity>() < 1e-12) {
      double cv = 0.0;
      for (int i = 0; i < nn; ++i) cv += c[i] * (x1[i] - x0[i]);
      return A - cv;
    }
    p0 -= M.ldlt().solve(res);
  }
  throw ConvergenceError("shooting oracle failed to hit the endpoint");
}

}  // namespace kamlab::oracle
