#include "kamlab/action.hpp"

#include <algorithm>

namespace kamlab {

// ---------------------------------------------------------------------------
// Legendre transform

LagrangianEval::LagrangianEval(const Ham& N) : N_(&N) {
  // Reference mass matrix at a neutral point; preconditions the inverse map.
  Vec th(N.n(), 0.0), p(N.n(), 0.0);
  M_ = N.hess_p(th, p, 0.0);
  msolve_ = M_.ldlt();
}

Vec LagrangianEval::velocity(const Vec& th, const Vec& p, double t) const {
  Vec dth, dp;
  N_->grad(th, p, t, dth, dp);
  return dp;
}

Vec LagrangianEval::momentum(const Vec& th, const Vec& v, double t, const Vec* warm) const {
  EVec ve = to_evec(v);
  EVec pe = warm ? to_evec(*warm) : EVec(msolve_.solve(ve));
  Vec p = to_vec(pe), dth, dp;
  for (int it = 0; it < 50; ++it) {
    N_->grad(th, p, t, dth, dp);
    EVec res = to_evec(dp) - ve;
    if (res.lpNorm<Eigen::Infinity>() < 1e-12) return p;
    pe = to_evec(p) - msolve_.solve(res);
    p = to_vec(pe);
  }
  throw ConvergenceError(
      "Legendre inverse did not converge (momentum Hessian far from the reference: "
      "convexity violation?)");
}

double LagrangianEval::value(const Vec& th, const Vec& v, double t, Vec* p_out,
                             Vec* dth_out) const {
  Vec p = momentum(th, v, t);
  double acc = 0.0;
  for (int i = 0; i < n(); ++i) acc += p[i] * v[i];
  double lv = acc - N_->value(th, p, t);
  if (dth_out) {
    Vec dth, dp;
    N_->grad(th, p, t, dth, dp);
    dth_out->resize(n());
    for (int i = 0; i < n(); ++i) (*dth_out)[i] = -dth[i];  // envelope
  }
  if (p_out) *p_out = std::move(p);
  return lv;
}

EMat LagrangianEval::hess_v(const Vec& th, const Vec& v, double t) const {
  Vec p = momentum(th, v, t);
  return N_->hess_p(th, p, t).inverse();
}

// ---------------------------------------------------------------------------
// Flow

void flow_steps(const Ham& N, Vec& th, Vec& p, double t0, double t1, int nsteps) {
  int nn = N.n();
  double h = (t1 - t0) / nsteps;
  Vec dth(nn), dp(nn);
  auto field = [&](const Vec& a_th, const Vec& a_p, double t, Vec& f_th, Vec& f_p) {
    N.grad(a_th, a_p, t, dth, dp);
    f_th = dp;
    f_p.resize(nn);
    for (int i = 0; i < nn; ++i) f_p[i] = -dth[i];
  };
  Vec k1t(nn), k1p(nn), k2t(nn), k2p(nn), k3t(nn), k3p(nn), k4t(nn), k4p(nn);
  Vec at(nn), ap(nn);
  for (int s = 0; s < nsteps; ++s) {
    double t = t0 + s * h;
    field(th, p, t, k1t, k1p);
    for (int i = 0; i < nn; ++i) at[i] = th[i] + 0.5 * h * k1t[i], ap[i] = p[i] + 0.5 * h * k1p[i];
    field(at, ap, t + 0.5 * h, k2t, k2p);
    for (int i = 0; i < nn; ++i) at[i] = th[i] + 0.5 * h * k2t[i], ap[i] = p[i] + 0.5 * h * k2p[i];
    field(at, ap, t + 0.5 * h, k3t, k3p);
    for (int i = 0; i < nn; ++i) at[i] = th[i] + h * k3t[i], ap[i] = p[i] + h * k3p[i];
    field(at, ap, t + h, k4t, k4p);
    for (int i = 0; i < nn; ++i) {
      th[i] += h / 6.0 * (k1t[i] + 2 * k2t[i] + 2 * k3t[i] + k4t[i]);
      p[i] += h / 6.0 * (k1p[i] + 2 * k2p[i] + 2 * k3p[i] + k4p[i]);
    }
  }
}

// ---------------------------------------------------------------------------
// Discrete action minimization

MinPath minimize_path(const LagrangianEval& L, const Vec& c, double alpha, const Vec& x0,
                      const Vec& x1, int M, int S, double t0) {
  int nn = L.n(), J = M * S;
  double h = 1.0 / S;
  MinPath out;
  out.nodes.resize(J + 1);
  for (int j = 0; j <= J; ++j) {
    out.nodes[j].resize(nn);
    double w = (double)j / J;
    for (int i = 0; i < nn; ++i) out.nodes[j][i] = (1 - w) * x0[i] + w * x1[i];
  }

  // Per-segment data refreshed by the gradient pass.
  std::vector<Vec> pj(J), dthj(J);  // momentum and dL/dtheta at midpoints
  Vec mid(nn), v(nn);
  auto segment = [&](int j) {
    for (int i = 0; i < nn; ++i) {
      mid[i] = 0.5 * (out.nodes[j][i] + out.nodes[j + 1][i]);
      v[i] = (out.nodes[j + 1][i] - out.nodes[j][i]) / h;
    }
    double t = wrap01(t0 + (j + 0.5) * h);
    const Vec* warm = pj[j].empty() ? nullptr : &pj[j];
    pj[j] = L.momentum(mid, v, t, warm);
    Vec dth, dp;
    L.ham().grad(mid, pj[j], t, dth, dp);
    dthj[j].resize(nn);
    for (int i = 0; i < nn; ++i) dthj[j][i] = -dth[i];
  };

  int d = (J - 1) * nn;
  Eigen::LDLT<EMat> ksolve;
  if (d > 0) {
    // Hessian of the kinetic part: tridiagonal blocks of M^{-1}/h.
    EMat Minv = L.mass().inverse();
    EMat K = EMat::Zero(d, d);
    for (int j = 1; j < J; ++j) {
      K.block((j - 1) * nn, (j - 1) * nn, nn, nn) = 2.0 / h * Minv;
      if (j + 1 < J) {
        K.block((j - 1) * nn, j * nn, nn, nn) = -1.0 / h * Minv;
        K.block(j * nn, (j - 1) * nn, nn, nn) = -1.0 / h * Minv;
      }
    }
    ksolve = K.ldlt();
  }

  EVec g(std::max(d, 1));
  double gnorm = 0.0;
  for (int iter = 0; iter < 100 && d > 0; ++iter) {
    for (int j = 0; j < J; ++j) segment(j);
    for (int j = 1; j < J; ++j)
      for (int i = 0; i < nn; ++i)
        g[(j - 1) * nn + i] = 0.5 * h * (dthj[j - 1][i] + dthj[j][i]) + (pj[j - 1][i] - c[i]) -
                              (pj[j][i] - c[i]);
    gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm < 1e-10) break;
    EVec step = ksolve.solve(g);
    for (int j = 1; j < J; ++j)
      for (int i = 0; i < nn; ++i) out.nodes[j][i] -= step[(j - 1) * nn + i];
  }
  for (int j = 0; j < J; ++j) segment(j);
  if (d > 0) {
    for (int j = 1; j < J; ++j)
      for (int i = 0; i < nn; ++i)
        g[(j - 1) * nn + i] = 0.5 * h * (dthj[j - 1][i] + dthj[j][i]) + pj[j - 1][i] - pj[j][i];
    gnorm = g.lpNorm<Eigen::Infinity>();
  }
  out.grad_norm = gnorm;
  out.stationary = gnorm <= 1e-7;

  double A = M * alpha;
  for (int j = 0; j < J; ++j) {
    double t = wrap01(t0 + (j + 0.5) * h);
    for (int i = 0; i < nn; ++i) {
      mid[i] = 0.5 * (out.nodes[j][i] + out.nodes[j + 1][i]);
      v[i] = (out.nodes[j + 1][i] - out.nodes[j][i]) / h;
    }
    double pv = 0.0;
    for (int i = 0; i < nn; ++i) pv += pj[j][i] * v[i];
    double lval = pv - L.ham().value(mid, pj[j], t);
    double cv = 0.0;
    for (int i = 0; i < nn; ++i) cv += c[i] * v[i];
    A += h * (lval - cv);
  }
  out.value = A;

  out.p_start.resize(nn);
  out.p_end.resize(nn);
  for (int i = 0; i < nn; ++i) {
    out.p_start[i] = pj[0][i] - c[i] - 0.5 * h * dthj[0][i];
    out.p_end[i] = pj[J - 1][i] - c[i] + 0.5 * h * dthj[J - 1][i];
  }
  return out;
}

MinPath action_min(const LagrangianEval& L, const Vec& c, double alpha, const Vec& th0,
                   const Vec& th1, int M, int S, int window) {
  int nn = L.n();
  if (window < 0) {
    double cmax = 0.0;
    for (double ci : c) cmax = std::max(cmax, std::fabs(ci));
    window = (int)std::ceil((cmax + 1.0) * M) + 2;
  }
  MinPath best;
  bool have = false;
  std::vector<int> k(nn, -window);
  while (true) {
    Vec x1 = th1;
    for (int i = 0; i < nn; ++i) x1[i] += k[i];
    MinPath cand = minimize_path(L, c, alpha, th0, x1, M, S);
    if (!have || cand.value < best.value) {
      best = std::move(cand);
      have = true;
    }
    int i = 0;
    for (; i < nn; ++i) {
      if (++k[i] <= window) break;
      k[i] = -window;
    }
    if (i == nn) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Bumps and generating functions

namespace {
double torus_dist(const Vec& x, const Vec& center) {
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double d = circ_dist(x[i], center[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}
}  // namespace

double BumpND::value(const Vec& x) const {
  double d = torus_dist(x, center);
  if (d <= inner) return amp;
  if (d >= outer) return 0.0;
  return amp * mollifier_val(1.0 + (d - inner) / (outer - inner));
}

GeneratingFn::GeneratingFn(std::shared_ptr<const Ham> N, int S, double t0)
    : N_(std::move(N)), L_(*N_), S_(S), t0_(t0) {}

double GeneratingFn::value(const Vec& x0, const Vec& x1, Vec* p0, Vec* p1) const {
  Vec c(n(), 0.0);
  MinPath mp = minimize_path(L_, c, 0.0, x0, x1, 1, S_, t0_);
  double val = mp.value;
  if (perturbed_) val += rho(x0) * phi(x1);
  if (p0) {
    *p0 = mp.p_start;
    if (perturbed_) {
      // -d1(rho(x) phi(x')) = -phi(x') * grad rho(x).
      double ph = phi(x1);
      double d = torus_dist(x0, rho_.center);
      if (ph != 0.0 && d > rho_.inner && d < rho_.outer && d > 1e-14) {
        double dr =
            rho_.amp * mollifier_deriv(1.0 + (d - rho_.inner) / (rho_.outer - rho_.inner)) /
            (rho_.outer - rho_.inner);
        for (int i = 0; i < n(); ++i)
          (*p0)[i] -= ph * dr * circ_diff(x0[i], rho_.center[i]) / d;
      }
    }
  }
  if (p1) {
    *p1 = mp.p_end;
    if (perturbed_) {
      double r = rho(x0);
      double d = torus_dist(x1, phi_.center);
      if (r != 0.0 && d > phi_.inner && d < phi_.outer && d > 1e-14) {
        double dp =
            phi_.amp * mollifier_deriv(1.0 + (d - phi_.inner) / (phi_.outer - phi_.inner)) /
            (phi_.outer - phi_.inner);
        for (int i = 0; i < n(); ++i)
          (*p1)[i] += r * dp * circ_diff(x1[i], phi_.center[i]) / d;
      }
    }
  }
  return val;
}

void GeneratingFn::attach_perturbation(const BumpND& rho, const BumpND& phi) {
  if (rho.inner >= rho.outer || phi.inner >= phi.outer)
    throw ConfigError("perturbation bump: need inner < outer");
  rho_ = rho;
  rho_.amp = 1.0;
  phi_ = phi;
  perturbed_ = true;
}

double GeneratingFn::rho(const Vec& x) const { return perturbed_ ? rho_.value(x) : 0.0; }
double GeneratingFn::phi(const Vec& x) const { return perturbed_ ? phi_.value(x) : 0.0; }

void twist_map(const GeneratingFn& G, const Vec& x, const Vec& p, Vec& x_out, Vec& p_out) {
  const EMat& M = G.lagrangian().mass();
  EVec pe = to_evec(p);
  EVec xp = to_evec(x) + M * pe;  // integrable prediction
  Vec p0, p1;
  for (int it = 0; it < 60; ++it) {
    Vec xv = to_vec(xp);
    G.value(x, xv, &p0, &p1);
    EVec res = to_evec(p0) - pe;  // want -d1 G = p
    if (res.lpNorm<Eigen::Infinity>() < 1e-11) {
      x_out = xv;
      p_out = p1;
      return;
    }
    xp -= M * res;
  }
  throw ConvergenceError(
      "twist map implicit solve failed (generating-function perturbation too large)");
}

// ---------------------------------------------------------------------------
// Cover lift

Vec CoverLift::xi(const Vec& x) const {
  Vec b(x.size());
  for (size_t i = 0; i < x.size(); ++i) b[i] = factor[i] * x[i];
  return b;
}

Vec CoverLift::xi_star(const Vec& c) const {
  Vec b(c.size());
  for (size_t i = 0; i < c.size(); ++i) b[i] = factor[i] * c[i];
  return b;
}

Vec CoverLift::deck(const Vec& x) const {
  Vec b = x;
  for (size_t i = 0; i < x.size(); ++i)
    if (factor[i] > 1.5) b[i] += 1.0 / factor[i];
  return b;
}

double CoverLift::cost(const GeneratingFn& G, const Vec& x0, const Vec& x1) const {
  return G.value(xi(x0), xi(x1));
}

}  // namespace kamlab
