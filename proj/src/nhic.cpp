#include "kamlab/nhic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace kamlab {

namespace {

// Catmull-Rom weights for local coordinate u in [0, 1].
void cr_weights4(double u, double* w) {
  const double u2 = u * u, u3 = u2 * u;
  w[0] = 0.5 * (-u3 + 2 * u2 - u);
  w[1] = 0.5 * (3 * u3 - 5 * u2 + 2);
  w[2] = 0.5 * (-3 * u3 + 4 * u2 + u);
  w[3] = 0.5 * (u3 - u2);
}

int wrap_i(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace

// ---------------------------------------------------------------------------
// MeshFn

MeshFn::MeshFn(std::vector<AxisSpec> axes, double fill) : axes_(std::move(axes)) {
  std::size_t total = 1;
  strides_.assign(axes_.size(), 0);
  for (int a = (int)axes_.size() - 1; a >= 0; --a) {
    if (axes_[a].n < (axes_[a].periodic ? 2 : 3))
      throw ConfigError("mesh axis needs at least 3 nodes (2 when periodic)");
    strides_[a] = total;
    total *= (std::size_t)axes_[a].n;
  }
  data_.assign(total, fill);
}

std::vector<double> MeshFn::node(std::size_t flat) const {
  std::vector<double> x(axes_.size());
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    std::size_t i = (flat / strides_[a]) % (std::size_t)axes_[a].n;
    const AxisSpec& ax = axes_[a];
    double step = ax.periodic ? (ax.hi - ax.lo) / ax.n : (ax.hi - ax.lo) / (ax.n - 1);
    x[a] = ax.lo + step * (double)i;
  }
  return x;
}

double MeshFn::eval(const Vec& z) const {
  const int d = dim();
  if (d == 0) return data_.empty() ? 0.0 : data_[0];
  if ((int)z.size() != d) throw ConfigError("mesh eval dimension mismatch");
  // Per-axis stencil base and weights.
  std::vector<std::array<int, 4>> idx(d);
  std::vector<std::array<double, 4>> wts(d);
  for (int a = 0; a < d; ++a) {
    const AxisSpec& ax = axes_[a];
    const int n = ax.n;
    double w[4];
    if (ax.periodic) {
      double step = (ax.hi - ax.lo) / n;
      double s = (z[a] - ax.lo) / step;
      double sf = std::floor(s);
      int i0 = (int)sf;
      cr_weights4(s - sf, w);
      for (int k = 0; k < 4; ++k) idx[a][k] = wrap_i(i0 - 1 + k, n);
    } else {
      double step = (ax.hi - ax.lo) / (n - 1);
      double v = std::clamp(z[a], ax.lo, ax.hi);
      double s = (v - ax.lo) / step;
      int i0 = (int)std::floor(s);
      i0 = std::clamp(i0, 0, n - 2);
      cr_weights4(s - i0, w);
      for (int k = 0; k < 4; ++k) idx[a][k] = i0 - 1 + k;
      // Fold out-of-range stencil nodes through linear extrapolation so the
      // interpolant stays exact on linear data up to the box edges.
      if (idx[a][0] < 0) {
        idx[a] = {0, 1, 2, 2};
        double f0 = w[1] + 2 * w[0], f1 = w[2] - w[0], f2 = w[3];
        w[0] = f0;
        w[1] = f1;
        w[2] = f2;
        w[3] = 0.0;
      } else if (idx[a][3] > n - 1) {
        idx[a] = {n - 3, n - 2, n - 1, n - 1};
        double f0 = w[0], f1 = w[1] - w[3], f2 = w[2] + 2 * w[3];
        w[0] = f0;
        w[1] = f1;
        w[2] = f2;
        w[3] = 0.0;
      }
    }
    for (int k = 0; k < 4; ++k) wts[a][k] = w[k];
  }
  // Separable tensor sum over the 4^d stencil.
  std::vector<int> pick(d, 0);
  double acc = 0.0;
  while (true) {
    double wprod = 1.0;
    std::size_t flat = 0;
    for (int a = 0; a < d; ++a) {
      wprod *= wts[a][pick[a]];
      flat += (std::size_t)idx[a][pick[a]] * strides_[a];
    }
    acc += wprod * data_[flat];
    int a = d - 1;
    while (a >= 0 && ++pick[a] == 4) pick[a--] = 0;
    if (a < 0) break;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Matrix algebra

EMat sqrt_spd(const EMat& a) {
  if (a.rows() == 1) {
    if (a(0, 0) <= 0.0) throw ConfigError("matrix is not positive definite");
    EMat r(1, 1);
    r(0, 0) = std::sqrt(a(0, 0));
    return r;
  }
  Eigen::SelfAdjointEigenSolver<EMat> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) throw ConfigError("eigensolve failed");
  EVec ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] <= 0.0) throw ConfigError("matrix is not positive definite");
    ev[i] = std::sqrt(ev[i]);
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

EMat t_from_ab(const EMat& a, const EMat& b) {
  if (a.rows() == 1) {
    if (a(0, 0) <= 0.0 || b(0, 0) <= 0.0)
      throw ConfigError("matrix is not positive definite");
    EMat r(1, 1);
    r(0, 0) = std::pow(b(0, 0) / a(0, 0), 0.25);
    return r;
  }
  const EMat ah = sqrt_spd(a);
  const EMat ahi = ah.inverse();
  const EMat mid = sqrt_spd(ah * b * ah);
  const EMat t2 = ahi * mid * ahi;
  return sqrt_spd(t2);
}

std::pair<double, double> rho_window(double b, double lambda, double delta, double eps) {
  double lo = std::pow(b, -0.25) *
              (std::pow(lambda, -0.75) * delta + std::pow(lambda, -0.5) * std::sqrt(eps));
  double hi = std::pow(b, 1.0 / 6.0) * std::pow(lambda, 1.25);
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// HypChart

HypChart::HypChart(std::shared_ptr<const Ham> N, ConvexIntegrable H0, AveragedPotential Z,
                   double eps, double gamma, int branch)
    : N_(std::move(N)),
      H0_(std::move(H0)),
      Z_(std::move(Z)),
      rf_(H0_),
      eps_(eps),
      gamma_(gamma),
      branch_(branch),
      ns_(H0_.n() - 1) {
  if (!N_) throw ConfigError("chart needs a model Hamiltonian");
  if (ns_ != 1) throw ConfigError("the hyperbolic chart supports one slow angle");
  if (Z_.branches.empty() || (int)Z_.branches.size() <= branch_)
    throw ConfigError("averaged potential has no maximizer branch for the chart");
  if (eps_ <= 0.0) throw ConfigError("chart needs eps > 0");
  d2Z_ = Z_.Z.deriv_angle(0).deriv_angle(0);
}

double HypChart::theta_star(double pf) const { return Z_.theta_star(pf, branch_); }

EVec HypChart::p_star(double pf) const { return rf_.p_star(pf); }

EMat HypChart::Amat(double pf) const {
  std::vector<double> phi(Z_.Z.dim_angle(), 0.0);
  phi[0] = theta_star(pf);
  const EVec ps = p_star(pf);
  std::vector<double> p(ps.data(), ps.data() + ps.size());
  EMat a(1, 1);
  a(0, 0) = -d2Z_.eval(phi, p);
  return a;
}

EMat HypChart::Bmat(double) const { return H0_.M.topLeftCorner(ns_, ns_); }

EMat HypChart::Tmat(double pf) const { return t_from_ab(Amat(pf), Bmat(pf)); }

EMat HypChart::Lmat(double pf) const {
  const EMat t = Tmat(pf);
  return t * Amat(pf) * t;
}

Vec HypChart::to_hyp(const Vec& th, const Vec& p, double t) const {
  const int n = H0_.n();
  const double pf = p[n - 1];
  const double tst = theta_star(pf);
  const EVec pst = p_star(pf);
  const EMat T = Tmat(pf);
  const EMat Ti = T.inverse();
  EVec dth(ns_), dp(ns_);
  for (int i = 0; i < ns_; ++i) {
    dth[i] = circ_diff(th[i], tst);
    dp[i] = p[i] - pst[i];
  }
  const double se = std::sqrt(eps_);
  const EVec a = Ti * dth;
  const EVec b = (T * dp) / se;
  Vec z(dim());
  for (int i = 0; i < ns_; ++i) {
    z[i] = a[i] + b[i];
    z[ns_ + i] = a[i] - b[i];
  }
  z[2 * ns_] = gamma_ * th[n - 1];
  z[2 * ns_ + 1] = pf / se;
  z[2 * ns_ + 2] = t;
  return z;
}

void HypChart::from_hyp(const Vec& z, Vec& th, Vec& p, double& t) const {
  const int n = H0_.n();
  const double se = std::sqrt(eps_);
  const double pf = se * z[2 * ns_ + 1];
  const double tst = theta_star(pf);
  const EVec pst = p_star(pf);
  const EMat T = Tmat(pf);
  const EMat Ti = T.inverse();
  EVec x(ns_), y(ns_);
  for (int i = 0; i < ns_; ++i) {
    x[i] = z[i];
    y[i] = z[ns_ + i];
  }
  const EVec dth = T * (0.5 * (x + y));
  const EVec dp = se * (Ti * (0.5 * (x - y)));
  th.assign(n, 0.0);
  p.assign(n, 0.0);
  for (int i = 0; i < ns_; ++i) {
    th[i] = wrap01(tst + dth[i]);
    p[i] = pst[i] + dp[i];
  }
  th[n - 1] = wrap01(z[2 * ns_] / gamma_);
  p[n - 1] = pf;
  t = z[2 * ns_ + 2];
}

Vec HypChart::field(const Vec& z) const {
  const int n = H0_.n();
  Vec th, p;
  double t;
  from_hyp(z, th, p, t);
  Vec dth(n), dp(n);
  N_->grad(th, p, t, dth, dp);
  // Hamiltonian field in (th, p, t).
  Vec vth(n), vp(n);
  double vnorm2 = 1.0;  // the t-direction
  for (int i = 0; i < n; ++i) {
    vth[i] = dp[i];
    vp[i] = -dth[i];
    vnorm2 += vth[i] * vth[i] + vp[i] * vp[i];
  }
  const double vnorm = std::sqrt(vnorm2);
  const double hstep = 1e-5;
  // Fourth-order directional difference of the forward map along the unit
  // Hamiltonian direction, rescaled by the field magnitude.
  auto at = [&](double s) {
    Vec th2(n), p2(n);
    const double sc = s / vnorm;
    for (int i = 0; i < n; ++i) {
      th2[i] = th[i] + sc * vth[i];
      p2[i] = p[i] + sc * vp[i];
    }
    return to_hyp(th2, p2, t + sc);
  };
  const Vec f1 = at(hstep), fm1 = at(-hstep), f2 = at(2 * hstep), fm2 = at(-2 * hstep);
  Vec out(dim());
  for (int i = 0; i < dim(); ++i) {
    double raw = f1[i] - fm1[i];
    // The slow and fast angles live on circles; take the short representative.
    if (i == 2 * ns_) raw = gamma_ * circ_diff(f1[i] / gamma_, fm1[i] / gamma_);
    double raw2 = f2[i] - fm2[i];
    if (i == 2 * ns_) raw2 = gamma_ * circ_diff(f2[i] / gamma_, fm2[i] / gamma_);
    out[i] = vnorm * (8.0 * raw - raw2) / (12.0 * hstep);
  }
  out[dim() - 1] = 1.0;  // exact time derivative
  return out;
}

EMat HypChart::chart_jacobian(const Vec& th, const Vec& p, double t) const {
  const int n = H0_.n();
  const int cols = 2 * n;
  EMat J(dim(), cols);
  const double hstep = 1e-5;
  auto at = [&](int col, double s) {
    Vec th2 = th, p2 = p;
    if (col < n)
      th2[col] += s;
    else
      p2[col - n] += s;
    return to_hyp(th2, p2, t);
  };
  for (int c = 0; c < cols; ++c) {
    const Vec f1 = at(c, hstep), fm1 = at(c, -hstep), f2 = at(c, 2 * hstep),
              fm2 = at(c, -2 * hstep);
    for (int r = 0; r < dim(); ++r) {
      double raw = f1[r] - fm1[r];
      double raw2 = f2[r] - fm2[r];
      if (r == 2 * ns_) {
        raw = gamma_ * circ_diff(f1[r] / gamma_, fm1[r] / gamma_);
        raw2 = gamma_ * circ_diff(f2[r] / gamma_, fm2[r] / gamma_);
      }
      J(r, c) = (8.0 * raw - raw2) / (12.0 * hstep);
    }
  }
  return J;
}

// ---------------------------------------------------------------------------
// Frame tables

SlowFastFrame slowfast_frame(const HypChart& chart, const std::vector<double>& pf_grid,
                             double lambda, double D) {
  SlowFastFrame f;
  f.pf_grid = pf_grid;
  f.eps = chart.eps();
  f.gamma = chart.gamma();
  f.lambda = lambda;
  f.D = D;
  f.alpha_scale = std::sqrt(chart.eps() * lambda / (4.0 * D));
  f.lam_min = std::numeric_limits<double>::infinity();
  for (double pf : pf_grid) {
    const EMat a = chart.Amat(pf);
    const EMat b = chart.Bmat(pf);
    const EMat t = t_from_ab(a, b);
    const EMat lam = t * a * t;
    f.A.push_back(a);
    f.B.push_back(b);
    f.T.push_back(t);
    f.Lam.push_back(lam);
    const EMat t2 = t * t;
    f.worst_identity = std::max(f.worst_identity, (t2 * a * t2 - b).norm());
    const EMat ti = t.inverse();
    f.worst_lam_gap = std::max(f.worst_lam_gap, (lam - ti * b * ti).norm());
    Eigen::SelfAdjointEigenSolver<EMat> es(0.5 * (lam + lam.transpose()));
    f.lam_min = std::min(f.lam_min, es.eigenvalues().minCoeff());
  }
  f.ok = f.worst_identity <= 1e-9 && f.worst_lam_gap <= 1e-9 &&
         f.lam_min >= std::sqrt(lambda / D) - 1e-9;
  return f;
}

// ---------------------------------------------------------------------------
// Block certificate

namespace {

// Sample positions along one center axis (grid nodes of its spec).
std::vector<double> axis_samples(const AxisSpec& ax) {
  if (ax.periodic) {
    std::vector<double> v(ax.n);
    double step = (ax.hi - ax.lo) / ax.n;
    for (int i = 0; i < ax.n; ++i) v[i] = ax.lo + step * i;
    return v;
  }
  return linspace(ax.lo, ax.hi, ax.n);
}

// Iterate the cartesian product of per-axis sample lists.
void for_product(const std::vector<std::vector<double>>& lists,
                 const std::function<void(const Vec&)>& body) {
  const int d = (int)lists.size();
  Vec x(d);
  std::vector<int> idx(d, 0);
  while (true) {
    for (int a = 0; a < d; ++a) x[a] = lists[a][idx[a]];
    body(x);
    int a = d - 1;
    while (a >= 0 && ++idx[a] == (int)lists[a].size()) idx[a--] = 0;
    if (a < 0) break;
  }
}

// Fourth-order finite-difference Jacobian of F at z with per-column step.
EMat fd_jacobian(const FieldFn& F, const Vec& z, double hstep) {
  const int d = (int)z.size();
  const int rows = (int)F(z).size();
  EMat J(rows, d);
  for (int c = 0; c < d; ++c) {
    Vec zp = z, zm = z, zp2 = z, zm2 = z;
    zp[c] += hstep;
    zm[c] -= hstep;
    zp2[c] += 2 * hstep;
    zm2[c] -= 2 * hstep;
    const Vec f1 = F(zp), fm1 = F(zm), f2 = F(zp2), fm2 = F(zm2);
    for (int r = 0; r < rows; ++r)
      J(r, c) = (8.0 * (f1[r] - fm1[r]) - (f2[r] - fm2[r])) / (12.0 * hstep);
  }
  return J;
}

double spectral_norm(const EMat& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

}  // namespace

BlockCertificate verify_block(const FieldFn& F, const BlockGeometry& geo) {
  BlockCertificate cert;
  const int nu = geo.nu, ns = geo.ns;
  const int nc = (int)geo.center.size();
  const int d = nu + ns + nc;

  std::vector<std::vector<double>> hyp_u(nu), hyp_s(ns), cen(nc);
  for (int i = 0; i < nu; ++i) hyp_u[i] = linspace(-geo.rho_u, geo.rho_u, geo.hyp_samples);
  for (int j = 0; j < ns; ++j) hyp_s[j] = linspace(-geo.rho_s, geo.rho_s, geo.hyp_samples);
  for (int a = 0; a < nc; ++a) cen[a] = axis_samples(geo.center[a]);

  double flux_u = std::numeric_limits<double>::infinity();
  double flux_s = -std::numeric_limits<double>::infinity();
  double alpha = std::numeric_limits<double>::infinity();
  double mjac = 0.0, collar = 0.0;

  auto with_center = [&](const std::function<void(const Vec&)>& body) {
    if (nc == 0) {
      body(Vec{});
      return;
    }
    for_product(cen, body);
  };

  // Boundary flux on the unstable and stable faces.
  with_center([&](const Vec& c) {
    std::vector<std::vector<double>> lists = hyp_u;
    lists.insert(lists.end(), hyp_s.begin(), hyp_s.end());
    for_product(lists, [&](const Vec& hy) {
      Vec z(d);
      for (int i = 0; i < nu + ns; ++i) z[i] = hy[i];
      for (int a = 0; a < nc; ++a) z[nu + ns + a] = c[a];
      for (int i = 0; i < nu; ++i) {
        for (int sgn : {-1, +1}) {
          Vec zb = z;
          zb[i] = sgn * geo.rho_u;
          const Vec f = F(zb);
          flux_u = std::min(flux_u, sgn * f[i] / geo.rho_u);
        }
      }
      for (int j = 0; j < ns; ++j) {
        for (int sgn : {-1, +1}) {
          Vec zb = z;
          zb[nu + j] = sgn * geo.rho_s;
          const Vec f = F(zb);
          flux_s = std::max(flux_s, sgn * f[nu + j] / geo.rho_s);
        }
      }
    });
  });

  // Jacobian blocks and collar field at interior samples.
  with_center([&](const Vec& c) {
    std::vector<std::vector<double>> lists = hyp_u;
    lists.insert(lists.end(), hyp_s.begin(), hyp_s.end());
    for_product(lists, [&](const Vec& hy) {
      Vec z(d);
      for (int i = 0; i < nu + ns; ++i) z[i] = hy[i];
      for (int a = 0; a < nc; ++a) z[nu + ns + a] = c[a];
      const EMat J = fd_jacobian(F, z, geo.fd_step);
      const EMat Luu = 0.5 * (J.block(0, 0, nu, nu) + J.block(0, 0, nu, nu).transpose());
      const EMat Lss =
          0.5 * (J.block(nu, nu, ns, ns) + J.block(nu, nu, ns, ns).transpose());
      Eigen::SelfAdjointEigenSolver<EMat> eu(Luu), es(Lss);
      alpha = std::min(alpha, eu.eigenvalues().minCoeff());
      alpha = std::min(alpha, -es.eigenvalues().maxCoeff());
      // Coupling: every off-diagonal block touching a hyperbolic row/column.
      mjac = std::max(mjac, spectral_norm(J.block(0, nu, nu, d - nu)));
      mjac = std::max(mjac, spectral_norm(J.block(nu, 0, ns, nu)));
      if (nc > 0) mjac = std::max(mjac, spectral_norm(J.block(nu, nu + ns, ns, nc)));
      if (nc > 0) mjac = std::max(mjac, spectral_norm(J.block(nu + ns, 0, nc, nu + ns)));
      if (geo.collar_axis >= 0 && geo.sigma > 0.0) {
        const Vec f = F(z);
        collar = std::max(collar, 2.0 * std::fabs(f[nu + ns + geo.collar_axis]) / geo.sigma);
      }
    });
  });

  cert.flux_u_min = flux_u;
  cert.flux_s_max = flux_s;
  cert.alpha_meas = alpha;
  cert.m_jac = mjac;
  cert.collar_term = collar;
  cert.m_meas = std::max(mjac, collar);
  cert.hyp_flux = flux_u > 0.0 && flux_s < 0.0;
  cert.hyp_cone = alpha > 2.0 * cert.m_meas;
  cert.K = cert.hyp_cone ? cert.m_meas / (alpha - 2.0 * cert.m_meas) : 1e18;
  cert.pass = cert.hyp_flux && cert.hyp_cone && cert.K <= 0.125 + 1e-12;
  cert.graphs_only =
      cert.hyp_flux && cert.hyp_cone && !cert.pass && cert.K <= 1.0 / std::sqrt(2.0) + 1e-12;
  return cert;
}

// ---------------------------------------------------------------------------
// Graph transform

namespace {

Vec rk4_flow(const FieldFn& F, Vec z, double T, int nsteps) {
  const double h = T / nsteps;
  const int d = (int)z.size();
  Vec k1, k2, k3, k4, tmp(d);
  for (int s = 0; s < nsteps; ++s) {
    k1 = F(z);
    for (int i = 0; i < d; ++i) tmp[i] = z[i] + 0.5 * h * k1[i];
    k2 = F(tmp);
    for (int i = 0; i < d; ++i) tmp[i] = z[i] + 0.5 * h * k2[i];
    k3 = F(tmp);
    for (int i = 0; i < d; ++i) tmp[i] = z[i] + h * k3[i];
    k4 = F(tmp);
    for (int i = 0; i < d; ++i) z[i] += (h / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return z;
}

// Wrap a residual component to the shortest representative of a periodic axis.
double axis_residual(const AxisSpec& ax, double target, double value) {
  double r = target - value;
  if (ax.periodic) {
    const double period = ax.hi - ax.lo;
    r -= period * std::round(r / period);
  }
  return r;
}

// Half-width of the graph-argument hyperbolic axis.
double rho_arg_bound(const BlockGeometry& geo, int arg_comp) {
  return arg_comp == 0 ? geo.rho_u : geo.rho_s;
}

// One sweep of the semi-Lagrangian transform for a graph `w` of the
// coordinate `graph_comp` over the remaining (hyp argument, center) axes.
// flow_sign -1: backward flow (center-stable graph), +1: forward.
double transform_sweep(const FieldFn& F, MeshFn& w, int graph_comp, int arg_comp,
                       const BlockGeometry& geo, const GraphTransformParams& gp,
                       int flow_sign) {
  const int nc = (int)geo.center.size();
  const int d = 2 + nc;  // scalar hyperbolic directions
  const double rho_g = graph_comp == 0 ? geo.rho_u : geo.rho_s;
  MeshFn fresh = w;
  double delta = 0.0;
  for (std::size_t node = 0; node < w.size(); ++node) {
    const std::vector<double> tgt = w.node(node);
    Vec q = tgt;  // source guess in graph-argument coordinates
    Vec zb;
    Vec rprev(1 + nc, 0.0), dqprev(1 + nc, 0.0);
    const double rho_arg = rho_arg_bound(geo, arg_comp);
    for (int it = 0; it < gp.source_iters; ++it) {
      Vec z(d);
      z[graph_comp] = w.eval(q);
      z[arg_comp] = q[0];
      for (int a = 0; a < nc; ++a) z[2 + a] = q[1 + a];
      zb = rk4_flow(F, z, flow_sign * gp.h, gp.flow_substeps);
      // Residual of the non-graph components against the target node, with a
      // component-wise secant step so expanding arguments still converge.
      Vec r(1 + nc);
      r[0] = tgt[0] - zb[arg_comp];
      for (int a = 0; a < nc; ++a) r[1 + a] = axis_residual(geo.center[a], tgt[1 + a], zb[2 + a]);
      double rmax = 0.0;
      for (int k = 0; k < 1 + nc; ++k) {
        double dq = r[k];
        if (it > 0) {
          const double denom = rprev[k] - r[k];
          if (std::fabs(denom) > 1e-300) {
            const double sec = r[k] * dqprev[k] / denom;
            if (std::fabs(sec) <= 10.0 * std::fabs(r[k]) + 1e-15) dq = sec;
          }
        }
        q[k] += dq;
        dqprev[k] = dq;
        rmax = std::max(rmax, std::fabs(r[k]));
      }
      q[0] = std::clamp(q[0], -rho_arg, rho_arg);
      for (int a = 0; a < nc; ++a)
        if (!geo.center[a].periodic)
          q[1 + a] = std::clamp(q[1 + a], geo.center[a].lo, geo.center[a].hi);
      rprev = r;
      if (rmax < 1e-13) break;
    }
    double val = std::clamp(zb[graph_comp], -rho_g, rho_g);
    delta = std::max(delta, std::fabs(val - fresh.data()[node]));
    fresh.data()[node] = val;
  }
  w = fresh;
  return delta;
}

}  // namespace

CylinderGraph graph_transform(const FieldFn& F, const BlockGeometry& geo,
                              const GraphTransformParams& gp) {
  if (geo.nu != 1 || geo.ns != 1)
    throw ConfigError("graph transform supports scalar hyperbolic directions");
  CylinderGraph g;
  g.geo = geo;
  g.params = gp;

  std::vector<AxisSpec> sc_axes{{-geo.rho_s, geo.rho_s, gp.mesh_hyp, false}};
  std::vector<AxisSpec> uc_axes{{-geo.rho_u, geo.rho_u, gp.mesh_hyp, false}};
  for (const AxisSpec& ax : geo.center) {
    sc_axes.push_back(ax);
    uc_axes.push_back(ax);
  }
  g.wsc = MeshFn(sc_axes, 0.0);
  g.wuc = MeshFn(uc_axes, 0.0);

  bool conv_sc = false, conv_uc = false;
  int it_sc = 0, it_uc = 0;
  double d_sc = 0.0, d_uc = 0.0;
  for (it_sc = 1; it_sc <= gp.iters_max; ++it_sc) {
    d_sc = transform_sweep(F, g.wsc, /*graph_comp=*/0, /*arg_comp=*/1, geo, gp, -1);
    if (d_sc < gp.tol) {
      conv_sc = true;
      break;
    }
  }
  for (it_uc = 1; it_uc <= gp.iters_max; ++it_uc) {
    d_uc = transform_sweep(F, g.wuc, /*graph_comp=*/1, /*arg_comp=*/0, geo, gp, +1);
    if (d_uc < gp.tol) {
      conv_uc = true;
      break;
    }
  }
  g.iters = std::max(it_sc, it_uc);
  g.final_delta = std::max(d_sc, d_uc);
  g.converged = conv_sc && conv_uc;

  // Center graph from the pairwise contraction of the two graphs.
  const int nc = (int)geo.center.size();
  g.wc_u = MeshFn(geo.center, 0.0);
  g.wc_s = MeshFn(geo.center, 0.0);
  for (std::size_t node = 0; node < g.wc_u.size(); ++node) {
    const std::vector<double> c = g.wc_u.node(node);
    double x = 0.0, y = 0.0;
    for (int it = 0; it < 200; ++it) {
      Vec qx(1 + nc), qy(1 + nc);
      qy[0] = x;
      qx[0] = y;
      for (int a = 0; a < nc; ++a) qx[1 + a] = qy[1 + a] = c[a];
      const double ny = g.wuc.eval(qy);
      const double nx = g.wsc.eval(qx);
      const double move = std::max(std::fabs(nx - x), std::fabs(ny - y));
      x = nx;
      y = ny;
      if (move < 1e-14) break;
    }
    g.wc_u.data()[node] = x;
    g.wc_s.data()[node] = y;
  }

  // Grid Lipschitz constants (max slope over adjacent nodes, all axes).
  auto mesh_lip = [](const MeshFn& m) {
    double lip = 0.0;
    const auto& axes = m.axes();
    const int d = m.dim();
    if (d == 0) return 0.0;
    std::vector<std::size_t> strides(d);
    std::size_t total = 1;
    for (int a = d - 1; a >= 0; --a) {
      strides[a] = total;
      total *= (std::size_t)axes[a].n;
    }
    for (std::size_t node = 0; node < m.size(); ++node) {
      for (int a = 0; a < d; ++a) {
        const int n = axes[a].n;
        const std::size_t i = (node / strides[a]) % (std::size_t)n;
        const double step = axes[a].periodic ? (axes[a].hi - axes[a].lo) / n
                                             : (axes[a].hi - axes[a].lo) / (n - 1);
        if ((int)i + 1 < n) {
          const double dv = m.data()[node + strides[a]] - m.data()[node];
          lip = std::max(lip, std::fabs(dv) / step);
        } else if (axes[a].periodic) {
          const double dv = m.data()[node - i * strides[a]] - m.data()[node];
          lip = std::max(lip, std::fabs(dv) / step);
        }
      }
    }
    return lip;
  };
  g.lip_sc = mesh_lip(g.wsc);
  g.lip_uc = mesh_lip(g.wuc);
  g.lip_c = std::max(mesh_lip(g.wc_u), mesh_lip(g.wc_s));
  return g;
}

// ---------------------------------------------------------------------------
// Chart-mapped measurements

CylinderReport cylinder_measure(const HypChart& chart, const CylinderGraph& g) {
  CylinderReport rep;
  const int nc = (int)g.geo.center.size();
  if (nc != 3) throw ConfigError("cylinder measurement expects (Theta, I, t) center axes");
  const double se = std::sqrt(chart.eps());
  const AxisSpec& iax = g.geo.center[1];

  FieldFn F = [&chart](const Vec& z) { return chart.field(z); };

  // Values of Theta^s over the center mesh for the p^f difference quotient.
  MeshFn ths = g.wc_u;
  for (std::size_t node = 0; node < g.wc_u.size(); ++node) {
    const std::vector<double> c = g.wc_u.node(node);
    Vec z{g.wc_u.data()[node], g.wc_s.data()[node], c[0], c[1], c[2]};
    Vec th, p;
    double t;
    chart.from_hyp(z, th, p, t);
    const double tst = chart.theta_star(p.back());
    rep.theta_dist_max = std::max(rep.theta_dist_max, circ_dist(th[0], tst));
    const EVec pst = chart.p_star(p.back());
    rep.psn_dist_max = std::max(rep.psn_dist_max, std::fabs(p[0] - pst[0]));
    ths.data()[node] = tst + circ_diff(th[0], tst);
  }
  {
    const auto& axes = ths.axes();
    std::vector<std::size_t> strides(3);
    std::size_t total = 1;
    for (int a = 2; a >= 0; --a) {
      strides[a] = total;
      total *= (std::size_t)axes[a].n;
    }
    const double istep = (iax.hi - iax.lo) / (iax.n - 1);
    for (std::size_t node = 0; node < ths.size(); ++node) {
      const std::size_t i = (node / strides[1]) % (std::size_t)axes[1].n;
      if ((int)i + 1 >= axes[1].n) continue;
      const double dth = circ_diff(ths.data()[node + strides[1]], ths.data()[node]);
      rep.dtheta_dpf_max = std::max(rep.dtheta_dpf_max, std::fabs(dth) / (se * istep));
    }
  }

  // Invariance: flow graph points forward and compare against the graph.
  const double tau = 0.5 * g.params.h;
  const std::size_t stride = std::max<std::size_t>(1, g.wc_u.size() / 48);
  for (std::size_t node = 0; node < g.wc_u.size(); node += stride) {
    const std::vector<double> c = g.wc_u.node(node);
    Vec z{g.wc_u.data()[node], g.wc_s.data()[node], c[0], c[1], c[2]};
    const Vec z1 = rk4_flow(F, z, tau, std::max(2, g.params.flow_substeps / 2));
    if (z1[3] < iax.lo || z1[3] > iax.hi) continue;  // left the I-window
    Vec cz{z1[2], z1[3], z1[4]};
    const double ru = std::fabs(z1[0] - g.wc_u.eval(cz));
    const double rs = std::fabs(z1[1] - g.wc_s.eval(cz));
    rep.invariance_residual = std::max(rep.invariance_residual, std::max(ru, rs));
  }
  return rep;
}

ContainmentReport containment_check(const HypChart& chart, const CylinderGraph& g,
                                    const InvariantSetSample& s, double grid_step,
                                    double kappa) {
  ContainmentReport rep;
  const int nc = (int)g.geo.center.size();
  if (nc != 3) throw ConfigError("containment check expects (Theta, I, t) center axes");
  const double se = std::sqrt(chart.eps());
  const AxisSpec& iax = g.geo.center[1];

  for (std::size_t i = 0; i < s.theta.size(); ++i) {
    const Vec& th = s.theta[i];
    const Vec& p = s.p[i];
    const double pf = p.back();
    double I = pf / se;
    I = std::clamp(I, iax.lo, iax.hi);
    Vec c{chart.gamma() * th.back(), I, 0.0};
    Vec z{g.wc_u.eval(c), g.wc_s.eval(c), c[0], c[1], c[2]};
    Vec thg, pg;
    double t;
    chart.from_hyp(z, thg, pg, t);
    const double dist =
        std::max(circ_dist(th[0], thg[0]), std::fabs(p[0] - pg[0]));
    rep.max_graph_dist = std::max(rep.max_graph_dist, dist / grid_step);
    const EVec pst = chart.p_star(pf);
    rep.wbox_ratio = std::max(rep.wbox_ratio, std::fabs(p[0] - pst[0]) / (kappa * se));
    ++rep.samples;
  }

  for (std::size_t i = 0; i < s.theta.size(); ++i) {
    for (std::size_t j = i + 1; j < s.theta.size(); ++j) {
      const double dthf = circ_dist(s.theta[i].back(), s.theta[j].back());
      if (dthf < 2.0 * grid_step) continue;
      double dp = 0.0;
      for (std::size_t k = 0; k < s.p[i].size(); ++k) {
        const double e = s.p[i][k] - s.p[j][k];
        dp += e * e;
      }
      rep.proj_lip = std::max(rep.proj_lip, std::sqrt(dp) / dthf);
    }
  }

  rep.pass = rep.samples > 0 && rep.max_graph_dist <= 3.0 && rep.wbox_ratio <= 1.0 &&
             rep.proj_lip <= 1.0;
  return rep;
}

}  // namespace kamlab
