#include "kamlab/normalform.hpp"

#include <algorithm>

namespace kamlab {

// ---------------------------------------------------------------------------
// Resonance frame

EVec ResonanceFrame::p_star(double pf) const {
  int n = H0.n(), ns = n - 1;
  // Solve the slow block: M_ss p^s + M_sf p^f = 0.
  EMat Mss = H0.M.topLeftCorner(ns, ns);
  EVec rhs = -H0.M.topRightCorner(ns, 1) * pf;
  EVec ps = Mss.ldlt().solve(rhs);
  EVec p(n);
  p.head(ns) = ps;
  p[n - 1] = pf;
  return p;
}

double ResonanceFrame::omega_f(double pf) const {
  EVec w = H0.grad(p_star(pf));
  return w[H0.n() - 1];
}

double ResonanceFrame::gamma_residual(double pf) const {
  EVec w = H0.grad(p_star(pf));
  return w.head(H0.n() - 1).norm();
}

// ---------------------------------------------------------------------------
// Punctures

PunctureSet compute_punctures(const ResonanceFrame& frame, int K, double s,
                              std::pair<double, double> pf_range) {
  if (K < 0 || s <= 0.0) throw KamError("compute_punctures: need K >= 0, s > 0");
  PunctureSet ps;
  ps.K = K;
  ps.s = s;
  ps.range = pf_range;

  // The fast frequency along Gamma is affine and strictly increasing.
  double w0 = frame.omega_f(0.0), w1 = frame.omega_f(1.0) - w0;
  if (w1 <= 0.0) throw GeometryError("fast frequency not increasing along the resonance");
  auto pf_of_omega = [&](double w) { return (w - w0) / w1; };

  std::vector<std::pair<double, double>> raw;
  double margin = 3.0 * K * s;
  for (int kf = -K; kf <= K; ++kf)
    for (int kt = -K; kt <= K; ++kt) {
      if (std::max(std::abs(kf), std::abs(kt)) == 0) continue;
      if (kf == 0) {
        if (std::abs((double)kt) < margin) raw.push_back(pf_range);  // everything excluded
        continue;
      }
      double wa = (-kt - margin) / kf, wb = (-kt + margin) / kf;
      if (wa > wb) std::swap(wa, wb);
      double a = pf_of_omega(wa), b = pf_of_omega(wb);
      if (b < pf_range.first || a > pf_range.second) continue;
      raw.push_back({std::max(a, pf_range.first), std::min(b, pf_range.second)});
      ps.centers_omega.push_back(-(double)kt / kf);
    }

  std::sort(raw.begin(), raw.end());
  for (auto& iv : raw) {
    if (!ps.excluded.empty() && iv.first <= ps.excluded.back().second)
      ps.excluded.back().second = std::max(ps.excluded.back().second, iv.second);
    else
      ps.excluded.push_back(iv);
  }
  double cursor = pf_range.first;
  for (auto& iv : ps.excluded) {
    if (iv.first > cursor) ps.arcs.push_back({cursor, iv.first});
    cursor = std::max(cursor, iv.second);
  }
  if (cursor < pf_range.second) ps.arcs.push_back({cursor, pf_range.second});
  std::sort(ps.centers_omega.begin(), ps.centers_omega.end());
  ps.centers_omega.erase(
      std::unique(ps.centers_omega.begin(), ps.centers_omega.end(),
                  [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
      ps.centers_omega.end());
  return ps;
}

// ---------------------------------------------------------------------------
// Averaged potential

namespace {

// Local maxima of the slow potential theta -> Z(theta, p) (1-D slow angle).
struct SlowMax {
  double theta, value, curvature;
};

std::vector<SlowMax> slow_maxima(const TrigPoly& Z, const TrigPoly& dZ, const TrigPoly& d2Z,
                                 const EVec& p, int scan = 2048) {
  int m = Z.dim_angle();
  std::vector<double> phi(m, 0.0), pv = to_vec(p);
  auto f = [&](double th) {
    phi[0] = th;
    return Z.eval(phi, pv);
  };
  auto f2 = [&](double th) {
    phi[0] = th;
    return d2Z.eval(phi, pv);
  };
  auto f1 = [&](double th) {
    phi[0] = th;
    return dZ.eval(phi, pv);
  };
  std::vector<SlowMax> out;
  std::vector<double> vals(scan);
  for (int i = 0; i < scan; ++i) vals[i] = f((double)i / scan);
  for (int i = 0; i < scan; ++i) {
    double prev = vals[(i + scan - 1) % scan], next = vals[(i + 1) % scan];
    if (!(vals[i] >= prev && vals[i] > next)) continue;
    // Newton polish on dZ = 0.
    double th = (double)i / scan;
    for (int it = 0; it < 60; ++it) {
      double g = f1(th), h = f2(th);
      if (std::fabs(h) < 1e-14) break;
      double step = g / h;
      th = wrap01(th - step);
      if (std::fabs(step) < 1e-14) break;
    }
    if (std::fabs(f1(th)) > 1e-8) continue;
    double curv = -f2(th);
    if (curv <= 0.0) continue;
    bool dup = false;
    for (auto& mx : out)
      if (circ_dist(mx.theta, th) < 1e-6) dup = true;
    if (!dup) out.push_back({th, f(th), curv});
  }
  std::sort(out.begin(), out.end(),
            [](const SlowMax& a, const SlowMax& b) { return a.value > b.value; });
  return out;
}

}  // namespace

AveragedPotential average_perturbation(const TrigPoly& H1, const ResonanceFrame& frame,
                                       std::pair<double, double> pf_window,
                                       double lambda_min, int pf_samples) {
  int n = frame.n(), m = H1.dim_angle();
  if (m != n + 1) throw KamError("average_perturbation: angle layout mismatch");
  AveragedPotential ap;
  ap.Z = H1.average_over({n - 1, n});  // kill fast-angle and time modes

  TrigPoly dZ = ap.Z.deriv_angle(0);
  TrigPoly d2Z = dZ.deriv_angle(0);

  auto pfs = linspace(pf_window.first, pf_window.second, pf_samples);
  // Track maxima branches by slow-angle continuity.
  for (double pf : pfs) {
    EVec p = frame.p_star(pf);
    auto maxima = slow_maxima(ap.Z, dZ, d2Z, p);
    for (auto& mx : maxima) {
      MaximizerBranch* target = nullptr;
      for (auto& br : ap.branches)
        if (!br.pf.empty() && br.pf.back() < pf &&
            circ_dist(br.theta.back(), mx.theta) < 0.08)
          target = &br;
      if (!target) {
        ap.branches.emplace_back();
        target = &ap.branches.back();
      }
      target->pf.push_back(pf);
      target->theta.push_back(mx.theta);
      target->value.push_back(mx.value);
      target->curvature.push_back(mx.curvature);
    }
  }
  // Keep branches that exist across (essentially) the whole window.
  std::vector<MaximizerBranch> full;
  for (auto& br : ap.branches)
    if (br.pf.size() >= (size_t)(0.9 * pf_samples)) full.push_back(br);
  ap.branches = full;
  std::sort(ap.branches.begin(), ap.branches.end(),
            [](const MaximizerBranch& a, const MaximizerBranch& b) {
              double ma = 0, mb = 0;
              for (double v : a.value) ma += v;
              for (double v : b.value) mb += v;
              return ma / a.value.size() > mb / b.value.size();
            });

  if (ap.branches.empty()) {
    ap.degenerate = true;
    return ap;
  }
  double lam = 1e100;
  for (double c : ap.branches[0].curvature) lam = std::min(lam, c);
  ap.lambda = lam;
  ap.degenerate = lam < lambda_min;

  if (ap.branches.size() >= 2) {
    auto& b0 = ap.branches[0];
    auto& b1 = ap.branches[1];
    double lam2 = 1e100;
    for (double c : b1.curvature) lam2 = std::min(lam2, c);
    if (lam2 >= lambda_min) {
      ap.double_peak = true;
      // Value-tie crossings between the top branches (bifurcation candidates).
      size_t nn = std::min(b0.pf.size(), b1.pf.size());
      for (size_t i = 0; i + 1 < nn; ++i) {
        double d0 = b0.value[i] - b1.value[i], d1 = b0.value[i + 1] - b1.value[i + 1];
        if (d0 == 0.0) ap.bifurcation_pf.push_back(b0.pf[i]);
        if (d0 * d1 < 0.0) {
          double t = d0 / (d0 - d1);
          ap.bifurcation_pf.push_back(b0.pf[i] + t * (b0.pf[i + 1] - b0.pf[i]));
        }
      }
    }
  }
  return ap;
}

double AveragedPotential::theta_star(double pf, int branch) const {
  const MaximizerBranch& br = branches.at(branch);
  if (pf <= br.pf.front()) return br.theta.front();
  if (pf >= br.pf.back()) return br.theta.back();
  auto it = std::upper_bound(br.pf.begin(), br.pf.end(), pf);
  size_t i = it - br.pf.begin();
  double t = (pf - br.pf[i - 1]) / (br.pf[i] - br.pf[i - 1]);
  // Interpolate on the circle.
  double d = circ_diff(br.theta[i], br.theta[i - 1]);
  return wrap01(br.theta[i - 1] + t * d);
}

// ---------------------------------------------------------------------------
// Mode profiles / TrigGrid

cplx ModeProfile::profile(double x) const {
  if (kind == CUTOFF_RHO) return cplx(mollifier_val(x), 0.0);
  int N = (int)table_re.size();
  double s = (x - xlo) / (xhi - xlo) * (N - 1);
  int i = (int)std::floor(s);
  i = std::max(1, std::min(N - 3, i));
  double u = s - i;
  double u2 = u * u, u3 = u2 * u;
  double w0 = 0.5 * (-u3 + 2 * u2 - u), w1 = 0.5 * (3 * u3 - 5 * u2 + 2);
  double w2 = 0.5 * (-3 * u3 + 4 * u2 + u), w3 = 0.5 * (u3 - u2);
  return cplx(w0 * table_re[i - 1] + w1 * table_re[i] + w2 * table_re[i + 1] +
                  w3 * table_re[i + 2],
              w0 * table_im[i - 1] + w1 * table_im[i] + w2 * table_im[i + 1] +
                  w3 * table_im[i + 2]);
}

cplx ModeProfile::profile_deriv(double x) const {
  if (kind == CUTOFF_RHO) return cplx(mollifier_deriv(x), 0.0);
  int N = (int)table_re.size();
  double s = (x - xlo) / (xhi - xlo) * (N - 1);
  int i = (int)std::floor(s);
  i = std::max(1, std::min(N - 3, i));
  double u = s - i;
  double u2 = u * u;
  double w0 = 0.5 * (-3 * u2 + 4 * u - 1), w1 = 0.5 * (9 * u2 - 10 * u);
  double w2 = 0.5 * (-9 * u2 + 8 * u + 1), w3 = 0.5 * (3 * u2 - 2 * u);
  double scale = (N - 1) / (xhi - xlo);
  return cplx(w0 * table_re[i - 1] + w1 * table_re[i] + w2 * table_re[i + 1] +
                  w3 * table_re[i + 2],
              w0 * table_im[i - 1] + w1 * table_im[i] + w2 * table_im[i + 1] +
                  w3 * table_im[i + 2]) *
         scale;
}

double TrigGrid::value(const double* phi, const double* p) const {
  double acc = 0.0;
  std::vector<double> pv(p, p + pdim);
  for (auto& mode : modes) {
    double phase = 0.0;
    for (int i = 0; i < m; ++i) phase += mode.k[i] * phi[i];
    double x = mode.b;
    for (int j = 0; j < pdim; ++j) x += mode.a[j] * p[j];
    cplx c = mode.h.eval(pv) * mode.profile(x);
    acc += (c * std::polar(1.0, TWO_PI * phase)).real();
  }
  return acc;
}

double TrigGrid::value_v(const Vec& phi, const Vec& p) const {
  return value(phi.data(), p.data());
}

void TrigGrid::eval_all(const double* phi, const double* p, double& val, double* dphi,
                        double* dp) const {
  val = 0.0;
  for (int i = 0; i < m; ++i) dphi[i] = 0.0;
  for (int j = 0; j < pdim; ++j) dp[j] = 0.0;
  std::vector<double> pv(p, p + pdim);
  for (auto& mode : modes) {
    double phase = 0.0;
    for (int i = 0; i < m; ++i) phase += mode.k[i] * phi[i];
    double x = mode.b;
    for (int j = 0; j < pdim; ++j) x += mode.a[j] * p[j];
    cplx prof = mode.profile(x);
    cplx dprof = mode.profile_deriv(x);
    cplx hv = mode.h.eval(pv);
    cplx e = std::polar(1.0, TWO_PI * phase);
    cplx c = hv * prof;
    val += (c * e).real();
    for (int i = 0; i < m; ++i) {
      if (mode.k[i] == 0) continue;
      dphi[i] += (c * e * cplx(0.0, TWO_PI * mode.k[i])).real();
    }
    for (int j = 0; j < pdim; ++j) {
      cplx dh = mode.hd[j].eval(pv);
      cplx dc = dh * prof + hv * dprof * mode.a[j];
      dp[j] += (dc * e).real();
    }
  }
}

void TrigGrid::finalize() {
  for (auto& mode : modes) {
    mode.hd.clear();
    for (int j = 0; j < pdim; ++j) mode.hd.push_back(mode.h.derivative(j));
  }
}

// ---------------------------------------------------------------------------
// Cohomological solve

CohomologicalResult solve_cohomological(const ConvexIntegrable& H0, const TrigPoly& H1,
                                        int K, double beta, double eps, const PBox& pbox,
                                        int profile_samples) {
  if (beta <= 0.0 || eps <= 0.0) throw KamError("solve_cohomological: beta, eps > 0");
  CohomologicalResult res;
  res.beta = beta;
  res.eps = eps;
  res.cutoff_scale = beta * std::pow(eps, 0.25);
  auto [head, tail] = tail_truncate(H1, K);
  res.head = head;
  res.tail = tail;

  int n = H0.n(), m = H1.dim_angle();
  auto G = std::make_shared<TrigGrid>();
  auto R1 = std::make_shared<TrigGrid>();
  G->m = R1->m = m;
  G->pdim = R1->pdim = n;

  double scale0 = res.cutoff_scale;
  for (auto& [k, h] : head.terms()) {
    double kb = bracket_norm(k);
    double denom_scale = scale0 * kb;  // k.omega = x * denom_scale
    // x(p) = (M^T k_theta . p + k_t) / denom_scale
    EVec ktheta(n);
    for (int i = 0; i < n; ++i) ktheta[i] = k[i];
    EVec a = (H0.M.transpose() * ktheta) / denom_scale;
    double b = (m == n + 1 ? k[m - 1] : 0.0) / denom_scale;

    // A mode with no fast-angle and no time dependence is resonant for the
    // whole slow block: averaging along the fast flow leaves it untouched at
    // every momentum, so it is kept in the residual unconditionally instead
    // of being solved with a 1/(k.omega) profile that would inject large
    // momentum derivatives near the edge of its cutoff plateau.
    bool pure_slow = true;
    for (int i = n - 1; i < m; ++i)
      if (k[i] != 0) pure_slow = false;

    ModeProfile r1;
    r1.k = k;
    r1.h = h;
    r1.a = a;
    r1.b = b;
    r1.kind = ModeProfile::CUTOFF_RHO;
    if (pure_slow) {
      // x(p) identically 0: the plateau value rho(0) = 1 applies everywhere.
      r1.a.setZero();
      r1.b = 0.0;
      R1->modes.push_back(r1);
      continue;
    }

    // Range of the affine x over the momentum box (corners suffice).
    double xmin = 1e300, xmax = -1e300;
    for (int corner = 0; corner < (1 << n); ++corner) {
      double x = b;
      for (int j = 0; j < n; ++j)
        x += a[j] * ((corner >> j) & 1 ? pbox.hi[j] : pbox.lo[j]);
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
    bool rho_always_zero = xmin > 2.0 || xmax < -2.0;
    bool rho_always_one = xmin >= -1.0 && xmax <= 1.0;
    if (!rho_always_zero) R1->modes.push_back(r1);

    if (!rho_always_one) {
      ModeProfile g = r1;
      g.kind = ModeProfile::SOLVED_TABLE;
      double pad = 0.5 * (xmax - xmin) * 1e-2 + 1e-6;
      g.xlo = xmin - pad;
      g.xhi = xmax + pad;
      int N = profile_samples;
      g.table_re.resize(N);
      g.table_im.resize(N);
      for (int i = 0; i < N; ++i) {
        double x = g.xlo + (g.xhi - g.xlo) * i / (N - 1);
        double cut = 1.0 - mollifier_val(x);
        cplx S = 0.0;
        if (cut != 0.0) {
          double komega = x * denom_scale;
          if (std::fabs(komega) < 1e-14)
            throw KamError("cohomological solve: cutoff plateau failed to cover a zero divisor");
          // G_k = (1 - rho) h_k / (2 pi i k.omega); the h_k factor is kept
          // symbolic, the rest is this profile. With this sign the time-1
          // generator flow turns H0 + eps H1 into H0 + eps R1 + O(eps^2).
          S = cplx(0.0, -cut / (TWO_PI * komega));
        }
        g.table_re[i] = S.real();
        g.table_im[i] = S.imag();
      }
      G->modes.push_back(std::move(g));
    }
  }
  G->finalize();
  R1->finalize();
  res.G = G;
  res.R1 = R1;
  return res;
}

// ---------------------------------------------------------------------------
// Generator flow

void GeneratorFlow::map(const Vec& th, const Vec& p, double t, int direction, Vec& th_out,
                        Vec& p_out, double& eshift) const {
  int n = (int)th.size(), m = G->m;
  // State: (theta, p, e-shift accumulator).
  std::vector<double> state(2 * n + 1);
  for (int i = 0; i < n; ++i) state[i] = th[i];
  for (int i = 0; i < n; ++i) state[n + i] = p[i];
  state[2 * n] = 0.0;

  double sgn = direction >= 0 ? 1.0 : -1.0;
  auto field = [&](const std::vector<double>& s, std::vector<double>& ds) {
    double phi[4];
    for (int i = 0; i < n; ++i) phi[i] = s[i];
    phi[n] = t;  // time is frozen along the generator flow
    double val, dphi[4], dp[2];
    G->eval_all(phi, s.data() + n, val, dphi, dp);
    for (int i = 0; i < n; ++i) ds[i] = sgn * eps * dp[i];
    for (int i = 0; i < n; ++i) ds[n + i] = -sgn * eps * dphi[i];
    ds[2 * n] = (m == n + 1) ? -sgn * eps * dphi[n] : 0.0;
  };

  int nsteps = std::max(4, (int)std::ceil(1.0 / step));
  double h = 1.0 / nsteps;
  std::vector<double> k1(2 * n + 1), k2(k1), k3(k1), k4(k1), tmp(k1);
  for (int sidx = 0; sidx < nsteps; ++sidx) {
    field(state, k1);
    for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = state[i] + 0.5 * h * k1[i];
    field(tmp, k2);
    for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = state[i] + 0.5 * h * k2[i];
    field(tmp, k3);
    for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = state[i] + h * k3[i];
    field(tmp, k4);
    for (size_t i = 0; i < tmp.size(); ++i)
      state[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  th_out.assign(state.begin(), state.begin() + n);
  p_out.assign(state.begin() + n, state.begin() + 2 * n);
  eshift = state[2 * n];
}

// ---------------------------------------------------------------------------
// Full normal form build

namespace {

// Sup over a tensor grid of all finite-difference partials of order <= 2
// (4th-order central stencils). Axes: sizes, spacings, periodic flags. Box
// axes are measured on nodes at least 2 steps from the edges.
struct TensorField {
  std::vector<int> dims;
  std::vector<double> spacing;
  std::vector<bool> periodic;
  std::vector<double> data;
  std::vector<std::size_t> strides;

  void init() {
    strides.assign(dims.size(), 1);
    std::size_t acc = 1;
    for (int i = (int)dims.size() - 1; i >= 0; --i) {
      strides[i] = acc;
      acc *= dims[i];
    }
    data.assign(acc, 0.0);
  }
  std::size_t size() const { return data.size(); }
  double get(std::vector<int> idx) const {
    std::size_t flat = 0;
    for (size_t i = 0; i < dims.size(); ++i) {
      int j = idx[i];
      if (periodic[i]) {
        j %= dims[i];
        if (j < 0) j += dims[i];
      }
      flat += strides[i] * j;
    }
    return data[flat];
  }

  // Apply the 4th-order first-derivative stencil along an axis at idx.
  double d1(const std::vector<int>& idx, int ax) const {
    auto at = [&](int off) {
      std::vector<int> j = idx;
      j[ax] += off;
      return get(j);
    };
    return (8 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12 * spacing[ax]);
  }
  double d2(const std::vector<int>& idx, int ax) const {
    auto at = [&](int off) {
      std::vector<int> j = idx;
      j[ax] += off;
      return get(j);
    };
    return (-at(2) + 16 * at(1) - 30 * at(0) + 16 * at(-1) - at(-2)) /
           (12 * spacing[ax] * spacing[ax]);
  }
  double d11(const std::vector<int>& idx, int ax1, int ax2) const {
    auto at = [&](int off) {
      std::vector<int> j = idx;
      j[ax1] += off;
      return d1_at(j, ax2);
    };
    return (8 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12 * spacing[ax1]);
  }
  double d1_at(const std::vector<int>& idx, int ax) const { return d1(idx, ax); }

  bool interior(const std::vector<int>& idx, int pad) const {
    for (size_t i = 0; i < dims.size(); ++i)
      if (!periodic[i] && (idx[i] < pad || idx[i] >= dims[i] - pad)) return false;
    return true;
  }

  // C0 and C2 sups (value; all first and second partials).
  void measure(double& c0, double& c2) const {
    c0 = 0.0;
    c2 = 0.0;
    int nd = (int)dims.size();
    std::vector<int> idx(nd, 0);
    std::size_t total = size();
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      for (int i = 0; i < nd; ++i) {
        idx[i] = (int)(rem / strides[i]);
        rem %= strides[i];
      }
      double v = std::fabs(data[flat]);
      c0 = std::max(c0, v);
      if (!interior(idx, 4)) continue;
      double worst = v;
      for (int a = 0; a < nd; ++a) {
        worst = std::max(worst, std::fabs(d1(idx, a)));
        worst = std::max(worst, std::fabs(d2(idx, a)));
        for (int b = a + 1; b < nd; ++b) worst = std::max(worst, std::fabs(d11(idx, a, b)));
      }
      c2 = std::max(c2, worst);
    }
  }
};

}  // namespace

NormalFormResult build_normal_form(const ConvexIntegrable& H0, const TrigPoly& H1,
                                   const NormalFormParams& params,
                                   std::pair<double, double> arc) {
  NormalFormResult out;
  out.params = params;
  out.arc = arc;
  int n = H0.n(), m = H1.dim_angle();
  if (m != n + 1) throw KamError("build_normal_form: H1 must carry n+1 angles");

  ResonanceFrame frame(H0);
  double s = params.beta * std::pow(params.eps, 0.25);

  // Momentum window: the tube |omega^s| <= s around the arc (for H0 = p^T M p
  // with dominant identity block this is |p^s| <= ~s).
  PBox pbox;
  pbox.lo.resize(n);
  pbox.hi.resize(n);
  double Mss_min = H0.M.topLeftCorner(n - 1, n - 1).diagonal().minCoeff();
  double ps_half = s / std::max(1.0, Mss_min);
  for (int i = 0; i + 1 < n; ++i) {
    pbox.lo[i] = -ps_half;
    pbox.hi[i] = ps_half;
  }
  pbox.lo[n - 1] = arc.first - 0.05;
  pbox.hi[n - 1] = arc.second + 0.05;
  out.pbox = pbox;

  out.Z = average_perturbation(H1, frame, arc, params.lambda_min);
  if (out.Z.degenerate && out.Z.branches.empty())
    throw GeometryError("build_normal_form: averaged potential has no nondegenerate maximum");

  // Solve over a box enlarged enough that profile tables cover every
  // evaluation the measurement below will perform.
  PBox solve_box = pbox;
  for (int i = 0; i < n; ++i) {
    double w = pbox.hi[i] - pbox.lo[i];
    solve_box.lo[i] -= 0.5 * w + 0.05;
    solve_box.hi[i] += 0.5 * w + 0.05;
  }
  out.coh = solve_cohomological(H0, H1, params.K, params.beta, params.eps, solve_box);

  GeneratorFlow flow{out.coh.G, params.eps, params.flow_step};

  TrigPoly Zslow = out.Z.Z;
  CompiledTrig Zc(Zslow), H1c(H1);

  // Conjugated-system sample: (H_eps(Phi(x)) + eshift - H0 - eps Z)/eps.
  auto Rval = [&](const Vec& th, const Vec& p, double t) {
    Vec th2, p2;
    double eshift;
    flow.map(th, p, t, +1, th2, p2, eshift);
    double phi2[4];
    for (int i = 0; i < n; ++i) phi2[i] = th2[i];
    phi2[n] = t;
    EVec pe2 = to_evec(p2);
    double hval = H0.value(pe2) + params.eps * H1c.value(phi2, p2.data());
    double phi1[4];
    for (int i = 0; i < n; ++i) phi1[i] = th[i];
    phi1[n] = t;
    double zval = Zc.value(phi1, p.data());
    return (hval + eshift - H0.value(to_evec(p)) - params.eps * zval) / params.eps;
  };

  // --- Residual measurement grid.
  {
    TensorField tf;
    int na = params.res_angle_samples, np = params.res_p_samples;
    for (int i = 0; i < n + 1; ++i) {
      tf.dims.push_back(na);
      tf.spacing.push_back(1.0 / na);
      tf.periodic.push_back(true);
    }
    for (int j = 0; j < n; ++j) {
      tf.dims.push_back(np);
      tf.spacing.push_back((pbox.hi[j] - pbox.lo[j]) / (np - 1));
      tf.periodic.push_back(false);
    }
    tf.init();
    int nd = (int)tf.dims.size();
    parallel_for(tf.size(), [&](std::size_t flat) {
      std::size_t rem = flat;
      std::vector<int> idx(nd);
      for (int i = 0; i < nd; ++i) {
        idx[i] = (int)(rem / tf.strides[i]);
        rem %= tf.strides[i];
      }
      Vec th(n), p(n);
      for (int i = 0; i < n; ++i) th[i] = (double)idx[i] / tf.dims[i];
      double t = (double)idx[n] / tf.dims[n];
      for (int j = 0; j < n; ++j)
        p[j] = pbox.lo[j] + tf.spacing[n + 1 + j] * idx[n + 1 + j];
      tf.data[flat] = Rval(th, p, t);
    });
    tf.measure(out.R_C0, out.R_C2);
  }

  // --- Displacement norms of Phi - id (one flow per node, all components).
  {
    int na = std::max(8, params.res_angle_samples - 2), np = params.res_p_samples;
    std::vector<TensorField> comps(2 * n);
    for (auto& tf : comps) {
      for (int i = 0; i < n + 1; ++i) {
        tf.dims.push_back(na);
        tf.spacing.push_back(1.0 / na);
        tf.periodic.push_back(true);
      }
      for (int j = 0; j < n; ++j) {
        tf.dims.push_back(np);
        tf.spacing.push_back((pbox.hi[j] - pbox.lo[j]) / (np - 1));
        tf.periodic.push_back(false);
      }
      tf.init();
    }
    TensorField& ref = comps[0];
    int nd = (int)ref.dims.size();
    parallel_for(ref.size(), [&](std::size_t flat) {
      std::size_t rem = flat;
      std::vector<int> idx(nd);
      for (int i = 0; i < nd; ++i) {
        idx[i] = (int)(rem / ref.strides[i]);
        rem %= ref.strides[i];
      }
      Vec th(n), p(n);
      for (int i = 0; i < n; ++i) th[i] = (double)idx[i] / ref.dims[i];
      double t = (double)idx[n] / ref.dims[n];
      for (int j = 0; j < n; ++j)
        p[j] = pbox.lo[j] + ref.spacing[n + 1 + j] * idx[n + 1 + j];
      Vec th2, p2;
      double eshift;
      flow.map(th, p, t, +1, th2, p2, eshift);
      for (int c = 0; c < n; ++c) comps[c].data[flat] = th2[c] - th[c];
      for (int c = 0; c < n; ++c) comps[n + c].data[flat] = p2[c] - p[c];
    });
    out.Phi_C0 = 0.0;
    out.Phi_C2 = 0.0;
    for (auto& tf : comps) {
      double c0, c2;
      tf.measure(c0, c2);
      out.Phi_C0 = std::max(out.Phi_C0, c0);
      out.Phi_C2 = std::max(out.Phi_C2, c2);
    }
  }

  // --- Second-order residual fit at the arc center on Gamma.
  {
    double pfc = 0.5 * (arc.first + arc.second);
    EVec pc = frame.p_star(pfc);
    Vec pcv = to_vec(pc);
    int ng = 8;
    GridFunction samples = GridFunction::sample(
        std::vector<int>(n + 1, ng), [&](const std::vector<double>& x) {
          Vec th(x.begin(), x.begin() + n);
          double t = x[n];
          double phi[4];
          for (int i = 0; i < n; ++i) phi[i] = th[i];
          phi[n] = t;
          double r1 = out.coh.R1->value(phi, pcv.data());
          double z = Zc.value(phi, pcv.data());
          return Rval(th, pcv, t) - (r1 - z);
        });
    TrigPoly fit = dft_trig(samples, n, 1e-12);
    auto [head2, tail2] = tail_truncate(fit, params.r2_fit_kmax);
    out.R2fit = head2;
    CompiledTrig fitc(out.R2fit);
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto x = samples.node(i);
      double phi[4];
      for (int j = 0; j < n + 1; ++j) phi[j] = x[j];
      worst = std::max(worst, std::fabs(samples.data()[i] - fitc.value(phi, pcv.data())));
    }
    out.r2_fit_error = worst;
  }

  out.certified = out.R_C2 <= params.delta && out.Phi_C0 <= std::sqrt(params.eps) &&
                  out.Phi_C2 <= params.delta;

  out.model = std::make_shared<CompositeHam>(H0);
  out.model->add_grid(params.eps, out.coh.R1);
  if (!out.R2fit.empty()) out.model->add_trig(params.eps, out.R2fit);
  out.raw = std::make_shared<CompositeHam>(H0);
  out.raw->add_trig(params.eps, H1);
  return out;
}

}  // namespace kamlab
