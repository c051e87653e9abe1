#include "kamlab/hamiltonian.hpp"

#include <Eigen/Eigenvalues>

#include "kamlab/normalform.hpp"

namespace kamlab {

double ConvexIntegrable::D() const {
  Eigen::SelfAdjointEigenSolver<EMat> es(M);
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0) throw GeometryError("H0 is not strictly convex");
  return std::max(hi, 1.0 / lo);
}

std::vector<PolyP> ConvexIntegrable::grad_polys() const {
  std::vector<PolyP> g;
  int nn = n();
  for (int i = 0; i < nn; ++i) {
    PolyP row(nn);
    for (int j = 0; j < nn; ++j)
      if (M(i, j) != 0.0) row = row + PolyP::var(nn, j, M(i, j));
    g.push_back(row);
  }
  return g;
}

CompiledTrig::CompiledTrig(const TrigPoly& g) : m_(g.dim_angle()), pdim_(g.pdim()) {
  if (m_ > 4 || pdim_ > 2) throw KamError("CompiledTrig supports up to 4 angles, 2 momenta");
  auto neg = [](const std::vector<int>& k) {
    std::vector<int> r(k.size());
    for (size_t i = 0; i < k.size(); ++i) r[i] = -k[i];
    return r;
  };
  auto positive_rep = [](const std::vector<int>& k) {
    for (int v : k) {
      if (v > 0) return true;
      if (v < 0) return false;
    }
    return true;  // zero vector
  };
  for (auto& [k, h] : g.terms()) {
    bool zero = bracket_norm(k) == 1 && k == std::vector<int>(k.size(), 0);
    double weight = 1.0;
    if (!zero) {
      const PolyP* conj_mode = g.mode(neg(k));
      if (conj_mode && *conj_mode == h.conj()) {
        if (!positive_rep(k)) continue;  // folded into the representative
        weight = 2.0;
      }
    }
    Mode mode;
    for (int i = 0; i < 4; ++i) mode.k[i] = i < m_ ? k[i] : 0;
    mode.weight = weight;
    for (auto& [mi, c] : h.terms()) {
      Mode::Mono mono;
      for (int j = 0; j < 2; ++j) mono.e[j] = j < pdim_ ? mi[j] : 0;
      mono.re = c.real();
      mono.im = c.imag();
      mode.poly.push_back(mono);
    }
    modes_.push_back(std::move(mode));
  }
}

double CompiledTrig::value(const double* phi, const double* p) const {
  double acc = 0.0;
  for (auto& mode : modes_) {
    double phase = 0.0;
    for (int i = 0; i < m_; ++i) phase += mode.k[i] * phi[i];
    phase *= TWO_PI;
    double cs = std::cos(phase), sn = std::sin(phase);
    double cre = 0.0, cim = 0.0;
    for (auto& mono : mode.poly) {
      double v = 1.0;
      for (int j = 0; j < pdim_; ++j)
        for (int e = 0; e < mono.e[j]; ++e) v *= p[j];
      cre += mono.re * v;
      cim += mono.im * v;
    }
    acc += mode.weight * (cre * cs - cim * sn);
  }
  return acc;
}

void CompiledTrig::eval_all(const double* phi, const double* p, double& val, double* dphi,
                            double* dp) const {
  val = 0.0;
  for (int i = 0; i < m_; ++i) dphi[i] = 0.0;
  for (int j = 0; j < pdim_; ++j) dp[j] = 0.0;
  for (auto& mode : modes_) {
    double phase = 0.0;
    for (int i = 0; i < m_; ++i) phase += mode.k[i] * phi[i];
    phase *= TWO_PI;
    double cs = std::cos(phase), sn = std::sin(phase);
    double cre = 0.0, cim = 0.0, dre[2] = {0, 0}, dim_[2] = {0, 0};
    for (auto& mono : mode.poly) {
      double v = 1.0;
      for (int j = 0; j < pdim_; ++j)
        for (int e = 0; e < mono.e[j]; ++e) v *= p[j];
      cre += mono.re * v;
      cim += mono.im * v;
      for (int j = 0; j < pdim_; ++j) {
        if (mono.e[j] == 0) continue;
        double dv = mono.e[j];
        for (int jj = 0; jj < pdim_; ++jj) {
          int e = mono.e[jj] - (jj == j ? 1 : 0);
          for (int q = 0; q < e; ++q) dv *= p[jj];
        }
        dre[j] += mono.re * dv;
        dim_[j] += mono.im * dv;
      }
    }
    double w = mode.weight;
    val += w * (cre * cs - cim * sn);
    for (int i = 0; i < m_; ++i) {
      if (mode.k[i] == 0) continue;
      // d/dphi_i of Re(c e^{i phase}) = -2 pi k_i (cre sn + cim cs)
      dphi[i] += -w * TWO_PI * mode.k[i] * (cre * sn + cim * cs);
    }
    for (int j = 0; j < pdim_; ++j) dp[j] += w * (dre[j] * cs - dim_[j] * sn);
  }
}

double mollifier_val(double x) {
  static const Mollifier rho;
  return rho(x);
}

double mollifier_deriv(double x) {
  double a = std::fabs(x);
  if (a <= 1.0 || a >= 2.0) return 0.0;
  auto q = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  auto dq = [&](double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; };
  double qa = q(2.0 - a), qb = q(a - 1.0);
  double dqa = -dq(2.0 - a), dqb = dq(a - 1.0);  // d/da
  double denom = (qa + qb) * (qa + qb);
  double drho_da = (dqa * qb - qa * dqb) / denom;
  return drho_da * (x >= 0.0 ? 1.0 : -1.0);
}

double AngleBump::value(const Vec& theta) const {
  double d = circ_dist(theta[axis], center);
  if (d <= inner) return amp;
  if (d >= outer) return 0.0;
  double x = 1.0 + (d - inner) / (outer - inner);
  return amp * mollifier_val(x);
}

double AngleBump::deriv(const Vec& theta) const {
  double diff = circ_diff(theta[axis], center);
  double d = std::fabs(diff);
  if (d <= inner || d >= outer) return 0.0;
  double x = 1.0 + (d - inner) / (outer - inner);
  double dd = mollifier_deriv(x) / (outer - inner);
  return amp * dd * (diff >= 0.0 ? 1.0 : -1.0);
}

EMat Ham::hess_p(const Vec& th, const Vec& p, double t) const {
  int nn = n();
  EMat H(nn, nn);
  const double h = 1e-5;
  Vec dth(nn), dpa(nn), dpb(nn);
  for (int j = 0; j < nn; ++j) {
    Vec pa = p, pb = p;
    pa[j] += h;
    pb[j] -= h;
    grad(th, pa, t, dth, dpa);
    grad(th, pb, t, dth, dpb);
    for (int i = 0; i < nn; ++i) H(i, j) = (dpa[i] - dpb[i]) / (2 * h);
  }
  return 0.5 * (H + H.transpose());
}

double CompositeHam::value(const Vec& th, const Vec& p, double t) const {
  int nn = n();
  double phi[4];
  for (int i = 0; i < nn; ++i) phi[i] = th[i];
  phi[nn] = t;
  EVec pe = to_evec(p);
  double acc = H0.value(pe);
  for (auto& term : trig_terms) acc += term.weight * term.g.value(phi, p.data());
  for (auto& term : grid_terms) acc += term.weight * term.g->value(phi, p.data());
  for (auto& term : bump_terms) acc += term.weight * term.b.value(th);
  return acc;
}

void CompositeHam::grad(const Vec& th, const Vec& p, double t, Vec& dth, Vec& dp) const {
  int nn = n();
  double phi[4];
  for (int i = 0; i < nn; ++i) phi[i] = th[i];
  phi[nn] = t;
  dth.assign(nn, 0.0);
  EVec g0 = H0.grad(to_evec(p));
  dp.resize(nn);
  for (int i = 0; i < nn; ++i) dp[i] = g0[i];
  double val, dphi[4], dpp[2];
  for (auto& term : trig_terms) {
    term.g.eval_all(phi, p.data(), val, dphi, dpp);
    for (int i = 0; i < nn; ++i) dth[i] += term.weight * dphi[i];
    for (int j = 0; j < nn; ++j) dp[j] += term.weight * dpp[j];
  }
  for (auto& term : grid_terms) {
    term.g->eval_all(phi, p.data(), val, dphi, dpp);
    for (int i = 0; i < nn; ++i) dth[i] += term.weight * dphi[i];
    for (int j = 0; j < nn; ++j) dp[j] += term.weight * dpp[j];
  }
  for (auto& term : bump_terms)
    dth[term.b.axis] += term.weight * term.b.deriv(th);
}

EMat CompositeHam::hess_p(const Vec& th, const Vec& p, double t) const {
  if (trig_terms.empty() && grid_terms.empty()) return H0.M;
  return Ham::hess_p(th, p, t);
}

}  // namespace kamlab
