#pragma once
// Time-1 dynamics and the variational layer: Legendre transform, symplectic
// flow, one-step generating functions, multi-step minimal action over broken
// paths, localized generating-function perturbations, and the two-fold cover.

#include "kamlab/hamiltonian.hpp"

#include <functional>

namespace kamlab {

// Legendre transform of a Hamiltonian convex in p. The inverse map v -> p is
// a Newton iteration preconditioned by a fixed reference mass matrix, so each
// step costs one gradient evaluation.
class LagrangianEval {
 public:
  explicit LagrangianEval(const Ham& N);

  int n() const { return N_->n(); }
  const Ham& ham() const { return *N_; }

  // v = dN/dp at (th, p, t).
  Vec velocity(const Vec& th, const Vec& p, double t) const;
  // Solve dN/dp = v for p; warm start optional.
  Vec momentum(const Vec& th, const Vec& v, double t, const Vec* warm = nullptr) const;
  // L(th, v, t) = p.v - N(th, p, t); optionally returns p and dL/dth
  // (envelope: dL/dth = -dN/dth at the maximizing p).
  double value(const Vec& th, const Vec& v, double t, Vec* p_out = nullptr,
               Vec* dth_out = nullptr) const;
  // d2L/dv2 = (d2N/dp2)^{-1} at the maximizing p.
  EMat hess_v(const Vec& th, const Vec& v, double t) const;

  const EMat& mass() const { return M_; }

 private:
  const Ham* N_;
  EMat M_;
  Eigen::LDLT<EMat> msolve_;
};

// RK4 integration of the Hamiltonian field from t0 to t1.
void flow_steps(const Ham& N, Vec& th, Vec& p, double t0, double t1, int nsteps);
// Time-1 map.
inline void flow_time1(const Ham& N, Vec& th, Vec& p, double t0, int nsteps = 50) {
  flow_steps(N, th, p, t0, t0 + 1.0, nsteps);
}

struct MinPath {
  double value = 0.0;
  std::vector<Vec> nodes;  // M*S + 1 lifted points
  double grad_norm = 0.0;
  bool stationary = false;
  Vec p_start, p_end;  // discrete conjugate momenta at the ends
};

// Minimize sum_j h [L(midpoint_j, v_j, t_j) - c.v_j] + M*alpha over the
// interior nodes with both endpoints fixed (lifts in R^n), h = 1/S.
MinPath minimize_path(const LagrangianEval& L, const Vec& c, double alpha, const Vec& x0,
                      const Vec& x1, int M, int S, double t0 = 0.0);

// Same, with a multistart over integer shifts of the endpoint lift
// (homotopy classes); window < 0 selects ceil((|c|+1) M) + 2 automatically.
MinPath action_min(const LagrangianEval& L, const Vec& c, double alpha, const Vec& th0,
                   const Vec& th1, int M, int S = 8, int window = -1);

// Radial plateau bump on the torus (per-axis circular distance): amp inside
// radius inner, 0 beyond outer, mollifier ramp between.
struct BumpND {
  Vec center;
  double inner = 0.1, outer = 0.2, amp = 1.0;
  double value(const Vec& x) const;
};

// One-step generating function G(x, x') of the time-1 map of N, with an
// optional localized perturbation G(x,x') + rho(x) phi(x').
class GeneratingFn {
 public:
  GeneratingFn(std::shared_ptr<const Ham> N, int S = 8, double t0 = 0.0);

  int n() const { return L_.n(); }
  const LagrangianEval& lagrangian() const { return L_; }
  int substeps() const { return S_; }

  // Minimal one-step action between the lifts; optionally the discrete end
  // momenta p = -d1 G and p' = d2 G.
  double value(const Vec& x0, const Vec& x1, Vec* p0 = nullptr, Vec* p1 = nullptr) const;

  // Attach rho(x) phi(x'): rho has amp 1 (plateau U1 = inner, support U2 =
  // outer); phi is the target bump.
  void attach_perturbation(const BumpND& rho, const BumpND& phi);
  void clear_perturbation() { perturbed_ = false; }
  bool perturbed() const { return perturbed_; }
  double rho(const Vec& x) const;
  double phi(const Vec& x) const;

 private:
  std::shared_ptr<const Ham> N_;
  LagrangianEval L_;
  int S_;
  double t0_;
  bool perturbed_ = false;
  BumpND rho_, phi_;
};

// Recover the time-1 twist map from the (possibly perturbed) generating
// function: given (x, p), solve -d1 G(x, x') = p for x' and return
// (x', d2 G(x, x')). Throws ConvergenceError when the implicit solve fails
// (perturbation too large: twist condition lost).
void twist_map(const GeneratingFn& G, const Vec& x, const Vec& p, Vec& x_out, Vec& p_out);

// Two-fold (or general diagonal) cover: angle axis i of the cover is scaled
// by factor[i] when projected to the base (2 for the doubled slow angle).
struct CoverLift {
  std::vector<double> factor;

  int n() const { return (int)factor.size(); }
  Vec xi(const Vec& x) const;       // cover point -> base point
  Vec xi_star(const Vec& c) const;  // base cohomology -> cover cohomology
  // Deck shift (half period on each doubled axis).
  Vec deck(const Vec& x) const;
  // Lifted cost: G_cover(x, x') = G_base(xi x, xi x').
  double cost(const GeneratingFn& G, const Vec& x0, const Vec& x1) const;
};

}  // namespace kamlab
