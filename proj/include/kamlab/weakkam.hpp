#pragma once
// Discrete weak KAM theory on a torus grid: Lax-Oleinik value iteration with
// precomputed one-step costs, critical values, forward/backward solutions,
// calibrated sets, localization checks, Peierls barriers on the two-fold
// cover, barrier fields, the Hoelder probe, and penalized local alpha values.

#include <functional>

#include "kamlab/action.hpp"
#include "kamlab/gridfn.hpp"

namespace kamlab {

struct WeakKamParams {
  int ng = 48;                  // grid nodes per angle axis
  double tol = 1e-6;            // fixed-point tolerance
  int max_iters = 4000;
  double stencil_radius = 0.35; // velocity half-window around the drift
  int table_ny = 16;            // correction-table base-point nodes per axis
  double seed_big = 10.0;       // "infinity" for indicator seeds
  int burn_in = 64;             // iterations before the Cesaro average starts
};

// One-step cost split as cost(y, y+d) = l0(d) + corr(y, d) with quadratic
// l0(d) = 0.5 d^T A d. corr is tabulated once on a coarse (y, d) grid and
// interpolated; node x offset values are then frozen in a dense array so the
// value-iteration inner loop is pure table lookups.
class SliceCost {
 public:
  using CostFn = std::function<double(const Vec&, const Vec&)>;

  // dbox bounds the displacements the solver may use (drift + stencil).
  SliceCost(CostFn cost, EMat quad_form, int dim, int ng, double stencil_radius,
            const PBox& dbox, int table_ny = 16, int table_nd = 17);

  int dim() const { return dim_; }
  int ng() const { return ng_; }
  int window() const { return W_; }
  const EMat& quad() const { return A_; }
  double h() const { return 1.0 / ng_; }

  double l0(const Vec& d) const;
  // Interpolated correction at arbitrary (y, d); d must be inside dbox.
  double corr(const Vec& y, const Vec& d) const;
  // Frozen value at (stencil offset index, source grid node), offset-major.
  const double* frozen_row(std::size_t offset) const {
    return frozen_.data() + offset * nnodes_;
  }
  // Freeze the per-offset x per-node table for the given drift center
  // (grid units per axis). No-op when the center is unchanged.
  void freeze(const std::vector<int>& drift_units);
  std::size_t n_offsets() const { return n_offsets_; }
  std::size_t n_nodes() const { return nnodes_; }
  const std::vector<int>& drift_units() const { return drift_units_; }
  // Offset index -> per-axis units in [-W, W].
  std::vector<int> offset_units(std::size_t o) const;
  // Enlarge the stencil window (forces a refreeze); throws ResolutionError
  // when the displacement box cannot accommodate the wider window.
  void widen();
  // Full cost between arbitrary points (for refinement and diagnostics).
  double full(const Vec& y, const Vec& d) const { return l0(d) + corr(y, d); }
  const PBox& dbox() const { return dbox_; }
  // Off-node sub-grid refinement is only meaningful when the cost is smooth
  // on the cell scale; interpolating a correction with sub-cell features
  // overshoots and can make a pointwise-larger cost look cheaper off-grid.
  // Disable it for such costs so the node dynamics stays exactly monotone.
  bool refine() const { return refine_; }
  void set_refine(bool on) { refine_ = on; }

 private:
  CostFn cost_;
  EMat A_;
  int dim_, ng_, W_;
  PBox dbox_;
  std::vector<int> tdims_;      // table dims: ny per angle, nd per offset axis
  std::vector<double> table_;   // corr samples (row-major, y-major)
  std::vector<std::size_t> tstrides_;
  int table_ny_, table_nd_;
  std::vector<int> drift_units_;
  std::size_t n_offsets_ = 0, nnodes_ = 0;
  std::vector<double> frozen_;
  bool refine_ = true;

  void check_window(const std::vector<int>& drift_units) const;
};

struct WeakKamField {
  GridFunction u;
  Vec c;
  double alpha = 0.0;
  bool backward = false;
  double residual = 0.0;
  int iters = 0;
  std::vector<double> alpha_history;
  std::vector<std::size_t> argmin_offset;  // back-pointer per node
  std::vector<int> drift_units;            // stencil center in grid units
  bool converged = false;
};

// FORWARD_MIN: (Tu)(x) = min_y u(y) + cost_c(y, x); TRANSPOSE_MIN minimizes
// over the destination instead; CONJUGATE_MAX is the conjugate (max-type)
// operator pairing a forward solution with its backward companion.
enum class StepMode { FORWARD_MIN, TRANSPOSE_MIN, CONJUGATE_MAX };

// Forward solution (min-type operator); seed optional. A converged solution
// whose minimizers touch the stencil boundary triggers one widen-and-retry,
// then ResolutionError.
WeakKamField solve_weak_kam(SliceCost& cost, const Vec& c, const WeakKamParams& wp,
                            const GridFunction* seed = nullptr);
// Backward (max-type) conjugate solution sharing alpha with the forward one.
WeakKamField solve_backward(SliceCost& cost, const WeakKamField& fwd,
                            const WeakKamParams& wp);

// One operator application (exposed for the property tests). alpha is added
// for the min-type modes and subtracted for the max-type one. The frozen
// stencil of `cost` must match the drift of c.
GridFunction lax_oleinik_step(SliceCost& cost, const GridFunction& u, const Vec& c,
                              double alpha, StepMode mode,
                              std::vector<std::size_t>* argmin = nullptr,
                              bool* boundary_hit = nullptr);

// Measurements on a converged field.
double oscillation(const GridFunction& u);
double lipschitz_grid(const GridFunction& u);
// Largest one-sided second difference along the axes divided by step^2.
double semiconcavity_grid(const GridFunction& u);

struct InvariantSetSample {
  enum Kind { AUBRY, MANE, CALIBRATED } kind = CALIBRATED;
  std::vector<Vec> theta;
  std::vector<Vec> p;
  Vec c;
  Vec rotation;         // mean calibrated displacement
  double graph_lip = 0.0;  // measured vertical Lipschitz constant
  bool solution_set_approx = true;  // computed-solution approximation flag
};

// Calibrated set of a conjugate pair: nodes where u - u_bwd is minimal
// (within ktol * tol); momenta from the exact end-momentum of the calibrated
// step. kind AUBRY for the intersection-style pair set. With refine_p the
// calibrated displacement is moved off the node lattice by a per-axis
// parabola through the one-step closure before the momentum is evaluated,
// removing the O(h) lattice quantization of the sampled momenta.
InvariantSetSample extract_calibrated(SliceCost& cost, const GeneratingFn& G,
                                      const WeakKamField& fwd, const WeakKamField& bwd,
                                      const WeakKamParams& wp, double ktol = 3.0,
                                      const CoverLift* cover = nullptr, bool refine_p = false);

struct LocalizationReport {
  bool pass = false;
  double worst_slow_excess = 0.0;  // in units of the slow-ball radius
  double worst_p_excess = 0.0;     // in units of the momentum-ball radius
  double slow_radius = 0.0, p_radius = 0.0;
  bool one_sided = true;  // double-peak: all samples in a single ball
};

// Thm-style tube check: slow angle within delta^{1/5} of the maximizer(s),
// momentum within sqrt(eps) * delta^{1/16} of c.
LocalizationReport localization_check(const InvariantSetSample& s,
                                      const std::vector<double>& theta_peaks, const Vec& c,
                                      double delta, double eps);

// ---------------------------------------------------------------------------
// Peierls barriers on the cover

struct BarrierField {
  GridFunction h1_fwd, h1_bwd;  // h(zeta1, .) and h(., zeta1)
  GridFunction h2_fwd, h2_bwd;  // h(zeta2, .) and h(., zeta2)
  GridFunction b_minus, b_plus; // b-(x) = h(z1,x)+h(x,z2)-h(z1,z2); b+ swaps
  double h_z1z2 = 0.0, h_z2z1 = 0.0;
  std::vector<Vec> H12, H21;  // heteroclinic samples (cover coordinates)
  Vec zeta1, zeta2;
  double detect_tol = 0.0;    // threshold used for heteroclinic detection
  bool converged = true;
};

// Peierls barrier h(zeta, .) (direction +1) or h(., zeta) (direction -1) by
// value iteration from an indicator seed, alpha added per step.
GridFunction peierls_barrier(SliceCost& cost, const Vec& c, double alpha, const Vec& zeta,
                             int direction, const WeakKamParams& wp, bool* converged = nullptr);

// Assemble b-+ from the four barriers of the two static classes; extract
// heteroclinic samples (sub-tolerance minima of b-+ at least
// exclusion_radius away from both classes along the slow axis).
BarrierField barrier_fields(SliceCost& cost, const Vec& c, double alpha, const Vec& zeta1,
                            const Vec& zeta2, const WeakKamParams& wp,
                            double exclusion_radius);

struct HolderReport {
  double gamma = 0.0;       // fitted exponent of sup|b_c - b_c'| vs |c - c'|
  double fit_residual = 0.0;
  int pairs = 0;
  double worst_area_error = 0.0;  // area identity residual
  bool enough_data = false;
};

// Log-log regression of barrier sup-distances over a c-sample family; the
// area identity compares differences of the loop integrals (from the weak
// KAM fields) against differences of the extracted circle momenta.
HolderReport barrier_holder_probe(const std::vector<Vec>& cs,
                                  const std::vector<GridFunction>& barriers,
                                  const std::vector<double>& loop_integrals,
                                  const std::vector<double>& circle_pf);

// alpha of the penalized system N - F_i (bump of amplitude pen_amp on the
// ball around the opposite peak): local critical value of peak i.
double local_alpha(SliceCost& cost_penalized, const Vec& c, const WeakKamParams& wp);

// Convenience: build the penalized cost function (cost + one-step penalty
// indicator of the opposite ball applied at the endpoint).
SliceCost::CostFn penalized_cost(SliceCost::CostFn base, int axis, double center,
                                 double lam, double amp);

}  // namespace kamlab
