#pragma once
// Resonant normal form: slow/fast frame, averaged potential with concavity
// certificate, small-denominator exclusion windows, the cutoff-regularized
// cohomological solve, the generator flow, and residual measurement.

#include "kamlab/gridfn.hpp"
#include "kamlab/hamiltonian.hpp"

namespace kamlab {

// Slow variables are the first n-1 momentum coordinates; the resonance curve
// Gamma is d H0 / d p^s = 0, parameterized by the fast momentum p^f.
struct ResonanceFrame {
  ConvexIntegrable H0;

  explicit ResonanceFrame(ConvexIntegrable h0) : H0(std::move(h0)) {}
  int n() const { return H0.n(); }
  int slow_dim() const { return H0.n() - 1; }

  // Point of Gamma over p^f (solves the slow stationarity system).
  EVec p_star(double pf) const;
  // Fast frequency along Gamma.
  double omega_f(double pf) const;
  // Residual of the root solve (for the invariant check).
  double gamma_residual(double pf) const;
};

struct MaximizerBranch {
  std::vector<double> pf;        // sample grid
  std::vector<double> theta;     // slow maximizer per sample
  std::vector<double> value;     // Z at the maximizer
  std::vector<double> curvature; // -d2Z/dtheta2 at the maximizer (>0)
};

struct AveragedPotential {
  TrigPoly Z;  // only slow modes survive; same angle layout as the input
  std::vector<MaximizerBranch> branches;  // sorted by descending value
  double lambda = 0.0;       // certified concavity along the dominant branch
  bool degenerate = false;   // no branch clears lambda_min
  bool double_peak = false;  // two branches of comparable height exist
  std::vector<double> bifurcation_pf;  // p^f where the top two branches tie

  // Dominant maximizer at a given p^f (interpolated along the branch).
  double theta_star(double pf, int branch = 0) const;
};

struct PunctureSet {
  int K = 0;
  double s = 0.0;
  std::pair<double, double> range;
  std::vector<std::pair<double, double>> excluded;  // merged exclusion windows
  std::vector<std::pair<double, double>> arcs;      // admissible sub-intervals
  // Centers of the exclusion windows on the rotation-number scale.
  std::vector<double> centers_omega;
};

PunctureSet compute_punctures(const ResonanceFrame& frame, int K, double s,
                              std::pair<double, double> pf_range);

// Averaging over the fast angle and time; maximizer branches and concavity
// certificate sampled along the given p^f window.
AveragedPotential average_perturbation(const TrigPoly& H1, const ResonanceFrame& frame,
                                       std::pair<double, double> pf_window,
                                       double lambda_min = 1e-3, int pf_samples = 33);

// One Fourier mode of a momentum-profile series: coefficient h_k(p) times a
// 1-D profile evaluated at the affine small-denominator coordinate
// x(p) = (k . omega(p)) / (beta eps^(1/4) [k]).
struct ModeProfile {
  std::vector<int> k;
  PolyP h;
  EVec a;          // x(p) = a . p + b
  double b = 0.0;
  enum Kind { CUTOFF_RHO, SOLVED_TABLE } kind = CUTOFF_RHO;
  // SOLVED_TABLE: dense samples of S(x) with G_k(p) = h_k(p) S(x(p));
  // CUTOFF_RHO: G_k(p) = h_k(p) rho(x(p)) evaluated in closed form.
  std::vector<double> table_re, table_im;
  double xlo = 0.0, xhi = 0.0;

  cplx profile(double x) const;
  cplx profile_deriv(double x) const;

  // Cached momentum derivatives of h (filled by TrigGrid::finalize).
  std::vector<PolyP> hd;
};

// Trig series with momentum-profile coefficients (the generator G and the
// resonant part R1 live here; polynomials cannot represent them).
class TrigGrid {
 public:
  int m = 0;     // angle dims including time
  int pdim = 0;
  std::vector<ModeProfile> modes;

  double value(const double* phi, const double* p) const;
  void eval_all(const double* phi, const double* p, double& val, double* dphi,
                double* dp) const;
  double value_v(const Vec& phi, const Vec& p) const;

  // Precompute per-mode coefficient derivatives; call after filling modes.
  void finalize();
};

struct CohomologicalResult {
  std::shared_ptr<TrigGrid> G;   // generator coefficients
  std::shared_ptr<TrigGrid> R1;  // resonant (cutoff) part
  TrigPoly head, tail;           // the [k]<=K split of the input
  double beta = 0.0, eps = 0.0, cutoff_scale = 0.0;  // cutoff_scale = beta eps^(1/4)
};

// Solve {H0,G} + H1 = R1 + tail on [k]<=K with plateau cutoffs; the G
// profiles are grid-sampled with the given density.
CohomologicalResult solve_cohomological(const ConvexIntegrable& H0, const TrigPoly& H1,
                                        int K, double beta, double eps, const PBox& pbox,
                                        int profile_samples = 20001);

struct NormalFormParams {
  double eps = 1e-3;
  double delta = 0.05;   // certification target for ||R||_C2
  int K = 3;
  double beta = 0.1;
  double lambda_min = 1e-3;
  // Residual measurement densities (recorded in the result). Momentum axes
  // are sampled across the certification window only; derivative sups are
  // taken at nodes at least 4 steps from the window edges, so the stencils
  // never leave the window.
  int res_angle_samples = 12;
  int res_p_samples = 13;
  // Generator flow integration step scale.
  double flow_step = 1e-2;
  // Angular cutoff for the second-order residual fit.
  int r2_fit_kmax = 2;
};

struct NormalFormResult {
  NormalFormParams params;
  AveragedPotential Z;
  CohomologicalResult coh;
  TrigPoly R2fit;          // measured second-order residual, trig fit at p on Gamma
  double r2_fit_error = 0.0;
  std::pair<double, double> arc;
  PBox pbox;               // momentum window used for measurement
  // Measured norms.
  double R_C0 = 0.0, R_C2 = 0.0;
  double Phi_C0 = 0.0, Phi_C2 = 0.0;
  bool certified = false;

  // The computed normal form N = H0 + eps R1 + eps R2fit as a Hamiltonian.
  std::shared_ptr<CompositeHam> model;
  // The raw system H0 + eps H1.
  std::shared_ptr<CompositeHam> raw;
};

// Time-1 flow of the generator eps*G at frozen t; also accumulates the
// energy-shift integral of -eps dG/dt needed to conjugate time-periodic
// Hamiltonians. Returns (theta', p', eshift).
struct GeneratorFlow {
  std::shared_ptr<const TrigGrid> G;
  double eps = 0.0;
  double step = 1e-2;
  // direction +1: the change Phi; -1: its inverse.
  void map(const Vec& th, const Vec& p, double t, int direction, Vec& th_out, Vec& p_out,
           double& eshift) const;
};

NormalFormResult build_normal_form(const ConvexIntegrable& H0, const TrigPoly& H1,
                                   const NormalFormParams& params,
                                   std::pair<double, double> arc);

}  // namespace kamlab
