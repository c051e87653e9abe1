#pragma once
// Normally hyperbolic cylinder machinery: slow-fast matrix algebra (A, B, T,
// Lambda), the hyperbolic chart (x, y, Theta, I, t), isolating-block and cone
// verification by sampling, the graph transform for the center-stable /
// center-unstable / center graphs, and containment checks against weak KAM
// invariant-set samples.

#include "kamlab/normalform.hpp"
#include "kamlab/weakkam.hpp"

namespace kamlab {

// ---------------------------------------------------------------------------
// Mixed box/torus mesh with separable cubic interpolation.

struct AxisSpec {
  double lo = 0.0, hi = 1.0;
  int n = 2;
  bool periodic = false;  // periodic: n nodes on [lo, hi); box: n nodes incl. ends
};

class MeshFn {
 public:
  MeshFn() = default;
  explicit MeshFn(std::vector<AxisSpec> axes, double fill = 0.0);

  int dim() const { return (int)axes_.size(); }
  const std::vector<AxisSpec>& axes() const { return axes_; }
  std::size_t size() const { return data_.size(); }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double> node(std::size_t flat) const;
  double eval(const Vec& z) const;

 private:
  std::vector<AxisSpec> axes_;
  std::vector<std::size_t> strides_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Matrix algebra

// Symmetric positive-definite square root.
EMat sqrt_spd(const EMat& a);
// T solving T^2 A T^2 = B for spd A, B.
EMat t_from_ab(const EMat& a, const EMat& b);

struct SlowFastFrame {
  std::vector<double> pf_grid;
  std::vector<EMat> A, B, T, Lam;
  double eps = 0.0, gamma = 1.0, lambda = 0.0, D = 1.0;
  double alpha_scale = 0.0;     // sqrt(eps lambda / (4 D))
  double worst_identity = 0.0;  // max Frobenius residual of T^2 A T^2 - B
  double worst_lam_gap = 0.0;   // max |TAT - T^-1 B T^-1|
  double lam_min = 0.0;         // min eigenvalue of Lam over the grid
  bool ok = false;              // identities hold and lam_min >= sqrt(lambda/D)
};

// ---------------------------------------------------------------------------
// Hyperbolic chart around the dominant maximizer branch:
//   x = T^{-1}(th^s - th*_s) + eps^{-1/2} T (p^s - p*_s)
//   y = T^{-1}(th^s - th*_s) - eps^{-1/2} T (p^s - p*_s)
//   Theta = gamma th^f,  I = eps^{-1/2} p^f,  t = t.
class HypChart {
 public:
  HypChart(std::shared_ptr<const Ham> N, ConvexIntegrable H0, AveragedPotential Z,
           double eps, double gamma = 1.0, int branch = 0);

  int ns() const { return ns_; }
  int dim() const { return 2 * ns_ + 3; }  // x, y, Theta, I, t
  double eps() const { return eps_; }
  double gamma() const { return gamma_; }
  const Ham& ham() const { return *N_; }

  EMat Amat(double pf) const;
  EMat Bmat(double pf) const;
  EMat Tmat(double pf) const;
  EMat Lmat(double pf) const;
  double theta_star(double pf) const;
  EVec p_star(double pf) const;

  // z = (x[ns], y[ns], Theta, I, t).
  Vec to_hyp(const Vec& th, const Vec& p, double t) const;
  void from_hyp(const Vec& z, Vec& th, Vec& p, double& t) const;
  // Full state derivative (t-component 1): directional finite difference of
  // the forward map along the Hamiltonian field.
  Vec field(const Vec& z) const;
  // Finite-difference Jacobian of the forward map in (th, p) at fixed t.
  EMat chart_jacobian(const Vec& th, const Vec& p, double t) const;

 private:
  std::shared_ptr<const Ham> N_;
  ConvexIntegrable H0_;
  AveragedPotential Z_;
  TrigPoly d2Z_;  // second slow derivative of Z
  ResonanceFrame rf_;
  double eps_, gamma_;
  int branch_, ns_;
};

// Frame tables and identity checks over a p^f grid.
SlowFastFrame slowfast_frame(const HypChart& chart, const std::vector<double>& pf_grid,
                             double lambda, double D);

// Informational rho window of the block-size constraint.
std::pair<double, double> rho_window(double b, double lambda, double delta, double eps);

// ---------------------------------------------------------------------------
// Isolating block certificate

// State layout: z = (x[nu], y[ns], center...) with the field returning the
// full derivative (including 1 for a time axis when present).
using FieldFn = std::function<Vec(const Vec&)>;

struct BlockGeometry {
  int nu = 1, ns = 1;
  double rho_u = 0.1, rho_s = 0.1;
  std::vector<AxisSpec> center;  // sampling/grid spec per center axis
  double sigma = 0.0;            // collar width on the collar axis
  int collar_axis = -1;          // center axis carrying the sigma collar
  int hyp_samples = 3;           // interior samples per hyperbolic axis
  double fd_step = 1e-5;
};

struct BlockCertificate {
  double flux_u_min = 0.0;   // min of F_x . x / |x| on the unstable boundary
  double flux_s_max = 0.0;   // max of F_y . y / |y| on the stable boundary
  double alpha_meas = 0.0;   // spectral margin of L_uu / -L_ss
  double m_jac = 0.0;        // max off-diagonal coupling block norm
  double collar_term = 0.0;  // 2 |F_collar| / sigma on the collar
  double m_meas = 0.0;       // max(m_jac, collar_term)
  double K = 0.0;            // m / (alpha - 2 m)
  bool hyp_flux = false, hyp_cone = false;
  bool pass = false;         // K <= 1/8 (C1-foliation regime)
  bool graphs_only = false;  // 1/8 < K <= 1/sqrt(2)
};

BlockCertificate verify_block(const FieldFn& F, const BlockGeometry& geo);

// ---------------------------------------------------------------------------
// Graph transform

struct GraphTransformParams {
  double h = 1.0;          // flow time per transform step
  int flow_substeps = 8;
  int iters_max = 300;
  double tol = 1e-8;       // sup-norm stopping increment
  int source_iters = 8;    // fixed-point iterations of the source lookup
  int mesh_hyp = 5;        // graph-mesh nodes along the hyperbolic argument
};

struct CylinderGraph {
  MeshFn wsc;          // x = wsc(y, center)  [per x-component: ns=nu=1 here]
  MeshFn wuc;          // y = wuc(x, center)
  MeshFn wc_u, wc_s;   // center graph: x, y over (center)
  double lip_sc = 0.0, lip_uc = 0.0, lip_c = 0.0;
  int iters = 0;
  double final_delta = 0.0;
  bool converged = false;
  BlockGeometry geo;
  GraphTransformParams params;
};

// Scalar hyperbolic directions (nu = ns = 1) with arbitrary center axes.
CylinderGraph graph_transform(const FieldFn& F, const BlockGeometry& geo,
                              const GraphTransformParams& gp);

// Chart-mapped cylinder measurements.
struct CylinderReport {
  double theta_dist_max = 0.0;     // sup |Theta^s - theta^s_*|
  double dtheta_dpf_max = 0.0;     // max difference quotient along p^f
  double invariance_residual = 0.0;
  double psn_dist_max = 0.0;       // sup |P^s - p^s_*|
};

CylinderReport cylinder_measure(const HypChart& chart, const CylinderGraph& g);

// Containment of an invariant-set sample in the cylinder graph.
struct ContainmentReport {
  double max_graph_dist = 0.0;  // in multiples of grid_step
  double wbox_ratio = 0.0;      // max |p^s - p^s_*| / (kappa sqrt(eps))
  double proj_lip = 0.0;        // max |p2 - p1| / |th2^f - th1^f|
  int samples = 0;
  bool pass = false;
};

ContainmentReport containment_check(const HypChart& chart, const CylinderGraph& g,
                                    const InvariantSetSample& s, double grid_step,
                                    double kappa = 3.0);

}  // namespace kamlab
