#pragma once
// Hamiltonian evaluators: the integrable part H0(p) = 0.5 p^T M p, compiled
// trigonometric terms for fast evaluation, localized angle bumps, and the
// composite time-periodic Hamiltonians used by the dynamics layers.

#include <Eigen/Dense>
#include <memory>

#include "kamlab/trigpoly.hpp"

namespace kamlab {

using Vec = std::vector<double>;
using EMat = Eigen::MatrixXd;
using EVec = Eigen::VectorXd;

inline EVec to_evec(const Vec& v) {
  EVec e(v.size());
  for (size_t i = 0; i < v.size(); ++i) e[i] = v[i];
  return e;
}
inline Vec to_vec(const EVec& e) {
  Vec v(e.size());
  for (int i = 0; i < e.size(); ++i) v[i] = e[i];
  return v;
}

// H0(p) = 0.5 p^T M p with M symmetric positive definite.
struct ConvexIntegrable {
  EMat M;

  explicit ConvexIntegrable(EMat m) : M(std::move(m)) {}
  static ConvexIntegrable identity(int n) { return ConvexIntegrable(EMat::Identity(n, n)); }

  int n() const { return (int)M.rows(); }
  double value(const EVec& p) const { return 0.5 * p.dot(M * p); }
  EVec grad(const EVec& p) const { return M * p; }
  // Convexity constant: eigenvalues of M lie in [1/D, D].
  double D() const;
  // Momentum gradient as polynomials (for the exact bracket).
  std::vector<PolyP> grad_polys() const;
};

// Flattened trig series for fast repeated evaluation; value plus all first
// derivatives in one pass. Conjugate pairs are folded into real amplitudes.
class CompiledTrig {
 public:
  CompiledTrig() = default;
  explicit CompiledTrig(const TrigPoly& g);

  int dim_angle() const { return m_; }
  int pdim() const { return pdim_; }
  bool empty() const { return modes_.empty(); }

  double value(const double* phi, const double* p) const;
  // dphi must hold dim_angle entries, dp pdim entries.
  void eval_all(const double* phi, const double* p, double& val, double* dphi,
                double* dp) const;

 private:
  struct Mode {
    int k[4];
    double weight;  // 1 for the zero mode, 2 for folded conjugate pairs
    // dense polynomial: exponents per p-variable plus complex coefficient
    struct Mono {
      int e[2];
      double re, im;
    };
    std::vector<Mono> poly;
  };
  int m_ = 0, pdim_ = 0;
  std::vector<Mode> modes_;
};

// Smooth plateau bump on one angle coordinate: amp on d(theta_i, center) <=
// inner, 0 beyond outer, mollifier ramp in between.
struct AngleBump {
  int axis = 0;
  double center = 0.0;
  double inner = 0.1;   // plateau radius
  double outer = 0.15;  // support radius
  double amp = 1.0;

  double value(const Vec& theta) const;
  double deriv(const Vec& theta) const;  // d/d theta_axis
};

// Mollifier ramp value and derivative as plain functions.
double mollifier_val(double x);
double mollifier_deriv(double x);

class TrigGrid;  // from normalform.hpp

// Time-periodic Hamiltonian H(theta, p, t) on T^n x R^n x T.
class Ham {
 public:
  virtual ~Ham() = default;
  virtual int n() const = 0;
  virtual double value(const Vec& th, const Vec& p, double t) const = 0;
  virtual void grad(const Vec& th, const Vec& p, double t, Vec& dth, Vec& dp) const = 0;
  // Momentum Hessian (finite differences by default).
  virtual EMat hess_p(const Vec& th, const Vec& p, double t) const;
};

// H = H0 + sum of eps-weighted compiled trig terms + eps-weighted grid terms
// + plain bump terms. Covers the raw system, the computed normal form, and
// the penalty-modified systems.
class CompositeHam : public Ham {
 public:
  explicit CompositeHam(ConvexIntegrable h0) : H0(std::move(h0)) {}

  ConvexIntegrable H0;
  struct TrigTerm {
    double weight;
    CompiledTrig g;
  };
  std::vector<TrigTerm> trig_terms;
  struct GridTerm {
    double weight;
    std::shared_ptr<const TrigGrid> g;
  };
  std::vector<GridTerm> grid_terms;
  struct BumpTerm {
    double weight;
    AngleBump b;
  };
  std::vector<BumpTerm> bump_terms;

  void add_trig(double w, const TrigPoly& g) { trig_terms.push_back({w, CompiledTrig(g)}); }
  void add_grid(double w, std::shared_ptr<const TrigGrid> g) { grid_terms.push_back({w, g}); }
  void add_bump(double w, const AngleBump& b) { bump_terms.push_back({w, b}); }

  int n() const override { return H0.n(); }
  double value(const Vec& th, const Vec& p, double t) const override;
  void grad(const Vec& th, const Vec& p, double t, Vec& dth, Vec& dp) const override;
  EMat hess_p(const Vec& th, const Vec& p, double t) const override;
};

}  // namespace kamlab
