#pragma once
// Finite trigonometric series in the angles phi = (theta, t) with
// polynomial-in-p coefficient functions, plus the mollifier and the norm
// budgets used throughout: the basic calculus layer everything else builds on.

#include <complex>
#include <map>
#include <string>
#include <vector>

#include "kamlab/poly.hpp"
#include "kamlab/util.hpp"

namespace kamlab {

// Max-norm of a wave vector, with the convention that the zero vector counts
// as 1 (so it can appear in negative powers).
inline int bracket_norm(const std::vector<int>& k) {
  int m = 0;
  for (int v : k) m = std::max(m, std::abs(v));
  return m == 0 ? 1 : m;
}

class TrigPoly {
 public:
  using Terms = std::map<std::vector<int>, PolyP>;

  TrigPoly() = default;
  // dim_angle = number of angle variables (theta-dims plus one time dim),
  // pdim = number of momentum variables, degree_cap = max coefficient degree.
  TrigPoly(int dim_angle, int pdim, bool real = true, int degree_cap = 4)
      : m_(dim_angle), pdim_(pdim), real_(real), cap_(degree_cap) {}

  int dim_angle() const { return m_; }
  int pdim() const { return pdim_; }
  bool is_real() const { return real_; }
  int degree_cap() const { return cap_; }
  const Terms& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  // Insert h_k; when the reality flag is set the conjugate mode is added
  // automatically so h_{-k} = conj(h_k) always holds.
  void add_mode(const std::vector<int>& k, const PolyP& h, bool with_conjugate = true);
  void set_mode_raw(const std::vector<int>& k, const PolyP& h);
  const PolyP* mode(const std::vector<int>& k) const;
  void prune();

  cplx eval_complex(const std::vector<double>& phi, const std::vector<double>& p) const;
  double eval(const std::vector<double>& phi, const std::vector<double>& p) const;

  TrigPoly deriv_angle(int i) const;  // d/d phi_i (multiplies h_k by 2*pi*i*k_i)
  TrigPoly deriv_p(int j) const;
  TrigPoly scale(double s) const;
  TrigPoly operator+(const TrigPoly& o) const;
  TrigPoly operator-(const TrigPoly& o) const;
  // Multiply every coefficient by a p-polynomial (degree cap enforced).
  TrigPoly scale_coeffs(const PolyP& q) const;
  // Keep only modes with k[i]==0 for all i in zeroed_axes (angle averaging).
  TrigPoly average_over(const std::vector<int>& zeroed_axes) const;

  bool check_reality(double tol = 1e-12) const;

  bool operator==(const TrigPoly& o) const {
    return m_ == o.m_ && pdim_ == o.pdim_ && real_ == o.real_ && terms_ == o.terms_;
  }

 private:
  int m_ = 0, pdim_ = 0;
  bool real_ = true;
  int cap_ = 4;
  Terms terms_;
};

// {H0, G} for integrable H0 given through its momentum gradient polynomials:
// sum_j dH0dp[j] * dG/dtheta_j, plus dG/dt when the series has a time angle
// (the last angle axis is time whenever dim_angle == pdim + 1).
TrigPoly poisson_bracket_grad(const std::vector<PolyP>& dH0dp, const TrigPoly& G);

// Split into ([k] <= K, [k] > K); head + tail reassembles g exactly.
std::pair<TrigPoly, TrigPoly> tail_truncate(const TrigPoly& g, int K);

struct NormBudget {
  int order = 0;
  double value = 0.0;           // max(analytic per-mode bound, sampled sup)
  double analytic_bound = 0.0;  // sum_k (2 pi [k])^l sup_box |h_k|
  double sampled_sup = 0.0;     // sup over the grid of all partials of order <= l
  PBox box;
  int angle_samples = 0, p_samples = 0;
};

// C^l budget on T^m x box, l <= 3.
NormBudget cl_norm(const TrigPoly& g, int l, const PBox& box, int angle_samples = 9,
                   int p_samples = 5);

// kappa_m = sum over Z^m of [k]^(-m-1), truncated at |k_i| <= cutoff.
double kappa_m(int m, int cutoff = 40);

// Smooth bump: 1 on [-1,1], 0 outside (-2,2), strictly in between, C-infinity.
class Mollifier {
 public:
  double operator()(double x) const;

 private:
  static double q(double t);
};

// Serialization (exact round-trip): {dim, pdim, cap, reality, terms:[...]}.
std::string trig_to_json(const TrigPoly& g);
TrigPoly trig_from_json(const std::string& text);

}  // namespace kamlab
