#pragma once
// Multivariate polynomials in the momentum variable p with complex
// coefficients. These are the per-mode coefficient functions of a
// trigonometric series. Degree is capped so products fail loudly instead of
// growing without bound.

#include <complex>
#include <map>
#include <vector>

#include "kamlab/util.hpp"

namespace kamlab {

using cplx = std::complex<double>;

struct PBox {
  std::vector<double> lo, hi;
  int dim() const { return (int)lo.size(); }
};

class PolyP {
 public:
  // Monomials: multi-index (one exponent per p-variable) -> coefficient.
  using Terms = std::map<std::vector<int>, cplx>;

  PolyP() = default;
  explicit PolyP(int nvars) : nvars_(nvars) {}
  static PolyP constant(int nvars, cplx c) {
    PolyP q(nvars);
    if (c != cplx(0.0)) q.terms_[std::vector<int>(nvars, 0)] = c;
    return q;
  }
  // The monomial p_i.
  static PolyP var(int nvars, int i, cplx scale = 1.0) {
    PolyP q(nvars);
    std::vector<int> m(nvars, 0);
    m[i] = 1;
    if (scale != cplx(0.0)) q.terms_[m] = scale;
    return q;
  }

  int nvars() const { return nvars_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  int degree() const {
    int d = 0;
    for (auto& [m, c] : terms_) {
      int s = 0;
      for (int e : m) s += e;
      d = std::max(d, s);
    }
    return d;
  }

  cplx eval(const std::vector<double>& p) const {
    cplx acc = 0.0;
    for (auto& [m, c] : terms_) {
      double mono = 1.0;
      for (int i = 0; i < nvars_; ++i)
        for (int e = 0; e < m[i]; ++e) mono *= p[i];
      acc += c * mono;
    }
    return acc;
  }

  void add_term(const std::vector<int>& m, cplx c) {
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      if (c != cplx(0.0)) terms_[m] = c;
    } else {
      it->second += c;
      if (it->second == cplx(0.0)) terms_.erase(it);
    }
  }

  PolyP operator+(const PolyP& o) const {
    PolyP r = *this;
    for (auto& [m, c] : o.terms_) r.add_term(m, c);
    return r;
  }
  PolyP operator-(const PolyP& o) const {
    PolyP r = *this;
    for (auto& [m, c] : o.terms_) r.add_term(m, -c);
    return r;
  }
  PolyP operator*(cplx s) const {
    PolyP r(nvars_);
    if (s == cplx(0.0)) return r;
    for (auto& [m, c] : terms_) r.terms_[m] = c * s;
    return r;
  }
  PolyP mul(const PolyP& o, int degree_cap) const {
    PolyP r(nvars_);
    for (auto& [ma, ca] : terms_)
      for (auto& [mb, cb] : o.terms_) {
        std::vector<int> m(nvars_);
        int total = 0;
        for (int i = 0; i < nvars_; ++i) {
          m[i] = ma[i] + mb[i];
          total += m[i];
        }
        if (total > degree_cap)
          throw CapacityError("polynomial degree cap exceeded in product: " +
                              std::to_string(total) + " > " + std::to_string(degree_cap));
        r.add_term(m, ca * cb);
      }
    return r;
  }

  PolyP derivative(int var) const {
    PolyP r(nvars_);
    for (auto& [m, c] : terms_) {
      if (m[var] == 0) continue;
      std::vector<int> d = m;
      d[var] -= 1;
      r.add_term(d, c * double(m[var]));
    }
    return r;
  }

  PolyP conj() const {
    PolyP r(nvars_);
    for (auto& [m, c] : terms_) r.terms_[m] = std::conj(c);
    return r;
  }

  // Sup of |value| over a sampling grid on the box (safe enough for the
  // low-degree coefficients in play; density recorded by callers).
  double sup_abs(const PBox& box, int samples_per_dim = 9) const {
    if (terms_.empty()) return 0.0;
    std::vector<std::vector<double>> axes;
    for (int i = 0; i < nvars_; ++i)
      axes.push_back(linspace(box.lo[i], box.hi[i], samples_per_dim));
    std::vector<int> idx(nvars_, 0);
    double best = 0.0;
    while (true) {
      std::vector<double> p(nvars_);
      for (int i = 0; i < nvars_; ++i) p[i] = axes[i][idx[i]];
      best = std::max(best, std::abs(eval(p)));
      int i = 0;
      for (; i < nvars_; ++i) {
        if (++idx[i] < samples_per_dim) break;
        idx[i] = 0;
      }
      if (i == nvars_) break;
    }
    return best;
  }

  bool operator==(const PolyP& o) const {
    return nvars_ == o.nvars_ && terms_ == o.terms_;
  }

 private:
  int nvars_ = 0;
  Terms terms_;
};

}  // namespace kamlab
