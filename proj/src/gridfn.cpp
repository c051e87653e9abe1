#include "kamlab/gridfn.hpp"

#include <cmath>

namespace kamlab {

namespace {

// Catmull-Rom weights for fractional offset u in [0,1): value and derivative.
void cr_weights(double u, double w[4]) {
  double u2 = u * u, u3 = u2 * u;
  w[0] = 0.5 * (-u3 + 2 * u2 - u);
  w[1] = 0.5 * (3 * u3 - 5 * u2 + 2);
  w[2] = 0.5 * (-3 * u3 + 4 * u2 + u);
  w[3] = 0.5 * (u3 - u2);
}
void cr_dweights(double u, double w[4]) {
  double u2 = u * u;
  w[0] = 0.5 * (-3 * u2 + 4 * u - 1);
  w[1] = 0.5 * (9 * u2 - 10 * u);
  w[2] = 0.5 * (-9 * u2 + 8 * u + 1);
  w[3] = 0.5 * (3 * u2 - 2 * u);
}

std::vector<std::size_t> make_strides(const std::vector<int>& dims) {
  std::vector<std::size_t> s(dims.size());
  std::size_t acc = 1;
  for (int i = (int)dims.size() - 1; i >= 0; --i) {
    s[i] = acc;
    acc *= dims[i];
  }
  return s;
}

}  // namespace

GridFunction::GridFunction(std::vector<int> dims, double fill) : dims_(std::move(dims)) {
  strides_ = make_strides(dims_);
  std::size_t n = 1;
  for (int d : dims_) n *= d;
  data_.assign(n, fill);
}

GridFunction GridFunction::sample(
    const std::vector<int>& dims,
    const std::function<double(const std::vector<double>&)>& f) {
  GridFunction g(dims);
  parallel_for(g.size(), [&](std::size_t i) { g.data_[i] = f(g.node(i)); });
  return g;
}

std::size_t GridFunction::index(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (size_t i = 0; i < dims_.size(); ++i) {
    int j = idx[i] % dims_[i];
    if (j < 0) j += dims_[i];
    flat += strides_[i] * j;
  }
  return flat;
}

std::vector<int> GridFunction::unindex(std::size_t flat) const {
  std::vector<int> idx(dims_.size());
  for (size_t i = 0; i < dims_.size(); ++i) {
    idx[i] = (int)(flat / strides_[i]);
    flat %= strides_[i];
  }
  return idx;
}

std::vector<double> GridFunction::node(std::size_t flat) const {
  auto idx = unindex(flat);
  std::vector<double> x(dims_.size());
  for (size_t i = 0; i < dims_.size(); ++i) x[i] = double(idx[i]) / dims_[i];
  return x;
}

namespace {
// Recursive separable interpolation over the 4^d stencil.
double interp_rec(const GridFunction& g, const std::vector<int>& base,
                  const std::vector<double>& frac, int axis, std::vector<int>& idx,
                  int deriv_axis, const std::vector<int>& dims) {
  double w[4];
  if (axis == deriv_axis)
    cr_dweights(frac[axis], w);
  else
    cr_weights(frac[axis], w);
  double acc = 0.0;
  for (int s = -1; s <= 2; ++s) {
    idx[axis] = base[axis] + s;
    double v;
    if (axis + 1 == (int)dims.size())
      v = g.at(idx);
    else
      v = interp_rec(g, base, frac, axis + 1, idx, deriv_axis, dims);
    acc += w[s + 1] * v;
  }
  return acc;
}

double interp_entry(const GridFunction& g, const std::vector<double>& x, int deriv_axis) {
  int d = g.dim();
  std::vector<int> base(d);
  std::vector<double> frac(d);
  for (int i = 0; i < d; ++i) {
    double s = wrap01(x[i]) * g.dims()[i];
    base[i] = (int)std::floor(s);
    frac[i] = s - base[i];
  }
  std::vector<int> idx(d);
  double v = interp_rec(g, base, frac, 0, idx, deriv_axis, g.dims());
  if (deriv_axis >= 0) v *= g.dims()[deriv_axis];
  return v;
}
}  // namespace

double GridFunction::eval(const std::vector<double>& x) const {
  return interp_entry(*this, x, -1);
}

double GridFunction::deriv(const std::vector<double>& x, int axis) const {
  return interp_entry(*this, x, axis);
}

double GridFunction::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

BoxGridC::BoxGridC(const PBox& box, std::vector<int> dims)
    : box_(box), dims_(std::move(dims)) {
  strides_ = make_strides(dims_);
  std::size_t n = 1;
  for (int d : dims_) n *= d;
  data_.assign(n, cplx(0.0));
}

BoxGridC BoxGridC::sample(const PBox& box, const std::vector<int>& dims,
                          const std::function<cplx(const std::vector<double>&)>& f) {
  BoxGridC g(box, dims);
  std::size_t n = g.data_.size();
  parallel_for(n, [&](std::size_t flat) {
    std::size_t rem = flat;
    std::vector<double> p(dims.size());
    for (size_t i = 0; i < dims.size(); ++i) {
      int j = (int)(rem / g.strides_[i]);
      rem %= g.strides_[i];
      p[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * j / (dims[i] - 1);
    }
    g.data_[flat] = f(p);
  });
  return g;
}

cplx BoxGridC::fetch(std::vector<int> idx) const {
  // Linear ghost extension beyond the edges.
  for (size_t i = 0; i < dims_.size(); ++i) {
    if (idx[i] >= 0 && idx[i] < dims_[i]) continue;
    std::vector<int> a = idx, b = idx;
    if (idx[i] < 0) {
      a[i] = 0;
      b[i] = 1;
      double t = -idx[i];
      return fetch(a) * (1.0 + t) - fetch(b) * t;
    }
    a[i] = dims_[i] - 1;
    b[i] = dims_[i] - 2;
    double t = idx[i] - (dims_[i] - 1);
    return fetch(a) * (1.0 + t) - fetch(b) * t;
  }
  std::size_t flat = 0;
  for (size_t i = 0; i < dims_.size(); ++i) flat += strides_[i] * idx[i];
  return data_[flat];
}

namespace {
cplx box_rec(const BoxGridC& g, const std::vector<int>& base, const std::vector<double>& frac,
             int axis, std::vector<int>& idx, int deriv_axis, int ndim,
             const std::function<cplx(std::vector<int>&)>& fetch) {
  (void)g;
  double w[4];
  if (axis == deriv_axis)
    cr_dweights(frac[axis], w);
  else
    cr_weights(frac[axis], w);
  cplx acc = 0.0;
  for (int s = -1; s <= 2; ++s) {
    idx[axis] = base[axis] + s;
    cplx v;
    if (axis + 1 == ndim)
      v = fetch(idx);
    else
      v = box_rec(g, base, frac, axis + 1, idx, deriv_axis, ndim, fetch);
    acc += w[s + 1] * v;
  }
  return acc;
}
}  // namespace

cplx BoxGridC::eval(const std::vector<double>& p) const {
  int d = (int)dims_.size();
  std::vector<int> base(d);
  std::vector<double> frac(d);
  for (int i = 0; i < d; ++i) {
    double s = (p[i] - box_.lo[i]) / (box_.hi[i] - box_.lo[i]) * (dims_[i] - 1);
    base[i] = (int)std::floor(s);
    frac[i] = s - base[i];
  }
  std::vector<int> idx(d);
  std::function<cplx(std::vector<int>&)> f = [&](std::vector<int>& ix) { return fetch(ix); };
  return box_rec(*this, base, frac, 0, idx, -1, d, f);
}

cplx BoxGridC::deriv(const std::vector<double>& p, int axis) const {
  int d = (int)dims_.size();
  std::vector<int> base(d);
  std::vector<double> frac(d);
  for (int i = 0; i < d; ++i) {
    double s = (p[i] - box_.lo[i]) / (box_.hi[i] - box_.lo[i]) * (dims_[i] - 1);
    base[i] = (int)std::floor(s);
    frac[i] = s - base[i];
  }
  std::vector<int> idx(d);
  std::function<cplx(std::vector<int>&)> f = [&](std::vector<int>& ix) { return fetch(ix); };
  cplx v = box_rec(*this, base, frac, 0, idx, axis, d, f);
  return v * ((dims_[axis] - 1) / (box_.hi[axis] - box_.lo[axis]));
}

TrigPoly dft_trig(const GridFunction& f, int pdim, double drop_tol) {
  int d = f.dim();
  std::vector<int> kmax(d);
  for (int i = 0; i < d; ++i) kmax[i] = f.dims()[i] / 2;
  TrigPoly out(d, pdim, true);
  std::size_t n = f.size();

  // Enumerate wave vectors with |k_i| <= floor(N_i/2) (the +N/2 alias kept
  // once, on the positive side, halved for even N handled by keeping it as-is;
  // grids in use are generous relative to content so the alias is negligible).
  std::vector<int> k(d, 0);
  std::function<void(int)> rec = [&](int axis) {
    if (axis == d) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        auto x = f.node(j);
        double phase = 0.0;
        for (int i = 0; i < d; ++i) phase += k[i] * x[i];
        acc += f.data()[j] * std::polar(1.0, -TWO_PI * phase);
      }
      acc /= double(n);
      if (std::abs(acc) > drop_tol) out.set_mode_raw(k, PolyP::constant(pdim, acc));
      return;
    }
    for (k[axis] = -kmax[axis]; k[axis] <= kmax[axis]; ++k[axis]) rec(axis + 1);
    k[axis] = 0;
  };
  rec(0);
  return out;
}

TrigPoly smooth_approx(const GridFunction& f, double tau, int r, int pdim) {
  if (tau <= 0.0 || tau >= 1.0) throw KamError("smooth_approx: tau must be in (0,1)");
  if (r < 4) throw KamError("smooth_approx: regularity r >= 4 required");
  TrigPoly coeffs = dft_trig(f, pdim);

  // Resolution check: if the smoothing scale keeps near-Nyquist content alive
  // while the grid actually has energy there, the result would be aliased.
  int minN = 1 << 30;
  for (int d : f.dims()) minN = std::min(minN, d);
  double top_energy = 0.0, total = 0.0;
  for (auto& [k, h] : coeffs.terms()) {
    double a = std::abs(h.eval(std::vector<double>(pdim, 0.0)));
    total = std::max(total, a);
    int raw = 0;
    for (int v : k) raw = std::max(raw, std::abs(v));
    if (raw >= minN / 2) top_energy = std::max(top_energy, a);
  }
  if (tau * minN < 2.0 && total > 0.0 && top_energy > 1e-8 * total)
    throw ResolutionError("smooth_approx: grid too coarse for requested tau");

  TrigPoly out(f.dim(), pdim, true);
  for (auto& [k, h] : coeffs.terms()) {
    bool zero = true;
    for (int v : k)
      if (v != 0) zero = false;
    double damp = zero ? 1.0 : std::exp(-std::pow(tau * bracket_norm(k), 2));
    PolyP scaled = h * cplx(damp);
    if (!scaled.is_zero()) out.set_mode_raw(k, scaled);
  }
  return out;
}

}  // namespace kamlab
