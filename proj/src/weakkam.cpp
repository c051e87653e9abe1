#include "kamlab/weakkam.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace kamlab {

namespace {

constexpr double INF = std::numeric_limits<double>::infinity();

// Catmull-Rom weights for fraction s in [0,1).
inline void cr_weights(double s, double w[4]) {
  double s2 = s * s, s3 = s2 * s;
  w[0] = 0.5 * (-s3 + 2.0 * s2 - s);
  w[1] = 0.5 * (3.0 * s3 - 5.0 * s2 + 2.0);
  w[2] = 0.5 * (-3.0 * s3 + 4.0 * s2 + s);
  w[3] = 0.5 * (s3 - s2);
}

inline int wrap_idx(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

inline int clamp_idx(int i, int n) { return std::min(std::max(i, 0), n - 1); }

// Odometer increment over a multi-radix counter; returns false on wrap.
inline bool odo_next(std::vector<int>& idx, const std::vector<int>& dims) {
  for (int a = (int)dims.size() - 1; a >= 0; --a) {
    if (++idx[a] < dims[a]) return true;
    idx[a] = 0;
  }
  return false;
}

// The discrete Lax-Oleinik operator can lock onto an exact short cycle
// instead of a fixed point when the minimizing rotation is rational with
// respect to the grid. Detects a period-q tail (q in [2, max_period]) in a
// scalar iteration history; returns q, or 0 if none.
int cycle_period(const std::vector<double>& hist, double tol, int max_period) {
  int n = (int)hist.size();
  for (int q = 2; q <= max_period; ++q) {
    if (n < 4 * q) continue;
    bool ok = true;
    for (int i = n - 3 * q; i < n && ok; ++i) ok = std::fabs(hist[i] - hist[i - q]) < tol;
    if (ok) return q;
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// SliceCost

SliceCost::SliceCost(CostFn cost, EMat quad_form, int dim, int ng, double stencil_radius,
                     const PBox& dbox, int table_ny, int table_nd)
    : cost_(std::move(cost)),
      A_(std::move(quad_form)),
      dim_(dim),
      ng_(ng),
      dbox_(dbox),
      table_ny_(table_ny),
      table_nd_(table_nd) {
  if ((int)dbox_.lo.size() != dim_ || (int)dbox_.hi.size() != dim_)
    throw GeometryError("displacement box dimension mismatch");
  W_ = std::max(2, (int)std::lround(stencil_radius * ng_));
  tdims_.assign(2 * dim_, 0);
  for (int a = 0; a < dim_; ++a) tdims_[a] = table_ny_;
  for (int a = 0; a < dim_; ++a) tdims_[dim_ + a] = table_nd_;
  tstrides_.assign(2 * dim_, 1);
  for (int a = 2 * dim_ - 2; a >= 0; --a) tstrides_[a] = tstrides_[a + 1] * tdims_[a + 1];
  std::size_t total = tstrides_[0] * tdims_[0];
  table_.resize(total);
  std::vector<int> idx(2 * dim_, 0);
  Vec y(dim_), d(dim_), x1(dim_);
  std::size_t flat = 0;
  do {
    for (int a = 0; a < dim_; ++a) y[a] = double(idx[a]) / table_ny_;
    for (int a = 0; a < dim_; ++a)
      d[a] = dbox_.lo[a] + (dbox_.hi[a] - dbox_.lo[a]) * idx[dim_ + a] / (table_nd_ - 1);
    for (int a = 0; a < dim_; ++a) x1[a] = y[a] + d[a];
    table_[flat++] = cost_(y, x1) - l0(d);
  } while (odo_next(idx, tdims_));
  nnodes_ = 1;
  for (int a = 0; a < dim_; ++a) nnodes_ *= (std::size_t)ng_;
}

double SliceCost::l0(const Vec& d) const {
  double v = 0.0;
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) v += d[i] * A_(i, j) * d[j];
  return 0.5 * v;
}

double SliceCost::corr(const Vec& y, const Vec& d) const {
  // Separable cubic: periodic in the y axes, clamped in the d axes.
  int na = 2 * dim_;
  int base[8];
  double w[8][4];
  for (int a = 0; a < dim_; ++a) {
    double t = wrap01(y[a]) * table_ny_;
    int i0 = (int)std::floor(t);
    cr_weights(t - i0, w[a]);
    base[a] = i0;
  }
  for (int a = 0; a < dim_; ++a) {
    double span = dbox_.hi[a] - dbox_.lo[a];
    double t = (d[a] - dbox_.lo[a]) / span * (table_nd_ - 1);
    t = std::min(std::max(t, 0.0), double(table_nd_ - 1));
    int i0 = (int)std::floor(t);
    if (i0 > table_nd_ - 2) i0 = table_nd_ - 2;
    cr_weights(t - i0, w[dim_ + a]);
    base[dim_ + a] = i0;
  }
  double acc = 0.0;
  std::vector<int> k(na, 0);
  std::vector<int> four(na, 4);
  do {
    double wt = 1.0;
    std::size_t flat = 0;
    for (int a = 0; a < na; ++a) {
      wt *= w[a][k[a]];
      int idx = base[a] - 1 + k[a];
      idx = a < dim_ ? wrap_idx(idx, table_ny_) : clamp_idx(idx, table_nd_);
      flat += tstrides_[a] * idx;
    }
    acc += wt * table_[flat];
  } while (odo_next(k, four));
  return acc;
}

void SliceCost::check_window(const std::vector<int>& du) const {
  double hh = h();
  for (int a = 0; a < dim_; ++a) {
    double dmin = (du[a] - W_) * hh, dmax = (du[a] + W_) * hh;
    if (dmin < dbox_.lo[a] - 1e-12 || dmax > dbox_.hi[a] + 1e-12)
      throw ResolutionError("stencil window exceeds the displacement table");
  }
}

std::vector<int> SliceCost::offset_units(std::size_t o) const {
  int side = 2 * W_ + 1;
  std::vector<int> u(dim_);
  for (int a = dim_ - 1; a >= 0; --a) {
    u[a] = int(o % side) - W_;
    o /= side;
  }
  return u;
}

void SliceCost::freeze(const std::vector<int>& drift_units) {
  if (!frozen_.empty() && drift_units == drift_units_) return;
  check_window(drift_units);
  drift_units_ = drift_units;
  int side = 2 * W_ + 1;
  n_offsets_ = 1;
  for (int a = 0; a < dim_; ++a) n_offsets_ *= (std::size_t)side;
  frozen_.assign(n_offsets_ * nnodes_, 0.0);

  // Two-stage interpolation per offset: first collapse the d axes at the
  // fixed displacement (giving corr on the coarse y grid), then interpolate
  // that slice onto the solver nodes.
  std::size_t yslice = 1;
  for (int a = 0; a < dim_; ++a) yslice *= (std::size_t)table_ny_;
  std::vector<double> slice(yslice);
  double hh = h();
  std::vector<int> ou(dim_, 0), odims(dim_, side);
  std::size_t o = 0;
  // Per-axis node weights (shared by all offsets).
  std::vector<int> nbase(ng_);
  std::vector<std::array<double, 4>> nw(ng_);
  for (int i = 0; i < ng_; ++i) {
    double t = double(i) / ng_ * table_ny_;
    int i0 = (int)std::floor(t);
    cr_weights(t - i0, nw[i].data());
    nbase[i] = i0;
  }
  do {
    // d-axis weights for this offset.
    int dbase[4];
    double dw[4][4];
    for (int a = 0; a < dim_; ++a) {
      double dval = (drift_units_[a] + ou[a] - W_) * hh;
      double span = dbox_.hi[a] - dbox_.lo[a];
      double t = (dval - dbox_.lo[a]) / span * (table_nd_ - 1);
      t = std::min(std::max(t, 0.0), double(table_nd_ - 1));
      int i0 = (int)std::floor(t);
      if (i0 > table_nd_ - 2) i0 = table_nd_ - 2;
      cr_weights(t - i0, dw[a]);
      dbase[a] = i0;
    }
    // Collapse d axes.
    std::vector<int> yi(dim_, 0), ydims(dim_, table_ny_);
    std::size_t ys = 0;
    do {
      std::size_t ybase = 0;
      for (int a = 0; a < dim_; ++a) ybase += tstrides_[a] * yi[a];
      double acc = 0.0;
      std::vector<int> k(dim_, 0), four(dim_, 4);
      do {
        double wt = 1.0;
        std::size_t flat = ybase;
        for (int a = 0; a < dim_; ++a) {
          wt *= dw[a][k[a]];
          flat += tstrides_[dim_ + a] * clamp_idx(dbase[a] - 1 + k[a], table_nd_);
        }
        acc += wt * table_[flat];
      } while (odo_next(k, four));
      slice[ys++] = acc;
    } while (odo_next(yi, ydims));
    // Interpolate the y slice onto solver nodes.
    double* out = frozen_.data() + o * nnodes_;
    std::vector<std::size_t> ystr(dim_, 1);
    for (int a = dim_ - 2; a >= 0; --a) ystr[a] = ystr[a + 1] * table_ny_;
    std::vector<int> ni(dim_, 0), ndims(dim_, ng_);
    std::size_t f = 0;
    do {
      double acc = 0.0;
      std::vector<int> k(dim_, 0), four(dim_, 4);
      do {
        double wt = 1.0;
        std::size_t flat = 0;
        for (int a = 0; a < dim_; ++a) {
          wt *= nw[ni[a]][k[a]];
          flat += ystr[a] * wrap_idx(nbase[ni[a]] - 1 + k[a], table_ny_);
        }
        acc += wt * slice[flat];
      } while (odo_next(k, four));
      out[f++] = acc;
    } while (odo_next(ni, ndims));
    ++o;
  } while (odo_next(ou, odims));
}

void SliceCost::widen() {
  W_ += std::max(2, W_ / 2);
  if (drift_units_.empty()) return;
  std::vector<int> du = drift_units_;
  frozen_.clear();
  drift_units_.clear();
  freeze(du);  // re-validates the window against the displacement box
}

// ---------------------------------------------------------------------------
// Lax-Oleinik step

GridFunction lax_oleinik_step(SliceCost& cost, const GridFunction& u, const Vec& c,
                              double alpha, StepMode mode, std::vector<std::size_t>* argmin,
                              bool* boundary_hit) {
  const int dim = cost.dim(), N = cost.ng(), W = cost.window();
  const int side = 2 * W + 1;
  const std::size_t nn = cost.n_nodes(), no = cost.n_offsets();
  const auto& drift = cost.drift_units();
  if (drift.empty()) throw ResolutionError("stencil not frozen before stepping");
  const bool maxmode = mode == StepMode::CONJUGATE_MAX;
  const bool fwd = mode == StepMode::FORWARD_MIN;
  const double hh = cost.h();

  // Per-offset quadratic part and wrapped source-index maps per axis.
  std::vector<double> offc(no);
  {
    Vec d(dim);
    for (std::size_t o = 0; o < no; ++o) {
      auto un = cost.offset_units(o);
      double cd = 0.0;
      for (int a = 0; a < dim; ++a) {
        d[a] = (drift[a] + un[a]) * hh;
        cd += c[a] * d[a];
      }
      offc[o] = cost.l0(d) - cd;
    }
  }
  // wrapmap[a][su][i]: source index on axis a for shift unit su = unit + W.
  std::vector<std::vector<std::vector<int>>> wrapmap(dim);
  for (int a = 0; a < dim; ++a) {
    wrapmap[a].assign(side, std::vector<int>(N));
    for (int su = 0; su < side; ++su) {
      int t = drift[a] + su - W;
      int start = wrap_idx(fwd ? -t : t, N);
      for (int i = 0; i < N; ++i) wrapmap[a][su][i] = (start + i) % N;
    }
  }

  std::vector<double> best(nn, maxmode ? -INF : INF);
  std::vector<std::size_t> bo(nn, 0);
  const double* ud = u.data().data();

  auto scan_offset = [&](std::size_t o, const std::vector<int>& un) {
    const double* fr = cost.frozen_row(o);
    const double k = offc[o];
    if (dim == 2) {
      const std::vector<int>& rows = wrapmap[0][un[0] + W];
      const std::vector<int>& cols = wrapmap[1][un[1] + W];
      std::size_t f = 0;
      for (int i0 = 0; i0 < N; ++i0) {
        const std::size_t r = (std::size_t)rows[i0] * N;
        const std::size_t fr_r = (std::size_t)i0 * N;
        for (int i1 = 0; i1 < N; ++i1, ++f) {
          std::size_t g = r + cols[i1];
          double cand;
          if (fwd) cand = ud[g] + fr[g] + k;
          else if (!maxmode) cand = ud[g] + fr[fr_r + i1] + k;
          else cand = ud[g] - fr[fr_r + i1] - k;
          bool better = maxmode ? cand > best[f] : cand < best[f];
          if (better) {
            best[f] = cand;
            bo[f] = o;
          }
        }
      }
    } else {
      std::vector<int> ni(dim, 0), ndims(dim, N);
      std::size_t f = 0;
      do {
        std::size_t g = 0;
        for (int a = 0; a < dim; ++a)
          g = g * N + wrapmap[a][un[a] + W][ni[a]];
        double cand;
        if (fwd) cand = ud[g] + fr[g] + k;
        else if (!maxmode) cand = ud[g] + fr[f] + k;
        else cand = ud[g] - fr[f] - k;
        bool better = maxmode ? cand > best[f] : cand < best[f];
        if (better) {
          best[f] = cand;
          bo[f] = o;
        }
        ++f;
      } while (odo_next(ni, ndims));
    }
  };
  {
    std::vector<int> ou(dim, 0), odims(dim, side);
    std::size_t o = 0;
    std::vector<int> un(dim);
    do {
      for (int a = 0; a < dim; ++a) un[a] = ou[a] - W;
      scan_offset(o, un);
      ++o;
    } while (odo_next(ou, odims));
  }

  // Candidate value of node f at offset o (nodes only; used by the parabola).
  auto cand_at = [&](std::size_t f, std::size_t o, const std::vector<int>& fidx,
                     const std::vector<int>& un) {
    const double* fr = cost.frozen_row(o);
    std::size_t g = 0;
    for (int a = 0; a < dim; ++a) g = g * N + wrapmap[a][un[a] + W][fidx[a]];
    if (fwd) return ud[g] + fr[g] + offc[o];
    if (!maxmode) return ud[g] + fr[f] + offc[o];
    return ud[g] - fr[f] - offc[o];
  };

  // Sub-grid refinement: per-axis parabola through the stencil neighbors of
  // the best offset, then one continuous evaluation at the vertex.
  bool bhit = false;
  std::vector<std::size_t> ostride(dim, 1);
  for (int a = dim - 2; a >= 0; --a) ostride[a] = ostride[a + 1] * side;
  std::vector<int> fidx(dim, 0), fdims(dim, N);
  std::size_t f = 0;
  const double cap = hh;  // reject implausibly large sub-grid improvements
  Vec dstar(dim), x(dim), y(dim);
  do {
    std::size_t o = bo[f];
    auto un = cost.offset_units(o);
    bool edge = false;
    for (int a = 0; a < dim; ++a)
      if (std::abs(un[a]) >= W) edge = true;
    if (edge) {
      bhit = true;
    } else if (cost.refine()) {
      double v0 = best[f];
      bool moved = false;
      for (int a = 0; a < dim; ++a) {
        double vm = cand_at(f, o - ostride[a], fidx, [&] {
          auto t = un;
          --t[a];
          return t;
        }());
        double vp = cand_at(f, o + ostride[a], fidx, [&] {
          auto t = un;
          ++t[a];
          return t;
        }());
        double den = vp - 2.0 * v0 + vm;
        double delta = 0.0;
        if ((maxmode && den < 0.0) || (!maxmode && den > 0.0))
          delta = 0.5 * (vm - vp) / den * hh;
        delta = std::min(std::max(delta, -hh), hh);
        dstar[a] = (drift[a] + un[a]) * hh + delta;
        if (delta != 0.0) moved = true;
      }
      if (moved) {
        const PBox& db = cost.dbox();
        for (int a = 0; a < dim; ++a)
          dstar[a] = std::min(std::max(dstar[a], db.lo[a]), db.hi[a]);
        for (int a = 0; a < dim; ++a) x[a] = double(fidx[a]) / N;
        double cd = 0.0;
        for (int a = 0; a < dim; ++a) cd += c[a] * dstar[a];
        double val;
        if (fwd) {
          for (int a = 0; a < dim; ++a) y[a] = x[a] - dstar[a];
          val = u.eval(y) + cost.l0(dstar) - cd + cost.corr(y, dstar);
        } else {
          for (int a = 0; a < dim; ++a) y[a] = x[a] + dstar[a];
          double base = u.eval(y);
          double cc = cost.l0(dstar) - cd + cost.corr(x, dstar);
          val = maxmode ? base - cc : base + cc;
        }
        bool better = maxmode ? (val > v0 && val - v0 <= cap) : (val < v0 && v0 - val <= cap);
        if (better) best[f] = val;
      }
    }
    ++f;
  } while (odo_next(fidx, fdims));

  GridFunction res(std::vector<int>(dim, N));
  for (std::size_t i = 0; i < nn; ++i)
    res.data()[i] = best[i] + (maxmode ? -alpha : alpha);
  if (argmin) *argmin = std::move(bo);
  if (boundary_hit) *boundary_hit = bhit;
  return res;
}

// ---------------------------------------------------------------------------
// Solvers

namespace {

std::vector<int> drift_of(const SliceCost& cost, const Vec& c) {
  EVec cd = to_evec(c);
  EVec d = cost.quad().ldlt().solve(cd);
  std::vector<int> u(cost.dim());
  for (int a = 0; a < cost.dim(); ++a) u[a] = (int)std::lround(d[a] * cost.ng());
  return u;
}

double vec_min(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }
double vec_max(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

WeakKamField solve_weak_kam(SliceCost& cost, const Vec& c, const WeakKamParams& wp,
                            const GridFunction* seed) {
  cost.freeze(drift_of(cost, c));
  const std::size_t nn = cost.n_nodes();
  std::vector<int> dims(cost.dim(), cost.ng());
  WeakKamField out;
  out.c = c;

  for (int attempt = 0; attempt < 2; ++attempt) {
    GridFunction u = seed ? *seed : GridFunction(dims, 0.0);
    std::vector<double> hist;
    hist.reserve(256);
    double res = INF;
    bool tail = false, converged = false;
    double avg_sum = 0.0;
    int avg_count = 0;
    const int navg = 32;
    int iters = 0;
    std::vector<double> diff(nn);
    while (iters < wp.max_iters) {
      GridFunction tu = lax_oleinik_step(cost, u, c, 0.0, StepMode::FORWARD_MIN);
      for (std::size_t i = 0; i < nn; ++i) diff[i] = tu.data()[i] - u.data()[i];
      double mn = vec_min(diff), mx = vec_max(diff);
      res = mx - mn;
      hist.push_back(-mn);
      double shift = vec_min(tu.data());
      for (std::size_t i = 0; i < nn; ++i) tu.data()[i] -= shift;
      u = std::move(tu);
      ++iters;
      if (!tail && res < wp.tol && iters >= 2) tail = true;
      if (tail) {
        avg_sum += hist.back();
        if (++avg_count >= navg) {
          converged = true;
          break;
        }
      }
    }
    double alpha;
    int q = converged ? 0 : cycle_period(hist, wp.tol, 8);
    if (q > 0) {
      // Settled onto an exact q-cycle of the operator: accept it when the
      // in-cycle spread stays at discretization scale, with the cycle mean
      // as the critical value.
      double mn = INF, mx = -INF, sum = 0.0;
      for (int i = (int)hist.size() - q; i < (int)hist.size(); ++i) {
        mn = std::min(mn, hist[i]);
        mx = std::max(mx, hist[i]);
        sum += hist[i];
      }
      if (mx - mn <= 100.0 * wp.tol) {
        converged = true;
        alpha = sum / q;
      }
    }
    if (converged && q == 0) {
      alpha = avg_sum / avg_count;
    } else if (!converged) {
      // Cesaro mean over the second half of the iteration.
      std::size_t half = hist.size() / 2;
      alpha = std::accumulate(hist.begin() + half, hist.end(), 0.0) / (hist.size() - half);
    }
    // Verification step: back-pointers and boundary detection on the
    // converged field.
    bool bhit = false;
    std::vector<std::size_t> argmin;
    GridFunction tu = lax_oleinik_step(cost, u, c, 0.0, StepMode::FORWARD_MIN, &argmin, &bhit);
    if (bhit && attempt == 0) {
      cost.widen();
      continue;
    }
    if (bhit)
      throw ResolutionError("weak KAM minimizer pinned at the widened stencil boundary");
    out.u = std::move(u);
    out.alpha = alpha;
    out.residual = res;
    out.iters = iters;
    out.alpha_history = std::move(hist);
    out.argmin_offset = std::move(argmin);
    out.drift_units = cost.drift_units();
    out.converged = converged;
    return out;
  }
  throw ResolutionError("weak KAM solve failed");  // unreachable
}

WeakKamField solve_backward(SliceCost& cost, const WeakKamField& fwd, const WeakKamParams& wp) {
  cost.freeze(fwd.drift_units);
  const std::size_t nn = cost.n_nodes();
  GridFunction u = fwd.u;
  WeakKamField out;
  out.c = fwd.c;
  out.backward = true;
  out.alpha = fwd.alpha;
  std::vector<double> diff(nn);
  double res = INF;
  int iters = 0;
  bool converged = false;
  // Ring of recent iterates: the conjugate iteration inherits the forward
  // solve's rational-rotation cycles, so convergence is measured on the
  // q-step residual (iterates one cycle apart) for q up to 8; q = 1 is the
  // plain fixed-point test.
  const int max_q = 8;
  int calm = 0;
  std::vector<GridFunction> ring;
  while (iters < wp.max_iters) {
    GridFunction tu = lax_oleinik_step(cost, u, fwd.c, fwd.alpha, StepMode::CONJUGATE_MAX);
    for (std::size_t i = 0; i < nn; ++i) diff[i] = tu.data()[i] - u.data()[i];
    double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / nn;
    res = vec_max(diff) - vec_min(diff);
    for (std::size_t i = 0; i < nn; ++i) tu.data()[i] -= mean;
    u = std::move(tu);
    ring.push_back(u);
    if ((int)ring.size() > max_q + 1) ring.erase(ring.begin());
    ++iters;
    int q_hit = 0;
    double wander = INF;
    if (iters >= 2) {
      for (int q = 1; q < (int)ring.size(); ++q) {
        const auto& old = ring[ring.size() - 1 - q].data();
        double mn = INF, mx = -INF;
        for (std::size_t i = 0; i < nn; ++i) {
          double d = u.data()[i] - old[i];
          mn = std::min(mn, d);
          mx = std::max(mx, d);
        }
        wander = std::min(wander, mx - mn);
        if (!q_hit && mx - mn < wp.tol) q_hit = q;
      }
    }
    // The attractor can also be quasi-periodic (near-period with a slow
    // modulation that never closes exactly); sustained wander at
    // discretization scale counts as converged, with the window average as
    // the representative conjugate solution.
    const double wander_cap = std::max(100.0 * wp.tol, 1.0 / double(wp.ng * wp.ng));
    if (wander < wander_cap) ++calm; else calm = 0;
    // Give the exact fixed-point/cycle test a long head start before
    // accepting bounded wander, so a slowly decaying transient is not
    // mistaken for the attractor.
    if (q_hit || (calm >= 64 && iters >= 1024)) {
      int navg = q_hit ? q_hit : (int)ring.size();
      if (navg > 1) {
        GridFunction avg = ring[ring.size() - navg];
        for (int q = 1; q < navg; ++q) {
          const auto& v = ring[ring.size() - navg + q].data();
          for (std::size_t i = 0; i < nn; ++i) avg.data()[i] += v[i];
        }
        for (std::size_t i = 0; i < nn; ++i) avg.data()[i] /= navg;
        u = std::move(avg);
        res = wander;
      }
      converged = true;
      break;
    }
  }
  std::vector<std::size_t> argmin;
  GridFunction tu =
      lax_oleinik_step(cost, u, fwd.c, fwd.alpha, StepMode::CONJUGATE_MAX, &argmin, nullptr);
  out.u = std::move(u);
  out.residual = res;
  out.iters = iters;
  out.argmin_offset = std::move(argmin);
  out.drift_units = cost.drift_units();
  out.converged = converged;
  return out;
}

// ---------------------------------------------------------------------------
// Measurements

double oscillation(const GridFunction& u) { return vec_max(u.data()) - vec_min(u.data()); }

double lipschitz_grid(const GridFunction& u) {
  double lip = 0.0;
  const auto& dims = u.dims();
  for (std::size_t f = 0; f < u.size(); ++f) {
    auto idx = u.unindex(f);
    for (int a = 0; a < u.dim(); ++a) {
      auto j = idx;
      j[a] = (j[a] + 1) % dims[a];
      lip = std::max(lip, std::fabs(u.at(j) - u.data()[f]) * dims[a]);
    }
  }
  return lip;
}

double semiconcavity_grid(const GridFunction& u) {
  double sc = 0.0;
  const auto& dims = u.dims();
  for (std::size_t f = 0; f < u.size(); ++f) {
    auto idx = u.unindex(f);
    for (int a = 0; a < u.dim(); ++a) {
      auto jp = idx, jm = idx;
      jp[a] = (jp[a] + 1) % dims[a];
      jm[a] = (jm[a] + dims[a] - 1) % dims[a];
      double d2 = (u.at(jp) + u.at(jm) - 2.0 * u.data()[f]) * dims[a] * dims[a];
      sc = std::max(sc, d2);
    }
  }
  return sc;
}

// ---------------------------------------------------------------------------
// Calibrated sets

InvariantSetSample extract_calibrated(SliceCost& cost, const GeneratingFn& G,
                                      const WeakKamField& fwd, const WeakKamField& bwd,
                                      const WeakKamParams& wp, double ktol,
                                      const CoverLift* cover, bool refine_p) {
  const int dim = cost.dim(), N = cost.ng();
  const double hh = cost.h();
  InvariantSetSample s;
  s.kind = InvariantSetSample::AUBRY;
  s.c = fwd.c;
  std::vector<double> gap(cost.n_nodes());
  for (std::size_t f = 0; f < gap.size(); ++f) gap[f] = fwd.u.data()[f] - bwd.u.data()[f];
  double m = vec_min(gap);
  Vec rot(dim, 0.0);
  for (std::size_t f = 0; f < gap.size(); ++f) {
    if (gap[f] > m + ktol * wp.tol) continue;
    auto idx = fwd.u.unindex(f);
    Vec th(dim), d(dim), y(dim);
    auto un = cost.offset_units(fwd.argmin_offset[f]);
    for (int a = 0; a < dim; ++a) {
      th[a] = double(idx[a]) / N;
      d[a] = (fwd.drift_units[a] + un[a]) * hh;
      y[a] = th[a] - d[a];
    }
    if (refine_p) {
      // Slide the displacement to the parabola vertex of the one-step
      // closure so the sampled momentum is not locked to the node lattice.
      auto closure = [&](const Vec& dd) {
        Vec yy(dim);
        double cd = 0.0;
        for (int a = 0; a < dim; ++a) {
          yy[a] = th[a] - dd[a];
          cd += fwd.c[a] * dd[a];
        }
        return fwd.u.eval(yy) + cost.full(yy, dd) - cd;
      };
      const PBox& db = cost.dbox();
      for (int a = 0; a < dim; ++a) {
        Vec dm = d, dp = d;
        dm[a] -= hh;
        dp[a] += hh;
        if (dm[a] < db.lo[a] || dp[a] > db.hi[a]) continue;
        double vm = closure(dm), v0 = closure(d), vp = closure(dp);
        double den = vp - 2.0 * v0 + vm;
        if (den > 0.0) {
          double delta = 0.5 * (vm - vp) / den * hh;
          d[a] += std::min(std::max(delta, -hh), hh);
        }
      }
      for (int a = 0; a < dim; ++a) y[a] = th[a] - d[a];
    }
    // Physical arrival momentum of the calibrated step, evaluated on the
    // base torus when the grid lives on a cover.
    Vec x0 = y, x1 = th, p1;
    if (cover) {
      Vec b0 = cover->xi(y);
      Vec bd(dim);
      for (int a = 0; a < dim; ++a) bd[a] = d[a] * cover->factor[a];
      x0 = b0;
      x1.resize(dim);
      for (int a = 0; a < dim; ++a) x1[a] = b0[a] + bd[a];
    }
    G.value(x0, x1, nullptr, &p1);
    s.theta.push_back(th);
    s.p.push_back(p1);
    for (int a = 0; a < dim; ++a) rot[a] += d[a];
  }
  if (!s.theta.empty())
    for (int a = 0; a < dim; ++a) rot[a] /= (double)s.theta.size();
  s.rotation = rot;
  // Vertical Lipschitz constant of the momentum graph over well-separated
  // sample pairs.
  double lip = 0.0;
  for (std::size_t i = 0; i < s.theta.size(); ++i)
    for (std::size_t j = i + 1; j < s.theta.size(); ++j) {
      double dist2 = 0.0, dp2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        double dd = circ_diff(s.theta[i][a], s.theta[j][a]);
        dist2 += dd * dd;
        double pp = s.p[i][a] - s.p[j][a];
        dp2 += pp * pp;
      }
      double dist = std::sqrt(dist2);
      if (dist < 2.0 * hh) continue;
      lip = std::max(lip, std::sqrt(dp2) / dist);
    }
  s.graph_lip = lip;
  return s;
}

LocalizationReport localization_check(const InvariantSetSample& s,
                                      const std::vector<double>& theta_peaks, const Vec& c,
                                      double delta, double eps) {
  LocalizationReport rep;
  rep.slow_radius = std::pow(delta, 0.2);
  rep.p_radius = std::sqrt(eps) * std::pow(delta, 1.0 / 16.0);
  int first_peak = -1;
  bool one_sided = true;
  double ws = 0.0, wpx = 0.0;
  for (std::size_t i = 0; i < s.theta.size(); ++i) {
    double dslow = INF;
    int nearest = 0;
    for (std::size_t k = 0; k < theta_peaks.size(); ++k) {
      double dd = circ_dist(s.theta[i][0], theta_peaks[k]);
      if (dd < dslow) {
        dslow = dd;
        nearest = (int)k;
      }
    }
    if (first_peak < 0) first_peak = nearest;
    else if (nearest != first_peak) one_sided = false;
    ws = std::max(ws, dslow / rep.slow_radius);
    double dp2 = 0.0;
    for (std::size_t a = 0; a < s.p[i].size(); ++a) {
      double pp = s.p[i][a] - c[a];
      dp2 += pp * pp;
    }
    wpx = std::max(wpx, std::sqrt(dp2) / rep.p_radius);
  }
  rep.worst_slow_excess = ws;
  rep.worst_p_excess = wpx;
  rep.one_sided = one_sided;
  rep.pass = !s.theta.empty() && ws <= 1.0 && wpx <= 1.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Peierls barriers

GridFunction peierls_barrier(SliceCost& cost, const Vec& c, double alpha, const Vec& zeta,
                             int direction, const WeakKamParams& wp, bool* converged) {
  cost.freeze(drift_of(cost, c));
  const int dim = cost.dim(), N = cost.ng();
  GridFunction u(std::vector<int>(dim, N), wp.seed_big);
  std::vector<int> zi(dim);
  for (int a = 0; a < dim; ++a) zi[a] = wrap_idx((int)std::lround(zeta[a] * N), N);
  u.at(zi) = 0.0;
  StepMode mode = direction > 0 ? StepMode::FORWARD_MIN : StepMode::TRANSPOSE_MIN;
  bool ok = false;
  const std::size_t nn = cost.n_nodes();
  for (int k = 0; k < wp.max_iters; ++k) {
    GridFunction tu = lax_oleinik_step(cost, u, c, alpha, mode);
    double res = 0.0;
    for (std::size_t i = 0; i < nn; ++i)
      res = std::max(res, std::fabs(tu.data()[i] - u.data()[i]));
    u = std::move(tu);
    if (res < wp.tol && k >= 2) {
      ok = true;
      break;
    }
  }
  if (converged) *converged = ok;
  return u;
}

BarrierField barrier_fields(SliceCost& cost, const Vec& c, double alpha, const Vec& zeta1,
                            const Vec& zeta2, const WeakKamParams& wp,
                            double exclusion_radius) {
  BarrierField bf;
  bf.zeta1 = zeta1;
  bf.zeta2 = zeta2;
  bool ok1, ok2, ok3, ok4;
  bf.h1_fwd = peierls_barrier(cost, c, alpha, zeta1, +1, wp, &ok1);
  bf.h1_bwd = peierls_barrier(cost, c, alpha, zeta1, -1, wp, &ok2);
  bf.h2_fwd = peierls_barrier(cost, c, alpha, zeta2, +1, wp, &ok3);
  bf.h2_bwd = peierls_barrier(cost, c, alpha, zeta2, -1, wp, &ok4);
  bf.converged = ok1 && ok2 && ok3 && ok4;
  bf.h_z1z2 = bf.h1_fwd.eval(zeta2);
  bf.h_z2z1 = bf.h2_fwd.eval(zeta1);
  const std::size_t nn = cost.n_nodes();
  const int N = cost.ng();
  bf.b_minus = GridFunction(bf.h1_fwd.dims());
  bf.b_plus = GridFunction(bf.h1_fwd.dims());
  for (std::size_t f = 0; f < nn; ++f) {
    bf.b_minus.data()[f] = bf.h1_fwd.data()[f] + bf.h2_bwd.data()[f] - bf.h_z1z2;
    bf.b_plus.data()[f] = bf.h2_fwd.data()[f] + bf.h1_bwd.data()[f] - bf.h_z2z1;
  }
  bf.detect_tol = 3.0 * wp.tol;
  for (std::size_t f = 0; f < nn; ++f) {
    auto idx = bf.b_minus.unindex(f);
    double ths = double(idx[0]) / N;
    double dcls = std::min(circ_dist(ths, zeta1[0]), circ_dist(ths, zeta2[0]));
    if (dcls <= exclusion_radius) continue;
    Vec th(cost.dim());
    for (int a = 0; a < cost.dim(); ++a) th[a] = double(idx[a]) / N;
    if (bf.b_minus.data()[f] < bf.detect_tol) bf.H12.push_back(th);
    if (bf.b_plus.data()[f] < bf.detect_tol) bf.H21.push_back(th);
  }
  return bf;
}

HolderReport barrier_holder_probe(const std::vector<Vec>& cs,
                                  const std::vector<GridFunction>& barriers,
                                  const std::vector<double>& loop_integrals,
                                  const std::vector<double>& circle_pf) {
  HolderReport rep;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < cs.size(); ++i)
    for (std::size_t j = i + 1; j < cs.size(); ++j) {
      double dc2 = 0.0;
      for (std::size_t a = 0; a < cs[i].size(); ++a) {
        double dd = cs[i][a] - cs[j][a];
        dc2 += dd * dd;
      }
      double dc = std::sqrt(dc2);
      double db = 0.0;
      for (std::size_t f = 0; f < barriers[i].size(); ++f)
        db = std::max(db, std::fabs(barriers[i].data()[f] - barriers[j].data()[f]));
      if (dc <= 0.0 || db <= 0.0) continue;
      xs.push_back(std::log(dc));
      ys.push_back(std::log(db));
      if (i < loop_integrals.size() && j < loop_integrals.size()) {
        double lhs = std::fabs(loop_integrals[i] - loop_integrals[j]);
        double rhs = std::fabs(circle_pf[i] - circle_pf[j]);
        rep.worst_area_error = std::max(rep.worst_area_error, std::fabs(lhs - rhs));
      }
    }
  rep.pairs = (int)xs.size();
  rep.enough_data = rep.pairs >= 3;
  if (!rep.enough_data) return rep;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sx += xs[k];
    sy += ys[k];
    sxx += xs[k] * xs[k];
    sxy += xs[k] * ys[k];
  }
  double n = (double)xs.size();
  double den = n * sxx - sx * sx;
  rep.gamma = den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
  double a0 = (sy - rep.gamma * sx) / n;
  for (std::size_t k = 0; k < xs.size(); ++k)
    rep.fit_residual = std::max(rep.fit_residual, std::fabs(ys[k] - a0 - rep.gamma * xs[k]));
  return rep;
}

double local_alpha(SliceCost& cost_penalized, const Vec& c, const WeakKamParams& wp) {
  return solve_weak_kam(cost_penalized, c, wp).alpha;
}

SliceCost::CostFn penalized_cost(SliceCost::CostFn base, int axis, double center, double lam,
                                 double amp) {
  AngleBump bump;
  bump.axis = axis;
  bump.center = center;
  bump.inner = 2.0 * lam;
  bump.outer = 3.0 * lam;
  bump.amp = amp;
  // The penalty is charged at the departure point only: orbit sums (hence
  // critical values) are unchanged, and the displacement axes of the
  // correction table stay smooth.
  return [base = std::move(base), bump](const Vec& x0, const Vec& x1) {
    return base(x0, x1) + bump.value(x0);
  };
}

}  // namespace kamlab
