#pragma once
// Sampled function containers: periodic torus grids with cubic interpolation,
// box grids (for momentum-dependent coefficient tables) with cubic
// interpolation and derivatives, and the Fourier smoothing operator.

#include <complex>
#include <functional>
#include <vector>

#include "kamlab/trigpoly.hpp"
#include "kamlab/util.hpp"

namespace kamlab {

// Real-valued samples on a uniform grid over T^d, node j at j/N.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(std::vector<int> dims, double fill = 0.0);
  static GridFunction sample(const std::vector<int>& dims,
                             const std::function<double(const std::vector<double>&)>& f);

  int dim() const { return (int)dims_.size(); }
  const std::vector<int>& dims() const { return dims_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(const std::vector<int>& idx) const;
  std::vector<int> unindex(std::size_t flat) const;
  std::vector<double> node(std::size_t flat) const;
  double& at(const std::vector<int>& idx) { return data_[index(idx)]; }
  double at(const std::vector<int>& idx) const { return data_[index(idx)]; }

  // Periodic separable Catmull-Rom interpolation.
  double eval(const std::vector<double>& x) const;
  // Partial derivative of the interpolant along one axis.
  double deriv(const std::vector<double>& x, int axis) const;

  double max_abs() const;

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> strides_;
  std::vector<double> data_;
};

// Complex-valued samples on a uniform grid over a box, cubic interpolation
// with linear ghost extension at the edges; supports first derivatives.
class BoxGridC {
 public:
  BoxGridC() = default;
  BoxGridC(const PBox& box, std::vector<int> dims);
  static BoxGridC sample(const PBox& box, const std::vector<int>& dims,
                         const std::function<cplx(const std::vector<double>&)>& f);

  const PBox& box() const { return box_; }
  const std::vector<int>& dims() const { return dims_; }
  std::vector<cplx>& data() { return data_; }
  const std::vector<cplx>& data() const { return data_; }

  cplx eval(const std::vector<double>& p) const;
  cplx deriv(const std::vector<double>& p, int axis) const;

 private:
  cplx fetch(std::vector<int> idx) const;
  PBox box_;
  std::vector<int> dims_;
  std::vector<std::size_t> strides_;
  std::vector<cplx> data_;
};

// Discrete Fourier coefficients of a torus grid function, |k_i| <= dims_i/2.
// Returned as a TrigPoly with constant (p-independent) coefficients.
TrigPoly dft_trig(const GridFunction& f, int pdim, double drop_tol = 1e-14);

// Fourier smoothing: damp mode k by exp(-(tau*[k])^2), leave the mean mode
// untouched. r is the regularity the caller is entitled to (>= 4); used for
// the coarse-grid diagnostic only.
TrigPoly smooth_approx(const GridFunction& f, double tau, int r, int pdim = 2);

}  // namespace kamlab
