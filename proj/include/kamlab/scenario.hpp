#pragma once
// Scenario configuration: the desk-scale test systems, their physical and
// numerical parameters, and a flat key=value config format that round-trips
// bit-exactly.

#include <cstdint>

#include "kamlab/normalform.hpp"

namespace kamlab {

struct Scenario {
  std::string name = "S1";
  int n = 2;
  EMat M;       // quadratic H0
  TrigPoly H1;  // normalized perturbation
  double eps = 1e-3;
  double delta = 0.05;
  double lambda_min = 1e-3;
  int K = 2;
  double beta = 0.0;   // cutoff scale s = beta * eps^{1/4}
  double gamma = 1.0;  // fast-angle scaling of the cylinder chart
  double b = 0.5;      // smallness constant of the cylinder parameter window
  std::pair<double, double> arc{0.3, 0.45};

  // Numerical parameters.
  int grid_ng = 48;       // weak KAM grid nodes per angle
  int substeps = 8;       // action sub-steps per unit time
  double tol_wk = 1e-6;   // weak KAM fixed-point tolerance
  double flow_step = 0.05;
  int res_angle_samples = 12, res_p_samples = 13;
  std::uint64_t seed = 1;

  ConvexIntegrable H0() const { return ConvexIntegrable{M}; }
  std::shared_ptr<CompositeHam> raw() const;
  NormalFormParams nf_params() const;

  // Desk scenarios. s1: slow pendulum with fast/time coupling. s2: symmetric
  // slow pendulum (time-independent coupling) for heteroclinic-rich barriers.
  // s3: two-peak slow potential.
  static Scenario s1(double eps = 1e-3);
  static Scenario s2(double eps = 1e-3);
  static Scenario s3(double eps = 1e-3);
};

// Flat config format: "key = value" lines, '#' comments; matrices row-major
// comma-separated; the perturbation is embedded as JSON. Round-trips
// bit-exactly through %.17g formatting.
std::string scenario_to_config(const Scenario& sc);
Scenario scenario_from_config(const std::string& text);

}  // namespace kamlab
