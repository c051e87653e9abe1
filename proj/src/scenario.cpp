#include "kamlab/scenario.hpp"

#include <sstream>

namespace kamlab {

namespace {

// Pendulum-type slow mode with optional fast-angle / time coupling weights.
TrigPoly slow_forcing(int slow_harmonic, double wf, double wt) {
  TrigPoly h(3, 2);
  auto c = [&](cplx v) { return PolyP::constant(2, v); };
  int k = slow_harmonic;
  h.add_mode({k, 0, 0}, c(-0.5));
  if (wf != 0.0) {
    h.add_mode({k, 1, 0}, c(-0.25 * wf));
    h.add_mode({k, -1, 0}, c(-0.25 * wf));
  }
  if (wt != 0.0) {
    h.add_mode({k, 0, 1}, c(-0.25 * wt));
    h.add_mode({k, 0, -1}, c(-0.25 * wt));
  }
  return h;
}

TrigPoly normalized_c2(const TrigPoly& h, const std::pair<double, double>& arc) {
  PBox box{{-0.1, arc.first - 0.05}, {0.1, arc.second + 0.05}};
  double norm = cl_norm(h, 2, box).value;
  return h.scale(1.0 / norm);
}

Scenario base_scenario(double eps) {
  Scenario sc;
  sc.eps = eps;
  sc.M = EMat::Identity(2, 2);
  double s = 0.05 / 6.0;  // 3 K s = 0.05 at K = 2
  sc.K = 2;
  sc.beta = s / std::pow(eps, 0.25);
  return sc;
}

}  // namespace

std::shared_ptr<CompositeHam> Scenario::raw() const {
  auto h = std::make_shared<CompositeHam>(H0());
  h->add_trig(eps, H1);
  return h;
}

NormalFormParams Scenario::nf_params() const {
  NormalFormParams p;
  p.eps = eps;
  p.delta = delta;
  p.K = K;
  p.beta = beta;
  p.lambda_min = lambda_min;
  p.res_angle_samples = res_angle_samples;
  p.res_p_samples = res_p_samples;
  p.flow_step = flow_step;
  return p;
}

Scenario Scenario::s1(double eps) {
  Scenario sc = base_scenario(eps);
  sc.name = "S1";
  sc.H1 = normalized_c2(slow_forcing(1, 0.5, 0.25), sc.arc);
  return sc;
}

Scenario Scenario::s2(double eps) {
  Scenario sc = base_scenario(eps);
  sc.name = "S2";
  // Time-independent coupling keeps the slice map's separatrix symmetric.
  sc.H1 = normalized_c2(slow_forcing(1, 0.5, 0.0), sc.arc);
  return sc;
}

Scenario Scenario::s3(double eps) {
  Scenario sc = base_scenario(eps);
  sc.name = "S3";
  // Second slow harmonic: two peaks half a turn apart.
  sc.H1 = normalized_c2(slow_forcing(2, 0.5, 0.25), sc.arc);
  return sc;
}

// ---------------------------------------------------------------------------
// Config round-trip

std::string scenario_to_config(const Scenario& sc) {
  std::ostringstream os;
  os << "# kamlab scenario\n";
  os << "name = " << sc.name << "\n";
  os << "n = " << sc.n << "\n";
  os << "M = ";
  for (int i = 0; i < sc.M.rows(); ++i) {
    if (i) os << ";";
    for (int j = 0; j < sc.M.cols(); ++j) {
      if (j) os << ",";
      os << fmt_g17(sc.M(i, j));
    }
  }
  os << "\n";
  os << "H1 = " << trig_to_json(sc.H1) << "\n";
  os << "eps = " << fmt_g17(sc.eps) << "\n";
  os << "delta = " << fmt_g17(sc.delta) << "\n";
  os << "lambda_min = " << fmt_g17(sc.lambda_min) << "\n";
  os << "K = " << sc.K << "\n";
  os << "beta = " << fmt_g17(sc.beta) << "\n";
  os << "gamma = " << fmt_g17(sc.gamma) << "\n";
  os << "b = " << fmt_g17(sc.b) << "\n";
  os << "arc_lo = " << fmt_g17(sc.arc.first) << "\n";
  os << "arc_hi = " << fmt_g17(sc.arc.second) << "\n";
  os << "grid_ng = " << sc.grid_ng << "\n";
  os << "substeps = " << sc.substeps << "\n";
  os << "tol_wk = " << fmt_g17(sc.tol_wk) << "\n";
  os << "flow_step = " << fmt_g17(sc.flow_step) << "\n";
  os << "res_angle_samples = " << sc.res_angle_samples << "\n";
  os << "res_p_samples = " << sc.res_p_samples << "\n";
  os << "seed = " << sc.seed << "\n";
  return os.str();
}

Scenario scenario_from_config(const std::string& text) {
  Scenario sc;
  sc.M = EMat();
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& field, const std::string& why) -> void {
    throw ConfigError("config line " + std::to_string(lineno) + ", field '" + field +
                      "': " + why);
  };
  bool have_m = false, have_h1 = false;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      // Blank or comment-only lines are fine; anything else is malformed.
      bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
      if (!blank) fail("(none)", "expected 'key = value'");
      continue;
    }
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t\r");
      auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    auto num = [&](double& out) {
      try {
        std::size_t used = 0;
        out = std::stod(val, &used);
        if (used != val.size()) fail(key, "trailing characters in number");
      } catch (const std::logic_error&) {
        fail(key, "not a number: '" + val + "'");
      }
    };
    auto integer = [&](auto& out) {
      try {
        std::size_t used = 0;
        out = (std::remove_reference_t<decltype(out)>)std::stoll(val, &used);
        if (used != val.size()) fail(key, "trailing characters in integer");
      } catch (const std::logic_error&) {
        fail(key, "not an integer: '" + val + "'");
      }
    };
    if (key == "name") sc.name = val;
    else if (key == "n") integer(sc.n);
    else if (key == "M") {
      std::vector<std::vector<double>> rows;
      std::istringstream rs(val);
      std::string row;
      while (std::getline(rs, row, ';')) {
        rows.emplace_back();
        std::istringstream cs(row);
        std::string cell;
        while (std::getline(cs, cell, ',')) {
          try {
            rows.back().push_back(std::stod(cell));
          } catch (const std::logic_error&) {
            fail(key, "bad matrix entry '" + cell + "'");
          }
        }
      }
      if (rows.empty()) fail(key, "empty matrix");
      sc.M = EMat((int)rows.size(), (int)rows[0].size());
      for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) fail(key, "ragged matrix rows");
        for (size_t j = 0; j < rows[i].size(); ++j) sc.M(i, j) = rows[i][j];
      }
      have_m = true;
    } else if (key == "H1") {
      try {
        sc.H1 = trig_from_json(val);
      } catch (const std::exception& e) {
        fail(key, std::string("bad series: ") + e.what());
      }
      have_h1 = true;
    } else if (key == "eps") num(sc.eps);
    else if (key == "delta") num(sc.delta);
    else if (key == "lambda_min") num(sc.lambda_min);
    else if (key == "K") integer(sc.K);
    else if (key == "beta") num(sc.beta);
    else if (key == "gamma") num(sc.gamma);
    else if (key == "b") num(sc.b);
    else if (key == "arc_lo") num(sc.arc.first);
    else if (key == "arc_hi") num(sc.arc.second);
    else if (key == "grid_ng") integer(sc.grid_ng);
    else if (key == "substeps") integer(sc.substeps);
    else if (key == "tol_wk") num(sc.tol_wk);
    else if (key == "flow_step") num(sc.flow_step);
    else if (key == "res_angle_samples") integer(sc.res_angle_samples);
    else if (key == "res_p_samples") integer(sc.res_p_samples);
    else if (key == "seed") integer(sc.seed);
    else fail(key, "unknown key");
  }
  if (!have_m || !have_h1)
    throw ConfigError("config missing required field: " + std::string(!have_m ? "M" : "H1"));
  // eps = 0 is allowed: the pipeline degenerates to the integrable closed form.
  if (sc.eps < 0 || sc.delta <= 0 || sc.beta <= 0 || sc.tol_wk <= 0 || sc.lambda_min <= 0)
    throw ConfigError("config: physical parameters must be positive");
  if (sc.arc.first >= sc.arc.second) throw ConfigError("config field 'arc_lo/arc_hi': empty arc");
  return sc;
}

}  // namespace kamlab
