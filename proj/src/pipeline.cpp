#include "kamlab/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace kamlab {

using njson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// ArtifactSet

ArtifactSet::ArtifactSet(std::string outdir) : dir_(std::move(outdir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir_ + "': " + ec.message());
}

void ArtifactSet::write(const std::string& name, const std::string& content) {
  const std::filesystem::path path = std::filesystem::path(dir_) / name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write artifact '" + path.string() + "'");
  os << content;
  os.close();
  for (auto& e : entries_) {
    if (e.first == name) {
      e.second = hash_hex(content);
      return;
    }
  }
  entries_.emplace_back(name, hash_hex(content));
}

void ArtifactSet::write_manifest(const Scenario& sc, const std::vector<StageResult>& stages) {
  njson j;
  j["scenario"] = sc.name;
  j["config_hash"] = hash_hex(scenario_to_config(sc));
  j["seed"] = sc.seed;
  njson st = njson::array();
  for (const auto& s : stages)
    st.push_back({{"name", s.name}, {"ran", s.ran}, {"ok", s.ok}, {"detail", s.detail}});
  j["stages"] = st;
  njson files = njson::array();
  for (const auto& e : entries_) files.push_back({{"name", e.first}, {"fnv1a", e.second}});
  j["files"] = files;
  write("manifest.json", j.dump(2) + "\n");
}

bool all_ok(const std::vector<StageResult>& stages) {
  for (const auto& s : stages)
    if (s.ran && !s.ok) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

double quad_value(const EMat& m, const Vec& c) {
  EVec e = to_evec(c);
  return 0.5 * e.dot(m * e);
}

// Largest circular gap of a sample of angles in [0, 1).
double circular_gap(std::vector<double> v) {
  if (v.empty()) return 1.0;
  for (double& x : v) x = wrap01(x);
  std::sort(v.begin(), v.end());
  double gap = v.front() + 1.0 - v.back();
  for (std::size_t i = 1; i < v.size(); ++i) gap = std::max(gap, v[i] - v[i - 1]);
  return gap;
}

std::vector<double> branch_peaks(const AveragedPotential& Z, double pf) {
  std::vector<double> peaks;
  for (std::size_t b = 0; b < Z.branches.size(); ++b)
    peaks.push_back(Z.theta_star(pf, (int)b));
  return peaks;
}

njson sample_json(const InvariantSetSample& s, std::size_t cap = 64) {
  njson arr = njson::array();
  const std::size_t stride = std::max<std::size_t>(1, s.theta.size() / cap);
  for (std::size_t i = 0; i < s.theta.size(); i += stride)
    arr.push_back({{"theta", s.theta[i]}, {"p", s.p[i]}});
  return arr;
}

}  // namespace

// ---------------------------------------------------------------------------
// Slow slice

SlowSlice slow_slice(const Scenario& sc, const AveragedPotential& Z, double pf) {
  SlowSlice out;
  out.pf = pf;
  ResonanceFrame frame(sc.H0());
  const EVec pst = frame.p_star(pf);
  const Vec pv(pst.data(), pst.data() + pst.size());

  // Freeze the momentum dependence and keep only slow-angle modes.
  TrigPoly zs(1, 1, true, Z.Z.degree_cap());
  for (const auto& [k, h] : Z.Z.terms()) {
    bool slow_only = true;
    for (std::size_t i = 1; i < k.size(); ++i) slow_only = slow_only && k[i] == 0;
    if (!slow_only) continue;
    zs.set_mode_raw({k[0]}, PolyP::constant(1, h.eval(pv)));
  }
  out.Zs = zs;

  double zmax = -1e300;
  for (int i = 0; i < 512; ++i)
    zmax = std::max(zmax, zs.eval({i / 512.0}, {0.0}));
  out.zmax = zmax;

  EMat mss = sc.M.topLeftCorner(sc.n - 1, sc.n - 1);
  auto ham = std::make_shared<CompositeHam>(ConvexIntegrable(mss));
  ham->add_trig(sc.eps, zs);
  out.ham = ham;
  out.G = std::make_shared<GeneratingFn>(ham, sc.substeps);
  return out;
}

// ---------------------------------------------------------------------------
// Cylinder stage

CylinderStage build_cylinder(const Scenario& sc, const NormalFormResult& nf) {
  CylinderStage st;
  st.lambda = nf.Z.lambda;
  st.delta_meas = nf.R_C2;
  const double D = sc.H0().D();
  st.chart = std::make_shared<HypChart>(nf.model, sc.H0(), nf.Z, sc.eps, sc.gamma);

  const double lo = sc.arc.first, hi = sc.arc.second;
  st.frame = slowfast_frame(*st.chart, linspace(lo + 0.01, hi - 0.01, 9), st.lambda, D);

  st.window = rho_window(sc.b, st.lambda, st.delta_meas, sc.eps);
  st.rho = std::clamp(st.window.first, 0.04, 0.06);
  st.window_ok = st.rho >= st.window.first && st.rho <= st.window.second;

  const double se = std::sqrt(sc.eps);
  BlockGeometry geo;
  geo.rho_u = geo.rho_s = st.rho;
  geo.center = {{0.0, sc.gamma, 8, true},
                {(lo + 0.02) / se, (hi - 0.02) / se, 7, false},
                {0.0, 1.0, 4, true}};
  geo.sigma = std::sqrt(sc.delta);
  geo.collar_axis = 1;
  geo.hyp_samples = 3;
  geo.fd_step = 1e-3;
  st.sigma = geo.sigma;

  HypChart& chart = *st.chart;
  FieldFn F = [&chart](const Vec& z) { return chart.field(z); };
  st.cert = verify_block(F, geo);

  if (st.cert.pass || st.cert.graphs_only) {
    GraphTransformParams gp;
    gp.h = 0.25 / std::sqrt(sc.eps * st.lambda);
    gp.flow_substeps = 10;
    gp.tol = 2e-7;
    gp.mesh_hyp = 5;
    gp.iters_max = 120;
    st.graph = graph_transform(F, geo, gp);
    st.measure = cylinder_measure(chart, st.graph);
    st.ok = st.graph.converged;
  }
  return st;
}

// ---------------------------------------------------------------------------
// Weak KAM sweep

WeakKamSweep sweep_weakkam(const Scenario& sc, const NormalFormResult& nf, int n_c,
                           int ng_override) {
  WeakKamSweep sw;
  const int ng = ng_override > 0 ? ng_override : sc.grid_ng;
  sw.G = std::make_shared<GeneratingFn>(nf.model, sc.substeps);
  auto Gp = sw.G;

  // The transformed model keeps O(1) momentum-Hessian wiggle in thin bands
  // around the secondary resonance lines k_s p_s + k_f p_f = 0 (generator
  // cutoff plateaus), so the displacement box must stay clear of them: cap
  // the stencil radius so |k_s d_s| stays below the smallest fast drift.
  int k_slow = 1;
  for (const auto& [k, h] : sc.H1.terms())
    if (k.size() >= 2 && (k[1] != 0 || (k.size() > 2 && k[2] != 0)))
      k_slow = std::max(k_slow, std::abs(k[0]));
  const double lo = sc.arc.first, hi = sc.arc.second;
  const double stencil_cap = std::min(0.35, (lo - 0.04) / (k_slow + 1));
  // The solver rounds the stencil to whole grid steps, so quantize downward
  // here too: otherwise the rounded window can overrun the table box.
  const int stencil_units = std::max(2, (int)std::floor(stencil_cap * ng));
  const double stencil_r = double(stencil_units) / ng;
  PBox dbox{{-(stencil_r + 0.005), lo - stencil_r - 0.005},
            {stencil_r + 0.005, hi + stencil_r + 0.005}};
  EMat A = sc.M.inverse();
  sw.cost = std::make_shared<SliceCost>(
      [Gp](const Vec& a, const Vec& b) { return Gp->value(a, b); }, A, sc.n, ng, stencil_r,
      dbox, 24, 17);

  WeakKamParams wp;
  wp.ng = ng;
  wp.tol = sc.tol_wk;
  wp.stencil_radius = stencil_r;

  GridFunction warm;
  bool have_warm = false;
  sw.ok = true;
  for (double pf : linspace(lo + 0.015, hi - 0.015, n_c)) {
    SweepPoint pt;
    pt.pf = pf;
    Vec c(sc.n, 0.0);
    c[sc.n - 1] = pf;
    WeakKamField fwd = solve_weak_kam(*sw.cost, c, wp, have_warm ? &warm : nullptr);
    WeakKamField bwd = solve_backward(*sw.cost, fwd, wp);
    warm = fwd.u;
    have_warm = true;

    pt.alpha = fwd.alpha;
    pt.converged = fwd.converged && bwd.converged;
    pt.osc_u = oscillation(fwd.u);
    pt.sample = extract_calibrated(*sw.cost, *Gp, fwd, bwd, wp);
    pt.graph_lip = pt.sample.graph_lip;

    SlowSlice sl = slow_slice(sc, nf.Z, pf);
    pt.alpha_model = quad_value(sc.M, c) + sc.eps * sl.zmax;
    pt.loc = localization_check(pt.sample, branch_peaks(nf.Z, pf), c, sc.delta, sc.eps);

    std::vector<double> fast;
    for (const Vec& th : pt.sample.theta) fast.push_back(th[sc.n - 1]);
    pt.fast_gap = circular_gap(fast);
    pt.classification = pt.fast_gap > 3.0 / ng ? "partial-fast-support" : "invariant-circle";

    sw.ok = sw.ok && pt.converged;
    sw.points.push_back(std::move(pt));
  }
  return sw;
}

// ---------------------------------------------------------------------------
// Barriers

BarrierStage build_barriers(const Scenario& sc, const AveragedPotential& Z, double pf,
                            double c_slow, int ng) {
  BarrierStage st;
  st.ng = ng;
  st.slice = slow_slice(sc, Z, pf);
  auto G = st.slice.G;
  CoverLift cover{{2.0}};
  st.c_cover = cover.xi_star({c_slow})[0];

  EMat mss = sc.M.topLeftCorner(sc.n - 1, sc.n - 1);
  EMat A = 4.0 * mss.inverse();
  SliceCost cost([G, cover](const Vec& a, const Vec& b) { return cover.cost(*G, a, b); }, A,
                 1, ng, 0.3, PBox{{-0.45}, {0.45}}, ng, 25);

  WeakKamParams wp;
  wp.ng = ng;
  wp.tol = sc.tol_wk;

  WeakKamField f = solve_weak_kam(cost, {st.c_cover}, wp);
  st.alpha = f.alpha;

  // Static classes: the lifted dominant maximizer and its deck translate.
  const double peak = Z.theta_star(pf, 0) / 2.0;
  Vec zeta1{peak}, zeta2{cover.deck(zeta1)[0]};
  st.field = barrier_fields(cost, {st.c_cover}, st.alpha, zeta1, zeta2, wp, 0.1);
  st.ok = st.field.converged && f.converged;
  return st;
}

// ---------------------------------------------------------------------------
// Bifurcation sweep

BifurcationSweep sweep_bifurcation(const Scenario& sc, const AveragedPotential& Z, double pf,
                                   std::pair<double, double> c_range, int n_c, double tilt_s) {
  if (Z.branches.size() < 2)
    throw ConfigError("bifurcation sweep needs a two-peak averaged potential");
  BifurcationSweep sw;
  sw.tilt_s = tilt_s;
  SlowSlice sl = slow_slice(sc, Z, pf);
  auto G = sl.G;
  SliceCost::CostFn base = [G](const Vec& a, const Vec& b) { return G->value(a, b); };

  const double th1 = Z.theta_star(pf, 0), th2 = Z.theta_star(pf, 1);
  const double lam = 0.06;
  const int ng = sc.grid_ng;
  EMat A = sc.M.topLeftCorner(sc.n - 1, sc.n - 1).inverse();
  PBox dbox{{-0.75}, {0.75}};

  // Local systems: the penalty excludes the opposite peak. The tilt lowers
  // the Hamiltonian on a plateau around peak 1 (cost raised at departure), so
  // local value 1 drops by exactly s while local value 2 is untouched.
  AngleBump tilt_bump;
  tilt_bump.axis = 0;
  tilt_bump.center = th1;
  tilt_bump.inner = 2.0 * lam;
  tilt_bump.outer = 3.0 * lam;
  tilt_bump.amp = tilt_s;
  SliceCost::CostFn tilted = [base, tilt_bump](const Vec& a, const Vec& b) {
    return base(a, b) + tilt_bump.value(a);
  };

  SliceCost pen1(penalized_cost(base, 0, th2, lam, 1.0), A, 1, ng, 0.35, dbox, 192, 25);
  SliceCost pen2(penalized_cost(base, 0, th1, lam, 1.0), A, 1, ng, 0.35, dbox, 192, 25);
  SliceCost pen1t(penalized_cost(tilted, 0, th2, lam, 1.0), A, 1, ng, 0.35, dbox, 192, 25);
  SliceCost pen2t(penalized_cost(tilted, 0, th1, lam, 1.0), A, 1, ng, 0.35, dbox, 192, 25);

  WeakKamParams wp;
  wp.ng = ng;
  wp.tol = sc.tol_wk;

  for (double c : linspace(c_range.first, c_range.second, n_c)) {
    BifurcationPoint pt;
    pt.c = c;
    pt.a1 = local_alpha(pen1, {c}, wp);
    pt.a2 = local_alpha(pen2, {c}, wp);
    if (tilt_s != 0.0) {
      const double a1s = local_alpha(pen1t, {c}, wp);
      const double a2s = local_alpha(pen2t, {c}, wp);
      const double res = std::fabs((a2s - a1s) - (pt.a2 - pt.a1) - tilt_s);
      sw.worst_tilt_residual = std::max(sw.worst_tilt_residual, res);
    }
    sw.points.push_back(pt);
  }

  // Crossings: strict sign changes located by linear interpolation; a sweep
  // that ties everywhere (symmetric peaks) reports the central tie.
  const double tie = 2.0 * wp.tol;
  bool all_tie = true;
  for (std::size_t i = 0; i < sw.points.size(); ++i) {
    const double d = sw.points[i].a1 - sw.points[i].a2;
    if (std::fabs(d) > tie) all_tie = false;
    if (i > 0) {
      const double dp = sw.points[i - 1].a1 - sw.points[i - 1].a2;
      if (dp * d < 0 && std::fabs(dp) > tie && std::fabs(d) > tie) {
        const double t = dp / (dp - d);
        sw.crossings.push_back(sw.points[i - 1].c + t * (sw.points[i].c - sw.points[i - 1].c));
      }
    }
  }
  if (all_tie && !sw.points.empty())
    sw.crossings.push_back(0.5 * (c_range.first + c_range.second));
  sw.ok = (tilt_s == 0.0 || sw.worst_tilt_residual <= 2.0 * wp.tol);
  return sw;
}

// ---------------------------------------------------------------------------
// Commands

StageResult run_punctures(const Scenario& sc, ArtifactSet& art) {
  StageResult st{"punctures", true, false, ""};
  ResonanceFrame frame(sc.H0());
  const double s = sc.beta * std::pow(std::max(sc.eps, 1e-300), 0.25);
  PunctureSet ps = compute_punctures(frame, sc.K, s, sc.arc);
  njson j;
  j["K"] = ps.K;
  j["s"] = ps.s;
  j["range"] = {ps.range.first, ps.range.second};
  njson ex = njson::array(), arcs = njson::array();
  for (auto& w : ps.excluded) ex.push_back({w.first, w.second});
  for (auto& a : ps.arcs) arcs.push_back({a.first, a.second});
  j["excluded"] = ex;
  j["arcs"] = arcs;
  j["centers_omega"] = ps.centers_omega;
  art.write("punctures.json", j.dump(2) + "\n");
  st.ok = !ps.arcs.empty();
  std::ostringstream os;
  os << ps.arcs.size() << " admissible arcs";
  st.detail = os.str();
  return st;
}

StageResult run_normal_form(const Scenario& sc, ArtifactSet& art,
                            std::shared_ptr<NormalFormResult>* out) {
  StageResult st{"normal-form", true, false, ""};
  std::shared_ptr<NormalFormResult> nf;
  try {
    nf = std::make_shared<NormalFormResult>(
        build_normal_form(sc.H0(), sc.H1, sc.nf_params(), sc.arc));
  } catch (const KamError& e) {
    st.detail = e.what();
    art.write("normalform.json", njson{{"error", e.what()}}.dump(2) + "\n");
    return st;
  }
  njson j;
  j["certified"] = nf->certified;
  j["R_C0"] = nf->R_C0;
  j["R_C2"] = nf->R_C2;
  j["Phi_C0"] = nf->Phi_C0;
  j["Phi_C2"] = nf->Phi_C2;
  j["delta_target"] = nf->params.delta;
  j["lambda"] = nf->Z.lambda;
  j["degenerate"] = nf->Z.degenerate;
  j["double_peak"] = nf->Z.double_peak;
  j["bifurcation_pf"] = nf->Z.bifurcation_pf;
  j["arc"] = {nf->arc.first, nf->arc.second};
  njson peaks = njson::array();
  for (double pf : linspace(sc.arc.first, sc.arc.second, 7)) {
    njson row;
    row["pf"] = pf;
    row["theta_star"] = branch_peaks(nf->Z, pf);
    peaks.push_back(row);
  }
  j["maximizers"] = peaks;
  art.write("normalform.json", j.dump(2) + "\n");
  st.ok = nf->certified && !nf->Z.degenerate;
  std::ostringstream os;
  os << "R_C2 = " << fmt_g17(nf->R_C2) << (st.ok ? " certified" : " NOT certified");
  st.detail = os.str();
  if (out) *out = nf;
  return st;
}

namespace {

StageResult cylinder_stage(const Scenario& sc, const NormalFormResult& nf, ArtifactSet& art,
                           CylinderStage* keep) {
  StageResult st{"cylinder", true, false, ""};
  CylinderStage cs = build_cylinder(sc, nf);
  njson j;
  j["lambda"] = cs.lambda;
  j["delta_meas"] = cs.delta_meas;
  j["rho"] = cs.rho;
  j["sigma"] = cs.sigma;
  j["window"] = {cs.window.first, cs.window.second};
  j["window_ok"] = cs.window_ok;
  j["frame_ok"] = cs.frame.ok;
  j["frame_worst_identity"] = cs.frame.worst_identity;
  j["frame_lam_min"] = cs.frame.lam_min;
  j["alpha_scale"] = cs.frame.alpha_scale;
  j["cert"] = {{"flux_u_min", cs.cert.flux_u_min}, {"flux_s_max", cs.cert.flux_s_max},
               {"alpha", cs.cert.alpha_meas},      {"m", cs.cert.m_meas},
               {"collar", cs.cert.collar_term},    {"K", cs.cert.K},
               {"pass", cs.cert.pass},             {"graphs_only", cs.cert.graphs_only}};
  if (cs.ok) {
    j["graph"] = {{"iters", cs.graph.iters},
                  {"final_delta", cs.graph.final_delta},
                  {"lip_sc", cs.graph.lip_sc},
                  {"lip_uc", cs.graph.lip_uc},
                  {"lip_c", cs.graph.lip_c}};
    j["measure"] = {{"theta_dist_max", cs.measure.theta_dist_max},
                    {"dtheta_dpf_max", cs.measure.dtheta_dpf_max},
                    {"psn_dist_max", cs.measure.psn_dist_max},
                    {"invariance_residual", cs.measure.invariance_residual}};
  }
  art.write("cylinder.json", j.dump(2) + "\n");
  st.ok = cs.frame.ok && cs.ok;
  std::ostringstream os;
  os << "K = " << fmt_g17(cs.cert.K) << (cs.cert.pass ? " (foliation)" : "")
     << (cs.cert.graphs_only ? " (graphs only)" : "");
  st.detail = os.str();
  if (keep) *keep = std::move(cs);
  return st;
}

StageResult weakkam_stage(const Scenario& sc, const NormalFormResult& nf, ArtifactSet& art,
                          int n_c, WeakKamSweep* keep) {
  StageResult st{"weak-kam", true, false, ""};
  WeakKamSweep sw = sweep_weakkam(sc, nf, n_c);
  std::ostringstream csv;
  csv << "pf,alpha,alpha_model,osc_u,graph_lip,fast_gap,localized,classification\n";
  njson arr = njson::array();
  for (const auto& pt : sw.points) {
    csv << fmt_g17(pt.pf) << "," << fmt_g17(pt.alpha) << "," << fmt_g17(pt.alpha_model)
        << "," << fmt_g17(pt.osc_u) << "," << fmt_g17(pt.graph_lip) << ","
        << fmt_g17(pt.fast_gap) << "," << (pt.loc.pass ? 1 : 0) << "," << pt.classification
        << "\n";
    njson row;
    row["pf"] = pt.pf;
    row["alpha"] = pt.alpha;
    row["alpha_model"] = pt.alpha_model;
    row["osc_u"] = pt.osc_u;
    row["graph_lip"] = pt.graph_lip;
    row["fast_gap"] = pt.fast_gap;
    row["localized"] = pt.loc.pass;
    row["classification"] = pt.classification;
    row["sample"] = sample_json(pt.sample);
    arr.push_back(row);
  }
  art.write("alpha_sweep.csv", csv.str());
  art.write("weakkam.json", njson{{"points", arr}}.dump(2) + "\n");
  st.ok = sw.ok;
  std::ostringstream os;
  os << sw.points.size() << " c-values, "
     << (sw.ok ? "all converged" : "convergence failures");
  st.detail = os.str();
  if (keep) *keep = std::move(sw);
  return st;
}

StageResult barriers_stage(const Scenario& sc, const NormalFormResult& nf, ArtifactSet& art,
                           BarrierStage* keep) {
  StageResult st{"barriers", true, false, ""};
  const double pf = 0.5 * (sc.arc.first + sc.arc.second);
  BarrierStage bs = build_barriers(sc, nf.Z, pf);
  njson j;
  j["pf"] = pf;
  j["c_cover"] = bs.c_cover;
  j["alpha"] = bs.alpha;
  j["h_z1z2"] = bs.field.h_z1z2;
  j["h_z2z1"] = bs.field.h_z2z1;
  j["heteroclinics_12"] = (int)bs.field.H12.size();
  j["heteroclinics_21"] = (int)bs.field.H21.size();
  j["detect_tol"] = bs.field.detect_tol;
  std::ostringstream csv;
  csv << "x,b_minus,b_plus\n";
  for (int i = 0; i < bs.field.b_minus.dims()[0]; ++i) {
    const double x = (double)i / bs.field.b_minus.dims()[0];
    csv << fmt_g17(x) << "," << fmt_g17(bs.field.b_minus.data()[i]) << ","
        << fmt_g17(bs.field.b_plus.data()[i]) << "\n";
  }
  art.write("barriers.json", j.dump(2) + "\n");
  art.write("barriers.csv", csv.str());
  st.ok = bs.ok;
  std::ostringstream os;
  os << bs.field.H12.size() << "+" << bs.field.H21.size() << " heteroclinic samples";
  st.detail = os.str();
  if (keep) *keep = std::move(bs);
  return st;
}

StageResult report_stage(const Scenario& sc, const WeakKamSweep& sw,
                         const CylinderStage* cyl, const BarrierStage* bar,
                         ArtifactSet& art) {
  StageResult st{"report", true, false, ""};
  njson j;
  njson cls = njson::array();
  int contained = 0, checked = 0;
  for (const auto& pt : sw.points) {
    njson row;
    row["pf"] = pt.pf;
    row["classification"] = pt.classification;
    row["localized"] = pt.loc.pass;
    if (cyl && cyl->ok) {
      auto rep = containment_check(*cyl->chart, cyl->graph, pt.sample,
                                   1.0 / std::max(1, sc.grid_ng));
      row["containment"] = rep.pass;
      row["graph_dist_steps"] = rep.max_graph_dist;
      ++checked;
      if (rep.pass) ++contained;
    }
    cls.push_back(row);
  }
  j["classification"] = cls;
  if (bar)
    j["heteroclinics"] = {{"count_12", (int)bar->field.H12.size()},
                          {"count_21", (int)bar->field.H21.size()}};

  // Pseudo-orbit stitcher: concatenate calibrated segments of adjacent
  // c-values whose momenta differ by less than sqrt(eps). This demonstrates
  // momentum drift numerically; it does not construct a true orbit.
  const double se = std::sqrt(std::max(sc.eps, 0.0));
  njson segs = njson::array();
  std::size_t start = 0;
  for (std::size_t i = 1; i <= sw.points.size(); ++i) {
    const bool chain = i < sw.points.size() &&
                       std::fabs(sw.points[i].pf - sw.points[i - 1].pf) <= se;
    if (!chain) {
      segs.push_back({{"pf_from", sw.points[start].pf},
                      {"pf_to", sw.points[i - 1].pf},
                      {"drift", sw.points[i - 1].pf - sw.points[start].pf}});
      start = i;
    }
  }
  j["stitch"] = {{"label", "HEURISTIC"},
                 {"segments", segs},
                 {"note", "concatenated calibrated segments; not a true orbit"}};
  j["containment"] = {{"checked", checked}, {"contained", contained}};
  art.write("diffusion_report.json", j.dump(2) + "\n");
  st.ok = true;
  std::ostringstream os;
  os << cls.size() << " c-values classified";
  st.detail = os.str();
  return st;
}

// Degenerate eps = 0 run: everything integrable, written in closed form.
std::vector<StageResult> run_integrable(const Scenario& sc, ArtifactSet& art, int n_c) {
  std::vector<StageResult> stages;
  stages.push_back(run_punctures(sc, art));
  njson arr = njson::array();
  for (double pf : linspace(sc.arc.first + 0.015, sc.arc.second - 0.015, n_c)) {
    Vec c(sc.n, 0.0);
    c[sc.n - 1] = pf;
    arr.push_back({{"pf", pf},
                   {"alpha", quad_value(sc.M, c)},
                   {"alpha_model", quad_value(sc.M, c)},
                   {"osc_u", 0.0},
                   {"graph_lip", 0.0},
                   {"classification", "invariant-circle"}});
  }
  art.write("weakkam.json", njson{{"integrable", true}, {"points", arr}}.dump(2) + "\n");
  StageResult st{"weak-kam", true, true, "integrable closed form"};
  stages.push_back(st);
  art.write("diffusion_report.json",
            njson{{"integrable", true},
                  {"note", "flat solutions, every rotation set is an invariant circle"}}
                    .dump(2) +
                "\n");
  stages.push_back({"report", true, true, "integrable closed form"});
  art.write_manifest(sc, stages);
  return stages;
}

}  // namespace

std::vector<StageResult> run_cylinder_cmd(const Scenario& sc, ArtifactSet& art) {
  std::vector<StageResult> stages;
  std::shared_ptr<NormalFormResult> nf;
  stages.push_back(run_normal_form(sc, art, &nf));
  if (stages.back().ok) stages.push_back(cylinder_stage(sc, *nf, art, nullptr));
  art.write_manifest(sc, stages);
  return stages;
}

std::vector<StageResult> run_weakkam_cmd(const Scenario& sc, ArtifactSet& art, int n_c) {
  std::vector<StageResult> stages;
  std::shared_ptr<NormalFormResult> nf;
  stages.push_back(run_normal_form(sc, art, &nf));
  if (stages.back().ok) stages.push_back(weakkam_stage(sc, *nf, art, n_c, nullptr));
  art.write_manifest(sc, stages);
  return stages;
}

std::vector<StageResult> run_barriers_cmd(const Scenario& sc, ArtifactSet& art) {
  std::vector<StageResult> stages;
  std::shared_ptr<NormalFormResult> nf;
  stages.push_back(run_normal_form(sc, art, &nf));
  if (stages.back().ok) stages.push_back(barriers_stage(sc, *nf, art, nullptr));
  art.write_manifest(sc, stages);
  return stages;
}

StageResult run_bifurcation(const Scenario& sc, double tilt_s, ArtifactSet& art) {
  StageResult st{"bifurcation", true, false, ""};
  std::shared_ptr<NormalFormResult> nf;
  StageResult nfst = run_normal_form(sc, art, &nf);
  if (!nf || nf->Z.branches.size() < 2) {
    st.detail = "no two-peak averaged potential";
    art.write_manifest(sc, {nfst, st});
    return st;
  }
  const double pf = 0.5 * (sc.arc.first + sc.arc.second);
  BifurcationSweep sw = sweep_bifurcation(sc, nf->Z, pf, {-0.08, 0.08}, 7, tilt_s);
  njson j;
  j["pf"] = pf;
  j["tilt_s"] = sw.tilt_s;
  j["worst_tilt_residual"] = sw.worst_tilt_residual;
  j["crossings"] = sw.crossings;
  njson arr = njson::array();
  for (const auto& pt : sw.points) arr.push_back({{"c", pt.c}, {"a1", pt.a1}, {"a2", pt.a2}});
  j["points"] = arr;
  art.write("bifurcation.json", j.dump(2) + "\n");
  st.ok = sw.ok && !sw.crossings.empty();
  std::ostringstream os;
  os << sw.crossings.size() << " crossings, tilt residual "
     << fmt_g17(sw.worst_tilt_residual);
  st.detail = os.str();
  art.write_manifest(sc, {nfst, st});
  return st;
}

std::vector<StageResult> run_pipeline(const Scenario& sc, ArtifactSet& art, int n_c) {
  if (sc.eps == 0.0) return run_integrable(sc, art, n_c);

  std::vector<StageResult> stages;
  stages.push_back(run_punctures(sc, art));

  std::shared_ptr<NormalFormResult> nf;
  stages.push_back(run_normal_form(sc, art, &nf));
  if (!stages.back().ok) {
    art.write_manifest(sc, stages);
    return stages;
  }

  CylinderStage cyl;
  stages.push_back(cylinder_stage(sc, *nf, art, &cyl));
  if (!stages.back().ok) {
    art.write_manifest(sc, stages);
    return stages;
  }

  WeakKamSweep sw;
  stages.push_back(weakkam_stage(sc, *nf, art, n_c, &sw));
  if (!stages.back().ok) {
    art.write_manifest(sc, stages);
    return stages;
  }

  BarrierStage bar;
  stages.push_back(barriers_stage(sc, *nf, art, &bar));

  stages.push_back(report_stage(sc, sw, &cyl, stages.back().ok ? &bar : nullptr, art));
  art.write_manifest(sc, stages);
  return stages;
}

}  // namespace kamlab
