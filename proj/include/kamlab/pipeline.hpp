#pragma once
// Batch orchestration: scenario stages (punctures, normal form, cylinder,
// weak KAM sweep, barriers, bifurcation), artifact/manifest writing, and the
// summary report consumed by the command-line front-end.

#include "kamlab/nhic.hpp"
#include "kamlab/scenario.hpp"

namespace kamlab {

struct StageResult {
  std::string name;
  bool ran = false;
  bool ok = false;
  std::string detail;
};

// Collects written files and emits manifest.json with content hashes.
class ArtifactSet {
 public:
  explicit ArtifactSet(std::string outdir);
  const std::string& dir() const { return dir_; }
  void write(const std::string& name, const std::string& content);
  void write_manifest(const Scenario& sc, const std::vector<StageResult>& stages);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::string dir_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

// ---------------------------------------------------------------------------
// Stage payloads (reused by the acceptance suite)

struct CylinderStage {
  std::shared_ptr<HypChart> chart;
  SlowFastFrame frame;
  BlockCertificate cert;
  CylinderGraph graph;
  CylinderReport measure;
  double rho = 0.0, sigma = 0.0, lambda = 0.0, delta_meas = 0.0;
  std::pair<double, double> window{0.0, 0.0};
  bool window_ok = false;  // informational block-size window check
  bool ok = false;         // certificate (at least graphs-only) + transform converged
};

// Chart, frame tables, block certificate, and cylinder graph for the dominant
// maximizer branch over the scenario arc.
CylinderStage build_cylinder(const Scenario& sc, const NormalFormResult& nf);

struct SweepPoint {
  double pf = 0.0;            // c = (0, pf)
  double alpha = 0.0;         // measured critical value
  double alpha_model = 0.0;   // H0(c) + eps max_th Z(th, p*(pf))
  double osc_u = 0.0;
  double graph_lip = 0.0;
  double fast_gap = 0.0;      // largest fast-angle gap of the sample
  bool converged = false;
  LocalizationReport loc;
  InvariantSetSample sample;
  std::string classification;  // "partial-fast-support" or "invariant-circle"
};

struct WeakKamSweep {
  std::shared_ptr<GeneratingFn> G;
  std::shared_ptr<SliceCost> cost;
  std::vector<SweepPoint> points;
  bool ok = false;
};

// Weak KAM conjugate pairs along n_c evenly spaced p^f values of the arc;
// ng_override > 0 replaces the scenario grid resolution.
WeakKamSweep sweep_weakkam(const Scenario& sc, const NormalFormResult& nf, int n_c,
                           int ng_override = 0);

// One-angle slow system at frozen p^f: H = p^2 / (2 M_ss) + eps Z(th, p*(pf)).
struct SlowSlice {
  std::shared_ptr<CompositeHam> ham;
  std::shared_ptr<GeneratingFn> G;
  TrigPoly Zs;         // one-angle slice of the averaged potential
  double zmax = 0.0;   // max of the slice potential (without the eps weight)
  double pf = 0.0;
};

SlowSlice slow_slice(const Scenario& sc, const AveragedPotential& Z, double pf);

// Barrier fields of the two static classes on the two-fold cover of the slow
// slice (zeta at the lifted maximizer and its deck translate).
struct BarrierStage {
  SlowSlice slice;
  BarrierField field;
  double alpha = 0.0;
  double c_cover = 0.0;
  int ng = 64;
  bool ok = false;
};

BarrierStage build_barriers(const Scenario& sc, const AveragedPotential& Z, double pf,
                            double c_slow = 0.0, int ng = 64);

// Local critical values of the two maximizer branches over a slow-cohomology
// sweep, tie/crossing locations, and the plateau-tilt shift identity.
struct BifurcationPoint {
  double c = 0.0;
  double a1 = 0.0, a2 = 0.0;  // local alphas of branch 1 / branch 2
};

struct BifurcationSweep {
  std::vector<BifurcationPoint> points;
  std::vector<double> crossings;     // c where a1 - a2 changes sign or ties
  double tilt_s = 0.0;
  double worst_tilt_residual = 0.0;  // |(a2_s - a1_s) - (a2 - a1) - s|
  bool ok = false;
};

BifurcationSweep sweep_bifurcation(const Scenario& sc, const AveragedPotential& Z, double pf,
                                   std::pair<double, double> c_range, int n_c, double tilt_s);

// ---------------------------------------------------------------------------
// Commands (return stage lists; files land in the artifact set)

StageResult run_punctures(const Scenario& sc, ArtifactSet& art);
StageResult run_normal_form(const Scenario& sc, ArtifactSet& art,
                            std::shared_ptr<NormalFormResult>* out = nullptr);
std::vector<StageResult> run_cylinder_cmd(const Scenario& sc, ArtifactSet& art);
std::vector<StageResult> run_weakkam_cmd(const Scenario& sc, ArtifactSet& art, int n_c = 5);
std::vector<StageResult> run_barriers_cmd(const Scenario& sc, ArtifactSet& art);
StageResult run_bifurcation(const Scenario& sc, double tilt_s, ArtifactSet& art);
// Full pipeline: punctures, normal form, cylinder, weak KAM sweep with
// containment, barriers, and the summary report. Certification failure halts
// downstream stages; the partial manifest is still written.
std::vector<StageResult> run_pipeline(const Scenario& sc, ArtifactSet& art, int n_c = 5);

bool all_ok(const std::vector<StageResult>& stages);

}  // namespace kamlab
