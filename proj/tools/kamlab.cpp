#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "kamlab/pipeline.hpp"

namespace {

kamlab::Scenario load_scenario(const std::string& config_path, bool have_seed,
                               std::uint64_t seed) {
  std::ifstream is(config_path);
  if (!is) throw kamlab::ConfigError("cannot open config file '" + config_path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  kamlab::Scenario sc = kamlab::scenario_from_config(ss.str());
  if (have_seed) sc.seed = seed;
  return sc;
}

int report(const std::vector<kamlab::StageResult>& stages) {
  bool ok = true;
  for (const auto& st : stages) {
    if (!st.ran) continue;
    std::printf("[%s] %s  %s\n", st.ok ? "ok" : "FAIL", st.name.c_str(), st.detail.c_str());
    ok = ok && st.ok;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resonant normal form / weak KAM / cylinder toolbox"};
  app.require_subcommand(1);

  std::string config_path, outdir = "out";
  int threads = 1;
  std::uint64_t seed = 0;
  bool have_seed = false;
  int n_c = 5;
  double tilt_s = 1e-3;

  app.add_option("--config", config_path, "scenario config file")->required();
  app.add_option("--out", outdir, "output directory");
  app.add_option("--threads", threads, "worker thread count");
  app.add_option("--seed", seed, "override the scenario seed")
      ->each([&](const std::string&) { have_seed = true; });

  CLI::App* punctures = app.add_subcommand("punctures", "resonance puncture inventory");
  CLI::App* normal_form = app.add_subcommand("normal-form", "resonant normal form + averaged potential");
  CLI::App* cylinder = app.add_subcommand("cylinder", "isolating block certificate + cylinder graph");
  CLI::App* weakkam = app.add_subcommand("weakkam", "weak KAM sweep along the arc");
  weakkam->add_option("--n-c", n_c, "number of cohomology samples");
  CLI::App* barriers = app.add_subcommand("barriers", "barrier fields on the two-fold cover");
  CLI::App* bifurcation = app.add_subcommand("bifurcation", "two-branch local critical values");
  bifurcation->add_option("--tilt", tilt_s, "plateau tilt size for the shift identity");
  CLI::App* pipeline = app.add_subcommand("pipeline", "full staged run with report");
  pipeline->add_option("--n-c", n_c, "number of cohomology samples");

  CLI11_PARSE(app, argc, argv);

  try {
    kamlab::Scenario sc = load_scenario(config_path, have_seed, seed);
    kamlab::worker_count() = threads > 0 ? threads : 1;
    kamlab::ArtifactSet art(outdir);
    if (punctures->parsed()) {
      kamlab::StageResult st = kamlab::run_punctures(sc, art);
      art.write_manifest(sc, {st});
      return report({st});
    }
    if (normal_form->parsed()) {
      kamlab::StageResult st = kamlab::run_normal_form(sc, art);
      art.write_manifest(sc, {st});
      return report({st});
    }
    if (cylinder->parsed()) return report(kamlab::run_cylinder_cmd(sc, art));
    if (weakkam->parsed()) return report(kamlab::run_weakkam_cmd(sc, art, n_c));
    if (barriers->parsed()) return report(kamlab::run_barriers_cmd(sc, art));
    if (bifurcation->parsed()) return report({kamlab::run_bifurcation(sc, tilt_s, art)});
    if (pipeline->parsed()) return report(kamlab::run_pipeline(sc, art, n_c));
  } catch (const kamlab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const kamlab::KamError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
