#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semcom/errors.hpp"
#include "semcom/harness.hpp"
#include "semcom/image_io.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

// SEMCOM_OUT_DIR replaces the configured output directory; an explicit
// --out flag still wins.
void apply_output_override(semcom::ExperimentConfig& cfg, const std::string& out_flag) {
  if (const char* env = std::getenv("SEMCOM_OUT_DIR"); env != nullptr && *env != '\0') {
    cfg.output_dir = env;
  }
  if (!out_flag.empty()) cfg.output_dir = out_flag;
}

double parse_snr(const std::string& text) {
  if (text == "inf" || text == "noiseless") return semcom::ChannelConfig::kNoiseless;
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) throw semcom::ConfigError("bad SNR value '" + text + "'");
  return value;
}

int run_sweep(const std::string& config_path, const std::vector<std::string>& frameworks,
              const std::vector<std::string>& snrs, const std::vector<std::uint64_t>& seeds,
              const std::string& out) {
  semcom::ExperimentConfig cfg = semcom::load_experiment_config(config_path);
  if (!frameworks.empty()) {
    cfg.frameworks.clear();
    for (const std::string& f : frameworks) cfg.frameworks.push_back(semcom::parse_framework(f));
  }
  if (!snrs.empty()) {
    cfg.snr_db.clear();
    for (const std::string& s : snrs) cfg.snr_db.push_back(parse_snr(s));
  }
  if (!seeds.empty()) cfg.seeds = seeds;
  apply_output_override(cfg, out);
  cfg.validate();

  const semcom::SweepResult result = semcom::sweep(cfg);
  std::cout << semcom::summary_csv(result.summary);
  std::cout << "wrote " << result.records.size() << " rows to "
            << (cfg.output_dir / "records.csv").string() << "\n";
  if (result.failed_rows > 0) {
    std::cerr << result.failed_rows << " row(s) failed; see the status column\n";
    return kExitPartial;
  }
  return 0;
}

int write_base_knowledge(const std::string& config_path, const std::string& out) {
  const semcom::ExperimentConfig cfg = semcom::load_experiment_config(config_path);
  const semcom::Experiment experiment(cfg);
  semcom::save_base_knowledge(out, experiment.base_knowledge());
  std::cout << "base knowledge: " << experiment.base_knowledge_bits() << " bits -> " << out << "\n";
  return 0;
}

int render_view(const std::string& config_path, int frame, int camera, const std::string& out) {
  const semcom::ExperimentConfig cfg = semcom::load_experiment_config(config_path);
  if (frame < 0) throw semcom::ConfigError("--frame must be >= 0");
  const std::vector<semcom::CameraConfig> rig = semcom::make_rig(cfg.rig);
  if (camera < 0 || camera >= static_cast<int>(rig.size())) {
    throw semcom::ConfigError("--camera must lie in [0, " + std::to_string(rig.size() - 1) + "]");
  }
  const semcom::SceneState state = semcom::animate(semcom::builtin_scenario(cfg.scenario), frame);
  semcom::RenderOptions options;
  options.steps = cfg.render_steps;
  semcom::write_ppm(out, semcom::render_image(state, rig[static_cast<std::size_t>(camera)], options));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic vs. image transmission simulator for remote 3D reconstruction"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::vector<std::string> frameworks;
  std::vector<std::string> snrs;
  std::vector<std::uint64_t> seeds;
  CLI::App* run = app.add_subcommand("run", "Run an SNR x seed sweep and write CSV/PLY/PPM artifacts");
  run->add_option("--config", config_path, "Experiment JSON file")->required();
  run->add_option("--framework", frameworks, "imagecom, m-gscm or s-gscm (repeatable)");
  run->add_option("--snr-list", snrs, "SNR values in dB ('inf' = noiseless)");
  run->add_option("--seeds", seeds, "Seed values");
  run->add_option("--out", out, "Output directory (overrides config and SEMCOM_OUT_DIR)");

  std::string base_config;
  std::string base_out;
  CLI::App* base = app.add_subcommand("baseknow", "Write the base-knowledge preamble");
  base->add_option("--config", base_config, "Experiment JSON file")->required();
  base->add_option("--out", base_out, "Output file")->required();

  std::string render_config;
  std::string render_out;
  int frame = 0;
  int camera = 0;
  CLI::App* render = app.add_subcommand("render", "Render one ground-truth view to PPM");
  render->add_option("--config", render_config, "Experiment JSON file")->required();
  render->add_option("--frame", frame, "Frame index")->required();
  render->add_option("--camera", camera, "Camera index")->required();
  render->add_option("--out", render_out, "Output .ppm file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return run_sweep(config_path, frameworks, snrs, seeds, out);
    if (*base) return write_base_knowledge(base_config, base_out);
    if (*render) return render_view(render_config, frame, camera, render_out);
  } catch (const semcom::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
