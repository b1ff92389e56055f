#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semcom/camera.hpp"
#include "semcom/channel.hpp"
#include "semcom/image_estimator.hpp"
#include "semcom/metrics.hpp"
#include "semcom/reconstruct.hpp"
#include "semcom/render.hpp"
#include "semcom/scene.hpp"
#include "semcom/semantics.hpp"

namespace semcom {

enum class Framework : std::uint8_t { imagecom, m_gscm, s_gscm };

/// "imagecom", "m-gscm", "s-gscm".
std::string_view framework_name(Framework f);
/// Inverse of framework_name; unknown names -> ConfigError.
Framework parse_framework(std::string_view name);

/// Deterministic per-frame processing delays. Wall-clock time is never used,
/// so delay figures are reproducible. Generation cost is charged per
/// regeneration pass: the model-based mode runs one pass per object (2), the
/// scenery-based mode a single joint pass.
struct TimingModel {
  double semantic_extract_s = 0.02;
  double generation_pass_s = 0.335;
  double imagecom_extract_s = 0.0;
  double imagecom_generate_s = 0.0;
  // Image payloads are charged at this resolution whatever the simulated one.
  int nominal_width = 1200;
  int nominal_height = 600;
};

struct ExperimentConfig {
  std::string scenario = "factory";
  RigSpec rig;
  std::vector<Framework> frameworks{Framework::imagecom, Framework::m_gscm, Framework::s_gscm};
  std::vector<double> snr_db{0.0, 5.0, 10.0, 15.0, 20.0};  // +inf = noiseless
  std::vector<std::uint64_t> seeds{0};
  int frames = 4;
  Fading fading = Fading::rayleigh;
  double link_rate_bps = 160e6;
  ControlWeights weights;
  DetectorNoise detector;  // the seed field is ignored; noise streams derive from the run seed
  TimingModel timing;
  int render_steps = 128;
  double edge_threshold = 0.2;
  CloudOptions cloud;
  double kpe_threshold_px = 10.0;
  ColorTemplateOptions templates;
  FitOptions fit;
  std::string prompt;  // optional color keyword for the regenerated arm
  std::filesystem::path output_dir = "out";
  bool write_artifacts = true;

  /// Throws ConfigError on out-of-range settings.
  void validate() const;
};

/// JSON experiment description; unknown keys and malformed values -> ConfigError.
ExperimentConfig parse_experiment_config(std::string_view json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct RunRecord {
  Framework framework = Framework::imagecom;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  int frame = 0;
  KpeReport kpe;
  P2PointReport p2p;
  TdReport td;
  std::size_t bit_errors = 0;
  std::string status = "ok";  // ok | stale_arm | stale_box | stale | error: <what>

  bool failed() const { return status.rfind("error", 0) == 0; }
};

/// Sample outputs of one (framework, snr, seed) run, first frame only.
struct RunSamples {
  PointCloud cloud;
  EdgeMap edges;  // camera 0: received image edges (imagecom) or regenerated-scene edges
};

/// Shared, seed-independent precomputation of an experiment: ground-truth
/// states, their semantic frames, clouds and images, and the base knowledge.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const std::vector<CameraConfig>& rig() const { return rig_; }
  const BaseKnowledge& base_knowledge() const { return *base_; }
  std::size_t base_knowledge_bits() const { return base_bits_; }
  const SceneState& truth(int frame) const;
  const SemanticFrame& truth_frame(int frame) const;
  const PointCloud& truth_cloud(int frame) const;
  const std::vector<Image>& truth_images(int frame);

  std::vector<RunRecord> run_imagecom(double snr_db, std::uint64_t seed,
                                      RunSamples* samples = nullptr);
  std::vector<RunRecord> run_gscm(ReconstructionMode mode, double snr_db, std::uint64_t seed,
                                  RunSamples* samples = nullptr);

 private:
  ChannelConfig channel(double snr_db, std::uint64_t seed) const;
  EdgeMap render_edges(const SceneState& state) const;

  ExperimentConfig config_;
  Scenario scenario_;
  std::vector<CameraConfig> rig_;
  std::vector<SceneState> truth_;
  std::vector<SemanticFrame> truth_frames_;
  std::vector<PointCloud> truth_clouds_;
  std::vector<std::vector<Image>> truth_images_;  // filled on first ImageCom run
  std::shared_ptr<const BaseKnowledge> base_;
  std::shared_ptr<const BaseKnowledge> gscm_base_;      // base with the prompt palette applied
  std::shared_ptr<const BaseKnowledge> imagecom_prior_; // no initial object coordinates
  std::size_t base_bits_ = 0;
  double edge_penalty_ = 0.0;
};

std::vector<RunRecord> run_imagecom(const ExperimentConfig& config, double snr_db,
                                    std::uint64_t seed);
std::vector<RunRecord> run_gscm(const ExperimentConfig& config, ReconstructionMode mode,
                                double snr_db, std::uint64_t seed);

struct SummaryRow {
  Framework framework = Framework::imagecom;
  double snr_db = 0.0;
  std::size_t rows = 0;      // successful rows aggregated
  double kpe_median = 0.0;
  double pck_median = 0.0;
  double p2p_median = 0.0;
  double td_median = 0.0;
};

/// Per-(framework, snr) medians over all successful rows, in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

/// Column order: framework, snr_db, seed, frame, kpe_mean, pck, p2p_rms,
/// p2p_forward, p2p_backward, td_total, td_extract, td_airtime, td_generate,
/// bit_errors, status.
std::string records_csv(const std::vector<RunRecord>& records);
std::string summary_csv(const std::vector<SummaryRow>& rows);

struct SweepResult {
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summary;
  std::size_t failed_rows = 0;
  std::vector<std::filesystem::path> files;  // everything written, in write order
};

/// Full cross-product frameworks x snr x seeds (x frames). Writes
/// records.csv, summary.csv and, when enabled, sample PLY/PPM artifacts to
/// config.output_dir. Per-cell failures become error rows.
SweepResult sweep(const ExperimentConfig& config);

/// Formats a double for CSV/filenames: "%.9g", with "inf" for +infinity.
std::string format_number(double value);

}  // namespace semcom
