#include "semcom/harness.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <utility>

#include "semcom/errors.hpp"
#include "semcom/image_io.hpp"

namespace semcom {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags keep the noise sources of one run independent of each other.
enum StreamTag : std::uint32_t {
  kDetectorStream = 0x44,
  kSemanticStream = 0x53,
  kImageStream = 0x49,
};

std::uint64_t derive_seed(std::uint64_t seed, std::int64_t frame, std::size_t view, StreamTag tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(frame), static_cast<std::uint32_t>(view),
                    static_cast<std::uint32_t>(tag)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Keyword -> arm link color for the regenerated scene.
std::optional<Rgb> prompt_color(const std::string& prompt) {
  static const std::array<std::pair<const char*, std::array<int, 3>>, 8> palette{{
      {"steel", {200, 200, 205}},
      {"red", {200, 40, 40}},
      {"blue", {40, 70, 200}},
      {"green", {40, 160, 60}},
      {"yellow", {230, 200, 40}},
      {"orange", {240, 140, 20}},
      {"black", {30, 30, 30}},
      {"white", {240, 240, 240}},
  }};
  std::string lower = prompt;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::size_t best_pos = std::string::npos;
  std::optional<Rgb> best;
  for (const auto& [word, rgb] : palette) {
    const std::size_t pos = lower.find(word);
    if (pos < best_pos) {
      best_pos = pos;
      best = Rgb(rgb[0], rgb[1], rgb[2]) / 255.0;
    }
  }
  return best;
}

RunRecord error_record(Framework fw, double snr, std::uint64_t seed, int frame, const std::string& what) {
  RunRecord r;
  r.framework = fw;
  r.snr_db = snr;
  r.seed = seed;
  r.frame = frame;
  r.kpe.mean_px = kNaN;
  r.kpe.pck = kNaN;
  r.p2p = {kNaN, kNaN, kNaN};
  r.td = {kNaN, kNaN, kNaN, kNaN};
  r.status = "error: " + what;
  return r;
}

std::string stale_status(const Regeneration& regen) {
  if (regen.arm_stale && regen.box_stale) return "stale";
  if (regen.arm_stale) return "stale_arm";
  if (regen.box_stale) return "stale_box";
  return "ok";
}

std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '"') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

std::string_view framework_name(Framework f) {
  switch (f) {
    case Framework::imagecom:
      return "imagecom";
    case Framework::m_gscm:
      return "m-gscm";
    case Framework::s_gscm:
      return "s-gscm";
  }
  return "unknown";
}

Framework parse_framework(std::string_view name) {
  for (Framework f : {Framework::imagecom, Framework::m_gscm, Framework::s_gscm}) {
    if (framework_name(f) == name) return f;
  }
  throw ConfigError("unknown framework '" + std::string(name) + "' (imagecom, m-gscm, s-gscm)");
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)) {
  config_.validate();
  scenario_ = builtin_scenario(config_.scenario);
  rig_ = make_rig(config_.rig);
  for (int t = 0; t < config_.frames; ++t) {
    truth_.push_back(animate(scenario_, t));
    truth_frames_.push_back(extract_frame(truth_.back(), rig_));
    truth_clouds_.push_back(extract_point_cloud(truth_.back(), scenario_.cloud_bounds,
                                                config_.cloud.voxel_size, config_.cloud.sigma_min));
  }
  BaseKnowledgeOptions options;
  options.edge_threshold = config_.edge_threshold;
  options.render.steps = config_.render_steps;
  auto base = std::make_shared<BaseKnowledge>(build_base_knowledge(scenario_, rig_, options));
  base_bits_ = serialize_base_knowledge(*base).size() * 8;
  base_ = base;

  auto gscm = std::make_shared<BaseKnowledge>(*base);
  if (const auto color = prompt_color(config_.prompt)) gscm->arm.link_color = *color;
  gscm_base_ = gscm;

  // The image baseline knows the object models and the static world but not
  // where the objects start.
  auto prior = std::make_shared<BaseKnowledge>(*base);
  prior->initial_pose.joint_angles.assign(kJointCount, 0.0);
  prior->initial_box.center = Vec3(0.0, prior->initial_box.half_extents.y(), 0.0);
  imagecom_prior_ = prior;

  const bool scenery = std::find(config_.frameworks.begin(), config_.frameworks.end(),
                                 Framework::s_gscm) != config_.frameworks.end();
  if (scenery && config_.weights.canny > 0.0) {
    edge_penalty_ = edge_consistency(*gscm_base_, gscm_base_->initial_state());
  }
}

const SceneState& Experiment::truth(int frame) const { return truth_.at(static_cast<std::size_t>(frame)); }

const SemanticFrame& Experiment::truth_frame(int frame) const {
  return truth_frames_.at(static_cast<std::size_t>(frame));
}

const PointCloud& Experiment::truth_cloud(int frame) const {
  return truth_clouds_.at(static_cast<std::size_t>(frame));
}

const std::vector<Image>& Experiment::truth_images(int frame) {
  if (truth_images_.empty()) {
    RenderOptions options;
    options.steps = config_.render_steps;
    for (const SceneState& state : truth_) {
      std::vector<Image> views;
      for (const CameraConfig& cam : rig_) views.push_back(render_image(state, cam, options));
      truth_images_.push_back(std::move(views));
    }
  }
  return truth_images_.at(static_cast<std::size_t>(frame));
}

ChannelConfig Experiment::channel(double snr_db, std::uint64_t seed) const {
  ChannelConfig cfg;
  cfg.snr_db = snr_db;
  cfg.fading = config_.fading;
  cfg.seed = seed;
  cfg.link_rate_bps = config_.link_rate_bps;
  return cfg;
}

EdgeMap Experiment::render_edges(const SceneState& state) const {
  RenderOptions options;
  options.steps = config_.render_steps;
  return edge_map(render_image(state, rig_.front(), options), config_.edge_threshold);
}

std::vector<RunRecord> Experiment::run_imagecom(double snr_db, std::uint64_t seed, RunSamples* samples) {
  Regenerator regen(imagecom_prior_, ReconstructionMode::model_based, config_.weights, config_.fit,
                    config_.cloud);
  const std::size_t nominal_bits = rig_.size() * static_cast<std::size_t>(config_.timing.nominal_width) *
                                   static_cast<std::size_t>(config_.timing.nominal_height) * 24;
  std::vector<RunRecord> out;
  for (int t = 0; t < config_.frames; ++t) {
    try {
      const std::vector<Image>& images = truth_images(t);
      std::vector<Image> received;
      std::size_t errors = 0;
      ChannelConfig cfg;
      for (std::size_t v = 0; v < rig_.size(); ++v) {
        cfg = channel(snr_db, derive_seed(seed, t, v, kImageStream));
        const Transmission tx = transmit(encode_image(images[v]), cfg);
        errors += tx.report.bit_errors;
        received.push_back(decode_image(tx.received, rig_[v].width, rig_[v].height));
      }
      const SemanticFrame estimated = estimate_frame(received, rig_, imagecom_prior_->arm,
                                                     imagecom_prior_->box_appearance, t,
                                                     config_.templates);
      Metaverse meta = regen.step(estimated);
      RunRecord r;
      r.framework = Framework::imagecom;
      r.snr_db = snr_db;
      r.seed = seed;
      r.frame = t;
      r.kpe = kpe(truth_frames_[static_cast<std::size_t>(t)],
                  extract_frame(meta.regeneration.state, rig_), config_.kpe_threshold_px);
      r.p2p = p2point(truth_clouds_[static_cast<std::size_t>(t)], meta.cloud);
      r.td = td(config_.timing.imagecom_extract_s, nominal_bits, 0.0, cfg,
                config_.timing.imagecom_generate_s);
      r.bit_errors = errors;
      r.status = stale_status(meta.regeneration);
      if (samples != nullptr && t == 0) {
        samples->cloud = meta.cloud;
        samples->edges = edge_map(received.front(), config_.edge_threshold);
      }
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.push_back(error_record(Framework::imagecom, snr_db, seed, t, e.what()));
    }
  }
  return out;
}

std::vector<RunRecord> Experiment::run_gscm(ReconstructionMode mode, double snr_db, std::uint64_t seed,
                                            RunSamples* samples) {
  const Framework fw = mode == ReconstructionMode::model_based ? Framework::m_gscm : Framework::s_gscm;
  std::optional<double> penalty;
  if (mode == ReconstructionMode::scenery_based && config_.weights.canny > 0.0) penalty = edge_penalty_;
  Regenerator regen(gscm_base_, mode, config_.weights, config_.fit, config_.cloud, penalty);
  SemanticCodec codec;
  codec.width = config_.rig.width;
  codec.height = config_.rig.height_px;
  const double passes = mode == ReconstructionMode::model_based ? 2.0 : 1.0;
  const double base_share = static_cast<double>(base_bits_) / config_.frames;

  std::vector<RunRecord> out;
  for (int t = 0; t < config_.frames; ++t) {
    try {
      DetectorNoise noise = config_.detector;
      noise.seed = derive_seed(seed, t, 0, kDetectorStream);
      const SemanticFrame extracted = extract_frame(truth_[static_cast<std::size_t>(t)], rig_, noise);
      const Bitstream bits = encode_semantic(extracted, codec);
      // Both GSCM modes see the same channel realization for a given seed.
      const ChannelConfig cfg = channel(snr_db, derive_seed(seed, t, 0, kSemanticStream));
      const Transmission tx = transmit(bits, cfg);
      const DecodedSemantic decoded = decode_semantic(tx.received, codec);
      Metaverse meta = regen.step(decoded.frame);
      RunRecord r;
      r.framework = fw;
      r.snr_db = snr_db;
      r.seed = seed;
      r.frame = t;
      r.kpe = kpe(truth_frames_[static_cast<std::size_t>(t)],
                  extract_frame(meta.regeneration.state, rig_), config_.kpe_threshold_px);
      r.p2p = p2point(truth_clouds_[static_cast<std::size_t>(t)], meta.cloud);
      r.td = td(config_.timing.semantic_extract_s, bits.size(), base_share, cfg,
                passes * config_.timing.generation_pass_s);
      r.bit_errors = tx.report.bit_errors;
      r.status = stale_status(meta.regeneration);
      if (samples != nullptr && t == 0) {
        samples->cloud = meta.cloud;
        samples->edges = render_edges(meta.regeneration.state);
      }
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.push_back(error_record(fw, snr_db, seed, t, e.what()));
    }
  }
  return out;
}

std::vector<RunRecord> run_imagecom(const ExperimentConfig& config, double snr_db, std::uint64_t seed) {
  Experiment experiment(config);
  return experiment.run_imagecom(snr_db, seed);
}

std::vector<RunRecord> run_gscm(const ExperimentConfig& config, ReconstructionMode mode,
                                double snr_db, std::uint64_t seed) {
  Experiment experiment(config);
  return experiment.run_gscm(mode, snr_db, seed);
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  std::vector<std::pair<Framework, double>> order;
  std::map<std::pair<int, double>, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : records) {
    const std::pair<int, double> key{static_cast<int>(r.framework), r.snr_db};
    if (!groups.contains(key)) order.emplace_back(r.framework, r.snr_db);
    auto& group = groups[key];
    if (!r.failed()) group.push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& [fw, snr] : order) {
    const auto& group = groups[{static_cast<int>(fw), snr}];
    std::vector<double> kpe_v;
    std::vector<double> pck_v;
    std::vector<double> p2p_v;
    std::vector<double> td_v;
    for (const RunRecord* r : group) {
      kpe_v.push_back(r->kpe.mean_px);
      pck_v.push_back(r->kpe.pck);
      p2p_v.push_back(r->p2p.rms_m);
      td_v.push_back(r->td.total_s);
    }
    out.push_back({fw, snr, group.size(), median(kpe_v), median(pck_v), median(p2p_v), median(td_v)});
  }
  return out;
}

std::string records_csv(const std::vector<RunRecord>& records) {
  std::string out =
      "framework,snr_db,seed,frame,kpe_mean,pck,p2p_rms,p2p_forward,p2p_backward,td_total,"
      "td_extract,td_airtime,td_generate,bit_errors,status\n";
  for (const RunRecord& r : records) {
    out += std::string(framework_name(r.framework));
    for (const std::string& field :
         {format_number(r.snr_db), std::to_string(r.seed), std::to_string(r.frame),
          format_number(r.kpe.mean_px), format_number(r.kpe.pck), format_number(r.p2p.rms_m),
          format_number(r.p2p.forward_rms_m), format_number(r.p2p.backward_rms_m),
          format_number(r.td.total_s), format_number(r.td.extract_s), format_number(r.td.airtime_s),
          format_number(r.td.generate_s), std::to_string(r.bit_errors), csv_safe(r.status)}) {
      out += ',';
      out += field;
    }
    out += '\n';
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "framework,snr_db,rows,kpe_median,pck_median,p2p_median,td_median\n";
  for (const SummaryRow& s : rows) {
    out += std::string(framework_name(s.framework)) + ',' + format_number(s.snr_db) + ',' +
           std::to_string(s.rows) + ',' + format_number(s.kpe_median) + ',' +
           format_number(s.pck_median) + ',' + format_number(s.p2p_median) + ',' +
           format_number(s.td_median) + '\n';
  }
  return out;
}

SweepResult sweep(const ExperimentConfig& config) {
  Experiment experiment(config);
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  SweepResult result;

  const bool artifacts = config.write_artifacts;
  if (artifacts) {
    std::filesystem::create_directories(dir / "samples");
    const std::filesystem::path base_path = dir / "base_knowledge.bin";
    save_base_knowledge(base_path, experiment.base_knowledge());
    result.files.push_back(base_path);
    for (std::size_t k = 0; k < experiment.rig().size(); ++k) {
      const std::filesystem::path p = dir / ("base_edges_cam" + std::to_string(k) + ".ppm");
      write_ppm(p, edge_image(experiment.base_knowledge().edge_maps[k]));
      result.files.push_back(p);
    }
    const std::filesystem::path truth = dir / "truth_frame0.ply";
    write_ply(truth, experiment.truth_cloud(0));
    result.files.push_back(truth);
  }

  for (Framework fw : config.frameworks) {
    for (double snr : config.snr_db) {
      for (std::size_t s = 0; s < config.seeds.size(); ++s) {
        RunSamples samples;
        RunSamples* want = artifacts && s == 0 ? &samples : nullptr;
        std::vector<RunRecord> rows =
            fw == Framework::imagecom
                ? experiment.run_imagecom(snr, config.seeds[s], want)
                : experiment.run_gscm(fw == Framework::m_gscm ? ReconstructionMode::model_based
                                                              : ReconstructionMode::scenery_based,
                                      snr, config.seeds[s], want);
        if (want != nullptr && !samples.cloud.points.empty()) {
          const std::string stem = std::string(framework_name(fw)) + "_snr" + format_number(snr) +
                                   "_seed" + std::to_string(config.seeds[s]) + "_frame0";
          const std::filesystem::path ply = dir / "samples" / (stem + ".ply");
          write_ply(ply, samples.cloud);
          result.files.push_back(ply);
          const std::filesystem::path ppm = dir / "samples" / (stem + "_edges_cam0.ppm");
          write_ppm(ppm, edge_image(samples.edges));
          result.files.push_back(ppm);
        }
        for (RunRecord& r : rows) {
          if (r.failed()) ++result.failed_rows;
          result.records.push_back(std::move(r));
        }
      }
    }
  }
  result.summary = summarize(result.records);
  const std::filesystem::path records_path = dir / "records.csv";
  write_text(records_path, records_csv(result.records));
  result.files.push_back(records_path);
  const std::filesystem::path summary_path = dir / "summary.csv";
  write_text(summary_path, summary_csv(result.summary));
  result.files.push_back(summary_path);
  return result;
}

}  // namespace semcom
