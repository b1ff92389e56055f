#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "semcom/errors.hpp"
#include "semcom/harness.hpp"

namespace semcom {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (std::string_view key : allowed) known = known || item.key() == key;
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + std::string(where));
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

Vec3 read_vec3(const json& value, const char* key) {
  if (!value.is_array() || value.size() != 3) throw ConfigError(std::string(key) + " must be [x, y, z]");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!value[i].is_number()) throw ConfigError(std::string(key) + " must hold numbers");
    out[i] = value[i].get<double>();
  }
  return out;
}

double read_snr(const json& value) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    if (s == "inf" || s == "noiseless") return ChannelConfig::kNoiseless;
  }
  throw ConfigError("snr_db entries must be numbers or \"inf\"");
}

double deg_to_rad(double deg) { return deg * std::acos(-1.0) / 180.0; }

void parse_rig(const json& j, RigSpec& rig) {
  check_keys(j, "rig", {"count", "radius", "height", "look_at", "fov_deg", "near", "far", "width",
                        "height_px"});
  read(j, "count", rig.count);
  read(j, "radius", rig.radius);
  read(j, "height", rig.height);
  if (j.contains("look_at")) rig.look_at = read_vec3(j["look_at"], "look_at");
  if (j.contains("fov_deg")) {
    double deg = 0.0;
    read(j, "fov_deg", deg);
    rig.fov = deg_to_rad(deg);
  }
  read(j, "near", rig.near);
  read(j, "far", rig.far);
  read(j, "width", rig.width);
  read(j, "height_px", rig.height_px);
}

void parse_fit(const json& j, FitOptions& fit) {
  check_keys(j, "fit", {"robust", "inlier_px", "box_inlier_px", "prior_gate_px", "max_rounds",
                        "min_keypoints", "min_box_views", "max_iterations"});
  read(j, "robust", fit.robust);
  read(j, "inlier_px", fit.inlier_px);
  read(j, "box_inlier_px", fit.box_inlier_px);
  read(j, "prior_gate_px", fit.prior_gate_px);
  read(j, "max_rounds", fit.max_rounds);
  read(j, "min_keypoints", fit.min_keypoints);
  read(j, "min_box_views", fit.min_box_views);
  read(j, "max_iterations", fit.lm.max_iterations);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (frameworks.empty()) throw ConfigError("frameworks must not be empty");
  if (snr_db.empty()) throw ConfigError("snr_db must not be empty");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (frames < 1) throw ConfigError("frames must be >= 1");
  for (double snr : snr_db) {
    if (std::isnan(snr) || snr == -ChannelConfig::kNoiseless) throw ConfigError("snr_db must be a number or inf");
  }
  if (!(link_rate_bps > 0.0)) throw ConfigError("link_rate_bps must be > 0");
  if (rig.count < 2) throw ConfigError("rig.count must be >= 2");
  if (rig.width < 8 || rig.height_px < 8) throw ConfigError("rig resolution must be at least 8x8");
  if (!(rig.fov > 0.0 && rig.fov < std::acos(-1.0))) throw ConfigError("rig.fov_deg must lie in (0, 180)");
  if (!(rig.near > 0.0 && rig.far > rig.near)) throw ConfigError("rig near/far planes invalid");
  if (!(rig.radius > 0.0)) throw ConfigError("rig.radius must be > 0");
  if (render_steps < 1) throw ConfigError("render_steps must be >= 1");
  if (!(edge_threshold > 0.0 && edge_threshold <= 1.0)) throw ConfigError("edge_threshold must lie in (0, 1]");
  if (!(cloud.voxel_size > 0.0) || !(cloud.sigma_min > 0.0)) throw ConfigError("cloud settings must be > 0");
  if (!(kpe_threshold_px > 0.0)) throw ConfigError("kpe_threshold_px must be > 0");
  if (templates.tolerance < 0 || templates.tolerance > 255) throw ConfigError("templates.tolerance must lie in [0, 255]");
  if (!(fit.inlier_px > 0.0) || !(fit.box_inlier_px > 0.0) || !(fit.prior_gate_px > 0.0) ||
      fit.max_rounds < 1 || fit.lm.max_iterations < 1) {
    throw ConfigError("fit settings out of range");
  }
  if (timing.semantic_extract_s < 0.0 || timing.generation_pass_s < 0.0 ||
      timing.imagecom_extract_s < 0.0 || timing.imagecom_generate_s < 0.0 ||
      timing.nominal_width < 1 || timing.nominal_height < 1) {
    throw ConfigError("timing settings out of range");
  }
  weights.validate();
  detector.validate();
}

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config", {"scenario", "rig", "frameworks", "snr_db", "seeds", "seed_count",
                              "frames", "fading", "link_rate_bps", "weights", "detector",
                              "timing", "render_steps", "edge_threshold", "cloud",
                              "kpe_threshold_px", "templates", "fit", "prompt", "output_dir",
                              "write_artifacts"});
  ExperimentConfig cfg;
  read(root, "scenario", cfg.scenario);
  if (root.contains("rig")) parse_rig(root["rig"], cfg.rig);
  if (root.contains("frameworks")) {
    if (!root["frameworks"].is_array()) throw ConfigError("frameworks must be an array");
    cfg.frameworks.clear();
    for (const json& f : root["frameworks"]) {
      if (!f.is_string()) throw ConfigError("frameworks must hold strings");
      cfg.frameworks.push_back(parse_framework(f.get<std::string>()));
    }
  }
  if (root.contains("snr_db")) {
    if (!root["snr_db"].is_array()) throw ConfigError("snr_db must be an array");
    cfg.snr_db.clear();
    for (const json& s : root["snr_db"]) cfg.snr_db.push_back(read_snr(s));
  }
  if (root.contains("seeds") && root.contains("seed_count")) {
    throw ConfigError("give either seeds or seed_count, not both");
  }
  read(root, "seeds", cfg.seeds);
  if (root.contains("seed_count")) {
    int count = 0;
    read(root, "seed_count", count);
    if (count < 1) throw ConfigError("seed_count must be >= 1");
    cfg.seeds.clear();
    for (int i = 0; i < count; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(i));
  }
  read(root, "frames", cfg.frames);
  if (root.contains("fading")) {
    std::string fading;
    read(root, "fading", fading);
    if (fading == "rayleigh") {
      cfg.fading = Fading::rayleigh;
    } else if (fading == "none" || fading == "awgn") {
      cfg.fading = Fading::none;
    } else {
      throw ConfigError("fading must be \"rayleigh\" or \"none\"");
    }
  }
  read(root, "link_rate_bps", cfg.link_rate_bps);
  if (root.contains("weights")) {
    const json& w = root["weights"];
    check_keys(w, "weights", {"canny", "keypoints", "box"});
    read(w, "canny", cfg.weights.canny);
    read(w, "keypoints", cfg.weights.keypoints);
    read(w, "box", cfg.weights.box);
  }
  if (root.contains("detector")) {
    const json& d = root["detector"];
    check_keys(d, "detector", {"keypoint_sigma", "box_sigma", "miss_rate"});
    read(d, "keypoint_sigma", cfg.detector.keypoint_sigma);
    read(d, "box_sigma", cfg.detector.box_sigma);
    read(d, "miss_rate", cfg.detector.miss_rate);
  }
  if (root.contains("timing")) {
    const json& t = root["timing"];
    check_keys(t, "timing", {"semantic_extract_s", "generation_pass_s", "imagecom_extract_s",
                             "imagecom_generate_s", "nominal_width", "nominal_height"});
    read(t, "semantic_extract_s", cfg.timing.semantic_extract_s);
    read(t, "generation_pass_s", cfg.timing.generation_pass_s);
    read(t, "imagecom_extract_s", cfg.timing.imagecom_extract_s);
    read(t, "imagecom_generate_s", cfg.timing.imagecom_generate_s);
    read(t, "nominal_width", cfg.timing.nominal_width);
    read(t, "nominal_height", cfg.timing.nominal_height);
  }
  read(root, "render_steps", cfg.render_steps);
  read(root, "edge_threshold", cfg.edge_threshold);
  if (root.contains("cloud")) {
    const json& c = root["cloud"];
    check_keys(c, "cloud", {"voxel_size", "sigma_min"});
    read(c, "voxel_size", cfg.cloud.voxel_size);
    read(c, "sigma_min", cfg.cloud.sigma_min);
  }
  read(root, "kpe_threshold_px", cfg.kpe_threshold_px);
  if (root.contains("templates")) {
    const json& t = root["templates"];
    check_keys(t, "templates", {"tolerance", "min_pixels"});
    read(t, "tolerance", cfg.templates.tolerance);
    read(t, "min_pixels", cfg.templates.min_pixels);
  }
  if (root.contains("fit")) parse_fit(root["fit"], cfg.fit);
  read(root, "prompt", cfg.prompt);
  if (root.contains("output_dir")) {
    std::string dir;
    read(root, "output_dir", dir);
    cfg.output_dir = dir;
  }
  read(root, "write_artifacts", cfg.write_artifacts);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment_config(text.str());
}

}  // namespace semcom
