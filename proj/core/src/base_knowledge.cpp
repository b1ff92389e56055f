#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "semcom/errors.hpp"
#include "semcom/reconstruct.hpp"

namespace semcom {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'S', 'C', 'B', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void vec(const Vec3& v) {
    for (int i = 0; i < 3; ++i) f64(v[i]);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  Vec3 vec() {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = f64();
    return v;
  }
  // Guards counts read from the stream before allocating for them.
  std::uint32_t count(std::size_t min_bytes_each) {
    const std::uint32_t n = u32();
    if (min_bytes_each > 0 && n > (in_.size() - pos_) / min_bytes_each) {
      throw DecodeError("base knowledge: implausible element count");
    }
    return n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DecodeError("base knowledge: truncated input");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

void BaseKnowledge::validate() const {
  if (cameras.empty()) throw ContractViolation("base knowledge needs at least one camera");
  if (edge_maps.size() != cameras.size()) {
    throw ContractViolation("base knowledge needs one edge map per camera");
  }
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    cameras[i].validate();
    const EdgeMap& e = edge_maps[i];
    if (e.width != cameras[i].width || e.height != cameras[i].height ||
        e.mask.size() != static_cast<std::size_t>(e.width) * e.height) {
      throw ContractViolation("edge map size does not match its camera");
    }
  }
  arm.validate();
  if (initial_pose.joint_angles.size() != arm.joint_axes.size()) {
    throw ContractViolation("initial pose does not match the arm model");
  }
  if (!background) throw ContractViolation("base knowledge has no background");
}

SceneState BaseKnowledge::initial_state() const {
  return SceneState(0, arm, initial_pose, initial_box, box_appearance, background);
}

const CameraConfig& BaseKnowledge::camera(int id) const {
  for (const CameraConfig& cam : cameras) {
    if (cam.id == id) return cam;
  }
  throw ContractViolation("no camera with id " + std::to_string(id));
}

BaseKnowledge build_base_knowledge(const Scenario& scenario, const std::vector<CameraConfig>& rig,
                                   const BaseKnowledgeOptions& options) {
  scenario.validate();
  if (rig.empty()) throw ConfigError("camera rig is empty");
  const SceneState first = animate(scenario, 0);

  BaseKnowledge base;
  base.cameras = rig;
  base.arm = scenario.arm;
  base.initial_pose = first.arm_pose();
  base.initial_box = first.box();
  base.box_appearance = scenario.box_appearance;
  base.background = scenario.background;
  base.cloud_bounds = scenario.cloud_bounds;
  base.edge_maps.reserve(rig.size());
  for (const CameraConfig& cam : rig) {
    base.edge_maps.push_back(edge_map(render_image(first, cam, options.render), options.edge_threshold));
  }
  return base;
}

std::vector<std::uint8_t> serialize_base_knowledge(const BaseKnowledge& base) {
  base.validate();
  Writer w;
  for (std::uint8_t c : kMagic) w.u8(c);
  w.u32(kVersion);

  w.u32(static_cast<std::uint32_t>(base.cameras.size()));
  for (const CameraConfig& cam : base.cameras) {
    w.i32(cam.id);
    w.vec(cam.position);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) w.f64(cam.rotation(r, c));
    }
    w.f64(cam.fov);
    w.f64(cam.aspect);
    w.f64(cam.near);
    w.f64(cam.far);
    w.u32(static_cast<std::uint32_t>(cam.width));
    w.u32(static_cast<std::uint32_t>(cam.height));
  }

  const ArmModel& arm = base.arm;
  w.u32(static_cast<std::uint32_t>(arm.link_lengths.size()));
  for (double l : arm.link_lengths) w.f64(l);
  w.vec(arm.base_position);
  for (const Vec3& a : arm.joint_axes) w.vec(a);
  w.f64(arm.link_radius);
  w.f64(arm.marker_radius);
  w.f64(arm.density);
  w.vec(arm.link_color);
  for (const Rgb& c : arm.marker_colors) w.vec(c);
  for (double q : base.initial_pose.joint_angles) w.f64(q);
  w.vec(base.initial_box.center);
  w.vec(base.initial_box.half_extents);
  w.f64(base.initial_box.yaw);
  w.vec(base.box_appearance.color);
  w.f64(base.box_appearance.density);
  w.vec(base.background->sky_color);
  w.u32(static_cast<std::uint32_t>(base.background->primitives.size()));
  for (const BackgroundPrimitive& p : base.background->primitives) {
    if (const auto* slab = std::get_if<Slab>(&p.shape)) {
      w.u8(0);
      w.vec(slab->min);
      w.vec(slab->max);
    } else {
      const auto& sphere = std::get<Sphere>(p.shape);
      w.u8(1);
      w.vec(sphere.center);
      w.f64(sphere.radius);
      w.f64(0.0);
      w.f64(0.0);
    }
    w.vec(p.color);
    w.f64(p.density);
  }
  w.vec(base.cloud_bounds.min);
  w.vec(base.cloud_bounds.max);

  w.u32(static_cast<std::uint32_t>(base.edge_maps.size()));
  for (const EdgeMap& e : base.edge_maps) {
    w.u32(static_cast<std::uint32_t>(e.width));
    w.u32(static_cast<std::uint32_t>(e.height));
    std::uint8_t acc = 0;
    int filled = 0;
    for (std::uint8_t bit : e.mask) {
      acc = static_cast<std::uint8_t>((acc << 1) | (bit ? 1 : 0));
      if (++filled == 8) {
        w.u8(acc);
        acc = 0;
        filled = 0;
      }
    }
    if (filled > 0) w.u8(static_cast<std::uint8_t>(acc << (8 - filled)));
  }
  return w.take();
}

BaseKnowledge deserialize_base_knowledge(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (std::uint8_t c : kMagic) {
    if (r.u8() != c) throw DecodeError("base knowledge: bad magic");
  }
  if (r.u32() != kVersion) throw DecodeError("base knowledge: unsupported version");

  BaseKnowledge base;
  const std::uint32_t cams = r.count(4 + 8 * 16 + 8);
  base.cameras.resize(cams);
  for (CameraConfig& cam : base.cameras) {
    cam.id = r.i32();
    cam.position = r.vec();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) cam.rotation(i, j) = r.f64();
    }
    cam.fov = r.f64();
    cam.aspect = r.f64();
    cam.near = r.f64();
    cam.far = r.f64();
    cam.width = static_cast<int>(r.u32());
    cam.height = static_cast<int>(r.u32());
  }

  ArmModel& arm = base.arm;
  const std::uint32_t joints = r.count(8 * 5);
  arm.link_lengths.resize(joints);
  for (double& l : arm.link_lengths) l = r.f64();
  arm.base_position = r.vec();
  arm.joint_axes.resize(joints);
  for (Vec3& a : arm.joint_axes) a = r.vec();
  arm.link_radius = r.f64();
  arm.marker_radius = r.f64();
  arm.density = r.f64();
  arm.link_color = r.vec();
  for (Rgb& c : arm.marker_colors) c = r.vec();
  base.initial_pose.joint_angles.resize(joints);
  for (double& q : base.initial_pose.joint_angles) q = r.f64();
  base.initial_box.center = r.vec();
  base.initial_box.half_extents = r.vec();
  base.initial_box.yaw = r.f64();
  base.box_appearance.color = r.vec();
  base.box_appearance.density = r.f64();

  auto background = std::make_shared<Background>();
  background->sky_color = r.vec();
  const std::uint32_t prims = r.count(1 + 8 * 10);
  for (std::uint32_t i = 0; i < prims; ++i) {
    BackgroundPrimitive p;
    const std::uint8_t kind = r.u8();
    const Vec3 a = r.vec();
    const Vec3 b = r.vec();
    if (kind == 0) {
      p.shape = Slab{a, b};
    } else if (kind == 1) {
      p.shape = Sphere{a, b.x()};
    } else {
      throw DecodeError("base knowledge: unknown primitive kind");
    }
    p.color = r.vec();
    p.density = r.f64();
    background->primitives.push_back(std::move(p));
  }
  base.background = std::move(background);
  base.cloud_bounds.min = r.vec();
  base.cloud_bounds.max = r.vec();

  const std::uint32_t maps = r.count(8);
  base.edge_maps.resize(maps);
  for (EdgeMap& e : base.edge_maps) {
    e.width = static_cast<int>(r.u32());
    e.height = static_cast<int>(r.u32());
    const std::size_t n = static_cast<std::size_t>(e.width) * static_cast<std::size_t>(e.height);
    e.mask.resize(n);
    for (std::size_t i = 0; i < n; i += 8) {
      const std::uint8_t byte = r.u8();
      for (std::size_t k = 0; k < 8 && i + k < n; ++k) e.mask[i + k] = (byte >> (7 - k)) & 1u;
    }
  }
  if (!r.done()) throw DecodeError("base knowledge: trailing bytes");
  try {
    base.validate();
  } catch (const ContractViolation& e) {
    throw DecodeError(std::string("base knowledge: ") + e.what());
  }
  return base;
}

void save_base_knowledge(const std::filesystem::path& path, const BaseKnowledge& base) {
  const std::vector<std::uint8_t> bytes = serialize_base_knowledge(base);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

BaseKnowledge load_base_knowledge(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return deserialize_base_knowledge(bytes);
}

}  // namespace semcom
