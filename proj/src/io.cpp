#include "ntrack/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>

#include <json.hpp>
#include <png.h>

#include "ntrack/error.hpp"

namespace ntrack::io {

using nlohmann::json;

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

namespace {

class Writer {
 public:
  void magic(const char* m) { buf_.append(m, 4); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : data_(read_file(path)), name_(path.string()) {}
  void magic(const char* m) {
    need(4);
    if (std::memcmp(data_.data() + pos_, m, 4) != 0) {
      throw Error(ErrorCode::kInvalidInput, "'" + name_ + "': expected magic " + m);
    }
    pos_ += 4;
  }
  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  void finish() const {
    if (pos_ != data_.size()) {
      throw Error(ErrorCode::kInvalidInput, "'" + name_ + "': trailing bytes");
    }
  }
  void check_count(std::uint64_t count, std::uint64_t bytes_each) const {
    if (count * bytes_each > data_.size() - pos_) {
      throw Error(ErrorCode::kInvalidInput, "'" + name_ + "': truncated");
    }
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error(ErrorCode::kInvalidInput, "'" + name_ + "': truncated");
  }
  std::vector<unsigned char> data_;
  std::size_t pos_ = 0;
  std::string name_;
};

void check_dims(std::uint32_t w, std::uint32_t h, const std::string& what) {
  if (w == 0 || h == 0 || w > 65535 || h > 65535) {
    throw Error(ErrorCode::kInvalidInput, what + ": invalid dimensions");
  }
}

json parse_json(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, "'" + path.string() + "': " + e.what());
  }
}

template <typename F>
auto json_guard(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, "'" + path.string() + "': " + e.what());
  }
}

}  // namespace

DepthImage read_depth_dgn(const fs::path& path) {
  Reader r(path);
  r.magic("DGN1");
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  check_dims(w, h, path.string());
  r.check_count(static_cast<std::uint64_t>(w) * h, 4);
  DepthImage d(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < d.size(); ++i) d.set(i, r.f32());
  r.finish();
  return d;
}

void write_depth_dgn(const fs::path& path, const DepthImage& depth) {
  Writer w;
  w.magic("DGN1");
  w.u32(static_cast<std::uint32_t>(depth.width()));
  w.u32(static_cast<std::uint32_t>(depth.height()));
  for (std::size_t i = 0; i < depth.size(); ++i) w.f32(depth.valid(i) ? depth.depth(i) : 0.0);
  write_file(path, w.data());
}

DepthImage read_depth_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  const auto bytes = read_file(path);
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::kInvalidInput, "'" + path.string() + "': " + image.message);
  }
  if ((image.format & PNG_FORMAT_FLAG_COLOR) || !(image.format & PNG_FORMAT_FLAG_LINEAR)) {
    png_image_free(&image);
    throw Error(ErrorCode::kInvalidInput, "'" + path.string() + "': expected 16-bit grayscale");
  }
  image.format = PNG_FORMAT_LINEAR_Y;
  std::vector<std::uint16_t> pixels(PNG_IMAGE_SIZE(image) / 2);
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::kInvalidInput, "'" + path.string() + "': " + image.message);
  }
  DepthImage d(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < d.size(); ++i) d.set(i, pixels[i] / 1000.0);
  return d;
}

void write_depth_png(const fs::path& path, const DepthImage& depth) {
  std::vector<std::uint16_t> pixels(depth.size(), 0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!depth.valid(i)) continue;
    const double mm = std::round(depth.depth(i) * 1000.0);
    pixels[i] = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(depth.width());
  image.height = static_cast<png_uint_32>(depth.height());
  image.format = PNG_FORMAT_LINEAR_Y;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIo, "'" + path.string() + "': " + image.message);
  }
}

DepthImage read_depth(const fs::path& path) {
  return path.extension() == ".png" ? read_depth_png(path) : read_depth_dgn(path);
}

CameraIntrinsics read_intrinsics(const fs::path& path) {
  const json j = parse_json(path);
  CameraIntrinsics c = json_guard(path, [&] {
    return CameraIntrinsics{j.at("fx").get<double>(), j.at("fy").get<double>(),
                            j.at("cx").get<double>(), j.at("cy").get<double>()};
  });
  c.validate();
  return c;
}

void write_intrinsics(const fs::path& path, const CameraIntrinsics& c) {
  json j = {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}};
  write_file(path, j.dump(2) + "\n");
}

DeformationGraph read_graph(const fs::path& path) {
  const json j = parse_json(path);
  DeformationGraph g = json_guard(path, [&] {
    DeformationGraph g;
    for (const auto& n : j.at("nodes")) {
      g.nodes.emplace_back(n.at(0).get<double>(), n.at(1).get<double>(), n.at(2).get<double>());
    }
    g.edges = j.at("edges").get<std::vector<std::vector<int>>>();
    g.cluster_id = j.at("clusters").get<std::vector<int>>();
    g.sigma = j.at("sigma").get<double>();
    return g;
  });
  g.validate();
  return g;
}

void write_graph(const fs::path& path, const DeformationGraph& g) {
  json nodes = json::array();
  for (const auto& v : g.nodes) nodes.push_back({v.x(), v.y(), v.z()});
  json j = {{"nodes", nodes}, {"edges", g.edges}, {"clusters", g.cluster_id}, {"sigma", g.sigma}};
  write_file(path, j.dump() + "\n");
}

SkinningTable read_skinning(const fs::path& path) {
  Reader r(path);
  r.magic("SKN1");
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  check_dims(w, h, path.string());
  r.check_count(static_cast<std::uint64_t>(w) * h, 32);
  SkinningTable skin(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t px = 0; px < skin.size(); ++px) {
    std::array<int, SkinningTable::kSupport> nodes;
    std::array<double, SkinningTable::kSupport> weights;
    for (auto& n : nodes) {
      const std::uint32_t v = r.u32();
      if (v != 0xFFFFFFFFu && v > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
        throw Error(ErrorCode::kInvalidInput, "'" + path.string() + "': node index overflow");
      }
      n = v == 0xFFFFFFFFu ? -1 : static_cast<int>(v);
    }
    double sum = 0.0;
    for (int k = 0; k < SkinningTable::kSupport; ++k) {
      const double v = r.f32();
      weights[k] = nodes[k] >= 0 ? v : 0.0;
      sum += weights[k];
    }
    if (nodes[0] < 0) continue;
    if (!(sum > 0.0)) throw Error(ErrorCode::kInvalidInput, "'" + path.string() + "': zero weights");
    for (auto& x : weights) x /= sum;
    skin.set(px, nodes, weights);
  }
  r.finish();
  return skin;
}

void write_skinning(const fs::path& path, const SkinningTable& skin) {
  Writer w;
  w.magic("SKN1");
  w.u32(static_cast<std::uint32_t>(skin.width()));
  w.u32(static_cast<std::uint32_t>(skin.height()));
  for (std::size_t px = 0; px < skin.size(); ++px) {
    const bool s = skin.supported(px);
    for (int k = 0; k < SkinningTable::kSupport; ++k) {
      const int n = s ? skin.nodes(px)[k] : -1;
      w.u32(n < 0 ? 0xFFFFFFFFu : static_cast<std::uint32_t>(n));
    }
    for (int k = 0; k < SkinningTable::kSupport; ++k) {
      w.f32(s && skin.nodes(px)[k] >= 0 ? skin.weights(px)[k] : 0.0);
    }
  }
  write_file(path, w.data());
}

std::string motion_to_json(const GraphMotion& motion) {
  json arr = json::array();
  for (std::size_t i = 0; i < motion.node_count(); ++i) {
    const Mat3& r = motion.rotations[i];
    const Vec3& t = motion.translations[i];
    arr.push_back({{"R", {r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1), r(1, 2), r(2, 0), r(2, 1), r(2, 2)}},
                   {"t", {t.x(), t.y(), t.z()}}});
  }
  return arr.dump() + "\n";
}

GraphMotion read_motion(const fs::path& path) {
  const json j = parse_json(path);
  return json_guard(path, [&] {
    GraphMotion m(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto r = j[i].at("R").get<std::vector<double>>();
      const auto t = j[i].at("t").get<std::vector<double>>();
      if (r.size() != 9 || t.size() != 3) {
        throw Error(ErrorCode::kInvalidInput, "'" + path.string() + "': bad motion entry");
      }
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) m.rotations[i](a, b) = r[3 * a + b];
      }
      m.translations[i] = {t[0], t[1], t[2]};
    }
    return m;
  });
}

void write_motion(const fs::path& path, const GraphMotion& motion) {
  write_file(path, motion_to_json(motion));
}

CorrespondenceSet read_correspondences(const fs::path& path) {
  Reader r(path);
  r.magic("COR1");
  const std::uint32_t count = r.u32();
  r.check_count(count, 17);
  CorrespondenceSet set;
  set.entries.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    Correspondence c;
    c.ux = r.u16();
    c.uy = r.u16();
    c.target.x() = r.f32();
    c.target.y() = r.f32();
    c.weight = r.f32();
    c.valid = r.u8() != 0;
    set.entries.push_back(c);
  }
  r.finish();
  return set;
}

void write_correspondences(const fs::path& path, const CorrespondenceSet& set) {
  Writer w;
  w.magic("COR1");
  w.u32(static_cast<std::uint32_t>(set.size()));
  for (const auto& c : set.entries) {
    if (c.ux < 0 || c.uy < 0 || c.ux > 65535 || c.uy > 65535) {
      throw Error(ErrorCode::kInvalidInput, "write_correspondences: pixel out of u16 range");
    }
    w.u16(static_cast<std::uint16_t>(c.ux));
    w.u16(static_cast<std::uint16_t>(c.uy));
    w.f32(c.target.x());
    w.f32(c.target.y());
    w.f32(c.weight);
    w.u8(c.valid ? 1 : 0);
  }
  write_file(path, w.data());
}

SceneFlow read_scene_flow(const fs::path& path) {
  Reader r(path);
  r.magic("SFL1");
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  check_dims(w, h, path.string());
  r.check_count(static_cast<std::uint64_t>(w) * h, 12);
  SceneFlow f(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < f.flow.size(); ++i) {
    const double x = r.f32(), y = r.f32(), z = r.f32();
    f.valid[i] = std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    if (f.valid[i]) f.flow[i] = {x, y, z};
  }
  r.finish();
  return f;
}

void write_scene_flow(const fs::path& path, const SceneFlow& flow) {
  Writer w;
  w.magic("SFL1");
  w.u32(static_cast<std::uint32_t>(flow.width));
  w.u32(static_cast<std::uint32_t>(flow.height));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < flow.flow.size(); ++i) {
    for (int k = 0; k < 3; ++k) w.f32(flow.valid[i] ? flow.flow[i][k] : nan);
  }
  write_file(path, w.data());
}

SceneMasks read_masks(const fs::path& path) {
  Reader r(path);
  r.magic("MSK1");
  SceneMasks m;
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  check_dims(w, h, path.string());
  const std::uint32_t nodes = r.u32();
  r.check_count(2ull * w * h + nodes, 1);
  m.width = static_cast<int>(w);
  m.height = static_cast<int>(h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  for (std::size_t i = 0; i < n; ++i) m.corr_mask.push_back(r.u8());
  for (std::size_t i = 0; i < n; ++i) m.flow_mask.push_back(r.u8());
  for (std::uint32_t i = 0; i < nodes; ++i) m.node_mask.push_back(r.u8());
  r.finish();
  return m;
}

void write_masks(const fs::path& path, const SceneMasks& m) {
  const std::size_t n = static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height);
  if (m.corr_mask.size() != n || m.flow_mask.size() != n) {
    throw Error(ErrorCode::kInvalidInput, "write_masks: mask size mismatch");
  }
  Writer w;
  w.magic("MSK1");
  w.u32(static_cast<std::uint32_t>(m.width));
  w.u32(static_cast<std::uint32_t>(m.height));
  w.u32(static_cast<std::uint32_t>(m.node_mask.size()));
  for (auto v : m.corr_mask) w.u8(v ? 1 : 0);
  for (auto v : m.flow_mask) w.u8(v ? 1 : 0);
  for (auto v : m.node_mask) w.u8(v ? 1 : 0);
  write_file(path, w.data());
}

namespace {

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

void save_scene(const SyntheticScene& s, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
  write_depth_dgn(dir / "source.dgn", s.source_depth);
  write_depth_dgn(dir / "target.dgn", s.target_depth);
  write_intrinsics(dir / "intrinsics.json", s.camera);
  write_correspondences(dir / "corr.cor", s.correspondences);
  write_graph(dir / "graph.json", s.graph);
  write_skinning(dir / "skinning.skn", s.skin);
  write_motion(dir / "gt_motion.json", s.gt_motion);
  write_scene_flow(dir / "scene_flow.bin", s.flow);
  write_masks(dir / "masks.bin", {s.width, s.height, s.corr_mask, s.flow_mask, s.node_mask});
  const ResolvedParams& p = s.params;
  json j = {
      {"kind", to_string(s.kind)},
      {"seed", s.seed},
      {"width", s.width},
      {"height", s.height},
      {"params",
       {{"rotation", vec_json(p.rotation)},
        {"translation", vec_json(p.translation)},
        {"bend_angle", p.bend_angle},
        {"sine_amplitude", p.sine_amplitude},
        {"sine_wavelength", p.sine_wavelength},
        {"sine_phase", p.sine_phase},
        {"rotation_b", vec_json(p.rotation_b)},
        {"translation_b", vec_json(p.translation_b)},
        {"plane_tilt", vec_json(p.plane_tilt)}}},
      {"graph_options",
       {{"sigma", s.graph_options.sigma},
        {"k_neighbors", s.graph_options.k_neighbors},
        {"edge_len_max", s.graph_options.edge_len_max}}},
  };
  write_file(dir / "scene.json", j.dump(2) + "\n");
}

SyntheticScene load_scene(const fs::path& dir) {
  SyntheticScene s;
  const json j = parse_json(dir / "scene.json");
  json_guard(dir / "scene.json", [&] {
    s.kind = scene_kind_from_string(j.at("kind").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    const json& p = j.at("params");
    s.params.rotation = json_vec(p.at("rotation"));
    s.params.translation = json_vec(p.at("translation"));
    s.params.bend_angle = p.at("bend_angle").get<double>();
    s.params.sine_amplitude = p.at("sine_amplitude").get<double>();
    s.params.sine_wavelength = p.at("sine_wavelength").get<double>();
    s.params.sine_phase = p.at("sine_phase").get<double>();
    s.params.rotation_b = json_vec(p.at("rotation_b"));
    s.params.translation_b = json_vec(p.at("translation_b"));
    s.params.plane_tilt = json_vec(p.at("plane_tilt"));
    const json& g = j.at("graph_options");
    s.graph_options = {g.at("sigma").get<double>(), g.at("k_neighbors").get<int>(),
                       g.at("edge_len_max").get<double>()};
    return 0;
  });
  s.camera = read_intrinsics(dir / "intrinsics.json");
  s.source_depth = read_depth_dgn(dir / "source.dgn");
  s.target_depth = read_depth_dgn(dir / "target.dgn");
  if (s.source_depth.width() != s.width || s.source_depth.height() != s.height ||
      s.target_depth.width() != s.width || s.target_depth.height() != s.height) {
    throw Error(ErrorCode::kInvalidInput, "load_scene: depth size disagrees with scene.json");
  }
  s.source = PointImage::from_depth(s.source_depth, s.camera);
  s.target = PointImage::from_depth(s.target_depth, s.camera);
  s.correspondences = read_correspondences(dir / "corr.cor");
  s.graph = read_graph(dir / "graph.json");
  s.skin = read_skinning(dir / "skinning.skn");
  s.gt_motion = read_motion(dir / "gt_motion.json");
  s.flow = read_scene_flow(dir / "scene_flow.bin");
  SceneMasks m = read_masks(dir / "masks.bin");
  if (s.skin.width() != s.width || s.skin.height() != s.height || s.flow.width != s.width ||
      s.flow.height != s.height || m.width != s.width || m.height != s.height ||
      s.gt_motion.node_count() != s.graph.node_count() ||
      m.node_mask.size() != s.graph.node_count()) {
    throw Error(ErrorCode::kInvalidInput, "load_scene: inconsistent scene files");
  }
  for (std::size_t px = 0; px < s.skin.size(); ++px) {
    for (int n : s.skin.nodes(px)) {
      if (n >= static_cast<int>(s.graph.node_count())) {
        throw Error(ErrorCode::kInvalidInput, "load_scene: skinning references a missing node");
      }
    }
  }
  s.corr_mask = std::move(m.corr_mask);
  s.flow_mask = std::move(m.flow_mask);
  s.node_mask = std::move(m.node_mask);
  s.gt_corr.assign(s.source.size(), Vec2::Zero());
  for (std::size_t px = 0; px < s.source.size(); ++px) {
    if (!s.source.valid(px) || !s.flow.valid[px]) continue;
    const Vec3 x = s.source.point(px) + s.flow.flow[px];
    if (x.z() > 0.0) s.gt_corr[px] = project(x, s.camera);
  }
  return s;
}

}  // namespace ntrack::io
