#include "parallax/sidecar.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "parallax/io.hpp"
#include "parallax/json_util.hpp"

namespace parallax::sidecar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "raw sidecars assume a little-endian host");

json read_json(const fs::path& file) {
  if (!fs::is_regular_file(file)) throw Error("missing " + file.filename().string());
  const auto bytes = io::read_file(file);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception&) {
    throw Error("malformed " + file.filename().string());
  }
}

json mat_json(const Eigen::Matrix3d& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Eigen::Matrix3d mat_from(const json& a) {
  if (!a.is_array() || a.size() != 9) throw Error("malformed matrix");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = a[static_cast<std::size_t>(r * 3 + c)].get<double>();
  return m;
}

template <typename T>
void write_raw(const fs::path& file, const Raster<T>& r) {
  std::vector<std::uint8_t> bytes(r.size() * sizeof(T));
  if (!bytes.empty()) std::memcpy(bytes.data(), r.data().data(), bytes.size());
  io::write_file(file, bytes);
}

template <typename T>
Raster<T> read_raw(const fs::path& file, int w, int h) {
  if (!fs::is_regular_file(file)) throw Error("missing " + file.filename().string());
  const auto bytes = io::read_file(file);
  Raster<T> r(w, h);
  if (bytes.size() != r.size() * sizeof(T)) throw Error("truncated " + file.filename().string());
  if (!bytes.empty()) std::memcpy(r.data().data(), bytes.data(), bytes.size());
  return r;
}

void write_gray16(const fs::path& file, const ImageGray& img) {
  Raster<std::uint16_t> q(img.width(), img.height());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = io::quantize16(img[i]);
  io::write_file(file, io::encode_png16(q));
}

ImageGray read_gray16(const fs::path& file) {
  const auto q = io::decode_png16(io::read_file(file));
  ImageGray out(q.width(), q.height());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = static_cast<float>(q[i] / 65535.0);
  return out;
}

}  // namespace

void save_matches(const fs::path& file, const ingest::MatchReport& r) {
  json matches = json::array();
  for (const auto& m : r.matches) matches.push_back(json::array({m.left.x(), m.left.y(), m.right.x(), m.right.y()}));
  const json j = {{"n_keypoints_left", r.n_keypoints_left},
                  {"n_keypoints_right", r.n_keypoints_right},
                  {"n_keypoints", r.n_keypoints},
                  {"n_attempted", r.n_attempted},
                  {"n_good", r.n_good},
                  {"verdict", ingest::to_string(r.verdict)},
                  {"reason", r.reason},
                  {"matches", matches}};
  io::write_text(file, canonical_json(j));
}

ingest::MatchReport load_matches(const fs::path& file) {
  const json j = read_json(file);
  ingest::MatchReport r;
  try {
    r.n_keypoints_left = j.at("n_keypoints_left").get<std::size_t>();
    r.n_keypoints_right = j.at("n_keypoints_right").get<std::size_t>();
    r.n_keypoints = j.at("n_keypoints").get<std::size_t>();
    r.n_attempted = j.at("n_attempted").get<std::size_t>();
    r.n_good = j.at("n_good").get<std::size_t>();
    r.verdict = ingest::verdict_from_string(j.at("verdict").get<std::string>());
    r.reason = j.at("reason").get<std::string>();
    for (const auto& m : j.at("matches"))
      r.matches.push_back({{m.at(0).get<double>(), m.at(1).get<double>()}, {m.at(2).get<double>(), m.at(3).get<double>()}});
  } catch (const json::exception&) {
    throw Error("malformed match.json");
  }
  return r;
}

void save_rectified(const fs::path& dir, const rectify::RectifiedPair& p) {
  fs::create_directories(dir);
  write_gray16(dir / "left.png", p.left);
  write_gray16(dir / "right.png", p.right);
  io::write_mask(dir / "left_valid.png", p.left_valid);
  io::write_mask(dir / "right_valid.png", p.right_valid);
  const json j = {{"width", p.left.width()},
                  {"height", p.left.height()},
                  {"h_left", mat_json(p.h_left)},
                  {"h_right", mat_json(p.h_right)},
                  {"focal", p.focal},
                  {"baseline", p.baseline},
                  {"disparity_offset", p.disparity_offset},
                  {"principal", json::array({p.principal.x(), p.principal.y()})},
                  {"min_disparity", p.min_disparity},
                  {"max_disparity", p.max_disparity}};
  io::write_text(dir / "rectify.json", canonical_json(j));
}

rectify::RectifiedPair load_rectified(const fs::path& dir) {
  const json j = read_json(dir / "rectify.json");
  rectify::RectifiedPair p;
  try {
    p.h_left = mat_from(j.at("h_left"));
    p.h_right = mat_from(j.at("h_right"));
    p.focal = j.at("focal").get<double>();
    p.baseline = j.at("baseline").get<double>();
    p.disparity_offset = j.at("disparity_offset").get<double>();
    p.principal = {j.at("principal").at(0).get<double>(), j.at("principal").at(1).get<double>()};
    p.min_disparity = j.at("min_disparity").get<double>();
    p.max_disparity = j.at("max_disparity").get<double>();
  } catch (const json::exception&) {
    throw Error("malformed rectify.json");
  }
  p.left = read_gray16(dir / "left.png");
  p.right = read_gray16(dir / "right.png");
  p.left_valid = io::read_mask(dir / "left_valid.png");
  p.right_valid = io::read_mask(dir / "right_valid.png");
  if (!p.left.same_shape(p.right) || !p.left.same_shape(p.left_valid) || !p.right.same_shape(p.right_valid))
    throw Error("rectified rasters differ in size");
  return p;
}

void save_disparity(const fs::path& dir, const DisparityResult& r) {
  fs::create_directories(dir);
  const auto& d = r.disparity;
  write_raw(dir / "disparity.f32", d.data);
  io::write_mask(dir / "valid.png", d.valid);
  io::write_mask(dir / "filled.png", d.filled);
  write_raw(dir / "depth.f64", r.depth.depth.depth());
  io::write_mask(dir / "depth_valid.png", r.depth.depth.valid());
  io::write_mask(dir / "far_clamped.png", r.depth.far_clamped);
  ImageGray preview(d.width(), d.height(), 0.0f);
  if (d.d_max > 0)
    for (int y = 0; y < d.height(); ++y)
      for (int x = 0; x < d.width(); ++x)
        if (d.usable(x, y)) preview.at(x, y) = static_cast<float>(std::clamp(d.data.at(x, y) / d.d_max, 0.0, 1.0));
  io::write_gray(dir / "preview.png", preview);
  const json j = {{"width", d.width()}, {"height", d.height()}, {"d_max", d.d_max},
                  {"focal", r.focal},   {"baseline", r.baseline}};
  io::write_text(dir / "disparity.json", canonical_json(j));
}

DisparityResult load_disparity(const fs::path& dir) {
  const json j = read_json(dir / "disparity.json");
  DisparityResult r;
  int w = 0, h = 0;
  try {
    w = j.at("width").get<int>();
    h = j.at("height").get<int>();
    r.disparity.d_max = j.at("d_max").get<double>();
    r.focal = j.at("focal").get<double>();
    r.baseline = j.at("baseline").get<double>();
  } catch (const json::exception&) {
    throw Error("malformed disparity.json");
  }
  r.disparity.data = read_raw<float>(dir / "disparity.f32", w, h);
  r.disparity.valid = io::read_mask(dir / "valid.png");
  r.disparity.filled = io::read_mask(dir / "filled.png");
  r.depth.depth = DepthMap(read_raw<double>(dir / "depth.f64", w, h), io::read_mask(dir / "depth_valid.png"));
  r.depth.far_clamped = io::read_mask(dir / "far_clamped.png");
  return r;
}

}  // namespace parallax::sidecar
