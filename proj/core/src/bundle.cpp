#include "parallax/bundle.hpp"

#include <cmath>

#include "parallax/geometry.hpp"
#include "parallax/io.hpp"
#include "parallax/json_util.hpp"
#include "parallax/normalize.hpp"
#include "parallax/viewsynth.hpp"

namespace parallax::bundle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("malformed manifest");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string intensity_file(std::size_t i) { return "gd" + std::to_string(i) + "_intensity.png"; }
std::string nid_file(std::size_t i) { return "gd" + std::to_string(i) + "_nid.png"; }
std::string known_file(std::size_t i) { return "gd" + std::to_string(i) + "_known.png"; }

json camera_to_json(const CameraView& cam) {
  json r = json::array();
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) r.push_back(cam.rotation(row, col));
  return {{"position", vec_json(cam.position)},
          {"rotation", r},
          {"focal", cam.focal},
          {"principal", json::array({cam.principal.x(), cam.principal.y()})},
          {"width", cam.width},
          {"height", cam.height}};
}

CameraView camera_from_json(const json& j) {
  CameraView cam;
  cam.position = vec_from(j.at("position"));
  const json& r = j.at("rotation");
  if (!r.is_array() || r.size() != 9) throw Error("malformed manifest");
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) cam.rotation(row, col) = r[static_cast<std::size_t>(row * 3 + col)].get<double>();
  cam.focal = j.at("focal").get<double>();
  const json& p = j.at("principal");
  if (!p.is_array() || p.size() != 2) throw Error("malformed manifest");
  cam.principal = {p[0].get<double>(), p[1].get<double>()};
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  return cam;
}

json manifest(const SceneBundle& b, const json& checksums) {
  json cameras = json::array();
  for (const auto& v : b.rig.views) cameras.push_back(camera_to_json(v));
  json gds = json::array();
  for (std::size_t i = 0; i < 5; ++i) {
    const NormalizedInverseDepth nid = normalize_inverse_depth(b.gds[i].depth());
    json g = {{"intensity", intensity_file(i)},
              {"nid", nid_file(i)},
              {"d_min", nid.d_min},
              {"d_max_inv", nid.d_max_inv},
              {"degenerate", nid.degenerate}};
    if (!b.known[i].empty()) g["known"] = known_file(i);
    gds.push_back(std::move(g));
  }
  return {{"schema_version", kSchemaVersion},
          {"width", b.gds[0].width()},
          {"height", b.gds[0].height()},
          {"cameras", cameras},
          {"rig", {{"center", vec_json(b.rig.center)}, {"r_w", b.rig.r_w}, {"r_h", b.rig.r_h}, {"up", vec_json(b.rig.up)}}},
          {"head", {{"lo", vec_json(b.head.lo)}, {"hi", vec_json(b.head.hi)}}},
          {"gds", gds},
          {"checksums", checksums},
          {"triangle_threshold", geometry::kTriangleThreshold},
          {"blend_tolerance", viewsynth::kBlendTolerance},
          {"provenance",
           {{"record_id", b.provenance.record_id},
            {"pipeline_version", b.provenance.pipeline_version},
            {"parameters", b.provenance.parameters}}}};
}

void save(const SceneBundle& b, const fs::path& dir) {
  b.validate();
  fs::create_directories(dir);
  json checksums = json::object();
  for (std::size_t i = 0; i < 5; ++i) {
    const GDImage& gd = b.gds[i];
    const auto png8 = io::encode_gray(gd.intensity());
    const NormalizedInverseDepth nid = normalize_inverse_depth(gd.depth());
    Raster<std::uint16_t> q(gd.width(), gd.height());
    for (std::size_t p = 0; p < q.size(); ++p) q[p] = io::quantize16(nid.values[p]);
    const auto png16 = io::encode_png16(q);
    io::write_file(dir / intensity_file(i), png8);
    io::write_file(dir / nid_file(i), png16);
    checksums[intensity_file(i)] = io::sha256_hex(png8);
    checksums[nid_file(i)] = io::sha256_hex(png16);
    if (!b.known[i].empty()) {
      Raster<std::uint8_t> k(gd.width(), gd.height());
      for (std::size_t p = 0; p < k.size(); ++p) k[p] = b.known[i][p] ? 255 : 0;
      const auto png = io::encode_png8(k);
      io::write_file(dir / known_file(i), png);
      checksums[known_file(i)] = io::sha256_hex(png);
    }
  }
  io::write_text(dir / kManifestName, canonical_json(manifest(b, checksums)));
}

SceneBundle load(const fs::path& dir) {
  const fs::path mpath = dir / kManifestName;
  if (!fs::is_regular_file(mpath)) throw Error("missing manifest");
  json m;
  try {
    const auto bytes = io::read_file(mpath);
    m = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception&) {
    throw Error("malformed manifest");
  }
  if (!m.is_object() || !m.contains("schema_version") || !m["schema_version"].is_number_integer())
    throw Error("malformed manifest");
  if (m["schema_version"].get<int>() != kSchemaVersion) throw Error("unsupported schema version");

  try {
    const json& gds = m.at("gds");
    const json& cams = m.at("cameras");
    if (!gds.is_array() || gds.size() != 5 || !cams.is_array() || cams.size() != 5)
      throw Error("bundle must hold five GD images");
    const json& checksums = m.at("checksums");

    const auto read_checked = [&](const std::string& name) {
      const fs::path p = dir / name;
      if (!fs::is_regular_file(p)) throw Error("missing raster file");
      auto bytes = io::read_file(p);
      if (!checksums.contains(name) || checksums[name].get<std::string>() != io::sha256_hex(bytes))
        throw Error("corrupt bundle");
      return bytes;
    };

    geometry::QuadRig rig;
    const json& r = m.at("rig");
    rig.center = vec_from(r.at("center"));
    rig.r_w = r.at("r_w").get<double>();
    rig.r_h = r.at("r_h").get<double>();
    rig.up = vec_from(r.at("up"));
    for (std::size_t i = 0; i < 5; ++i) rig.views[i] = camera_from_json(cams[i]);

    std::array<GDImage, 5> images;
    std::array<Mask, 5> known;
    for (std::size_t i = 0; i < 5; ++i) {
      const json& g = gds[i];
      const auto ib = read_checked(g.at("intensity").get<std::string>());
      const auto nb = read_checked(g.at("nid").get<std::string>());
      ImageGray intensity;
      Raster<std::uint16_t> q;
      try {
        intensity = io::decode_gray(ib);
        q = io::decode_png16(nb);
      } catch (const Error&) {
        throw Error("corrupt bundle");
      }
      if (!q.same_shape(intensity)) throw Error("corrupt bundle");
      NormalizedInverseDepth nid;
      nid.values = Raster<double>(q.width(), q.height());
      for (std::size_t p = 0; p < q.size(); ++p) nid.values[p] = q[p] / 65535.0;
      nid.valid = Mask(q.width(), q.height(), 1);
      nid.d_min = g.at("d_min").get<double>();
      nid.d_max_inv = g.at("d_max_inv").get<double>();
      nid.degenerate = g.at("degenerate").get<bool>();
      images[i] = GDImage(std::move(intensity), denormalize(nid));
      if (g.contains("known")) {
        try {
          known[i] = io::decode_png8(read_checked(g["known"].get<std::string>()));
        } catch (const Error& e) {
          if (std::string(e.what()) == "missing raster file") throw;
          throw Error("corrupt bundle");
        }
        for (auto& v : known[i].data()) v = v >= 128 ? 1 : 0;
      }
    }

    Provenance prov;
    if (m.contains("provenance")) {
      const json& p = m["provenance"];
      prov.record_id = p.value("record_id", "");
      prov.pipeline_version = p.value("pipeline_version", "");
      prov.parameters = p.value("parameters", json::object());
    }
    SceneBundle b = make_bundle(rig, std::move(images), std::move(prov));
    b.known = std::move(known);
    b.validate();
    if (m.contains("head") &&
        (vec_from(m["head"].at("lo")) != b.head.lo || vec_from(m["head"].at("hi")) != b.head.hi))
      throw Error("head volume inconsistent with rig");
    return b;
  } catch (const json::exception&) {
    throw Error("malformed manifest");
  }
}

}  // namespace parallax::bundle
