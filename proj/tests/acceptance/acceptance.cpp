// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures. `--only <name>` runs a single criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Geometry>

#include "fixtures.hpp"
#include "parallax/bundle.hpp"
#include "parallax/disparity.hpp"
#include "parallax/geometry.hpp"
#include "parallax/inpaint.hpp"
#include "parallax/normalize.hpp"
#include "parallax/rectify.hpp"
#include "parallax/viewsynth.hpp"
#include "synthetic.hpp"

using namespace parallax;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kRigTol = 1e-12;
constexpr int kRectPairs = 50;
constexpr double kRectMaxRotationDeg = 10.0;
constexpr double kRectDy = 0.5;
constexpr double kRectFraction = 0.95;
constexpr double kRectifiedResidual = 0.1;
constexpr double kRectSeconds = 60.0;
constexpr double kDispPx = 1.0;
constexpr double kDispFraction = 0.90;
constexpr double kBandPx = 1.0;
constexpr double kBandIoU = 0.9;
constexpr double kIdentityTol = 1e-4;
constexpr double kInpaintDepthTol = 1e-3;
constexpr double kLossTol = 1e-12;
constexpr double kQuantIntensity = 1.0 / 255.0;
constexpr double kQuantNid = 1.0 / 65535.0;
constexpr int kPerfSize = 512;
constexpr std::size_t kPerfFrames = 120;
constexpr double kPerfSingleMs = 100.0;
constexpr double kPerfWorkersMs = 30.0;
constexpr unsigned kPerfWorkers = 8;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

CameraView make_view(int w, int h, double focal) {
  CameraView v;
  v.focal = focal;
  v.width = w;
  v.height = h;
  v.principal = {0.5 * (w - 1), 0.5 * (h - 1)};
  return v;
}

std::size_t count(const Mask& m) { return static_cast<std::size_t>(std::count(m.data().begin(), m.data().end(), 1)); }

// ---------------------------------------------------------------------------

Outcome rig_formula() {
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> ub(0.05, 20.0), ud(0.5, 400.0), uz(0.2, 50.0);
  double worst_r = 0, worst_c = 0;
  for (int i = 0; i < 100; ++i) {
    const double b = ub(rng), dm = ud(rng);
    const int w = 7 + i % 5, h = 5 + i % 3;
    Raster<double> d(w, h);
    std::vector<double> inv;
    for (auto& v : d.data()) {
      v = uz(rng);
      inv.push_back(1.0 / v);
    }
    std::sort(inv.begin(), inv.end());
    const std::size_t n = inv.size();
    const double med = n % 2 ? inv[n / 2] : 0.5 * (inv[n / 2 - 1] + inv[n / 2]);
    const auto rig = geometry::compute_rig(DepthMap(d, Mask(w, h, 1)), dm, b, make_view(w, h, 10.0));
    const double want_r = (96.0 * b / dm) * (std::sqrt(2.0) / 2.0);
    worst_r = std::max(worst_r, std::abs(rig.r_w - want_r));
    worst_c = std::max({worst_c, std::abs(rig.center.z() - (-1.0 / med)), std::abs(rig.center.x()),
                        std::abs(rig.center.y())});
  }
  return {worst_r <= kRigTol && worst_c <= kRigTol,
          fmt("100 pairs, max |r_w err| %.2e, max |centre err| %.2e (tol %.0e)", worst_r, worst_c, kRigTol)};
}

Outcome rectification() {
  using namespace rectify;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2002);
  double worst_fraction = 1.0;
  for (int i = 0; i < kRectPairs; ++i) {
    const auto pair = testing::random_camera_pair(rng, kRectMaxRotationDeg);
    const auto est = estimate_fundamental(pair.matches);
    const auto h = loop_zhang_rectify(est.f, {640, 480}, {640, 480});
    int ok = 0;
    for (const auto& m : pair.matches)
      ok += std::abs(apply_h(h.left, m.left).y() - apply_h(h.right, m.right).y()) <= kRectDy;
    worst_fraction = std::min(worst_fraction, static_cast<double>(ok) / static_cast<double>(pair.matches.size()));
  }

  // Already rectified: parallel cameras offset along x.
  testing::Pinhole left;
  left.focal = 600;
  left.width = 640;
  left.height = 480;
  left.cx = 319.5;
  left.cy = 239.5;
  testing::Pinhole right = left;
  right.position = {1.0, 0.0, 0.0};
  const auto matches = testing::sample_matches(left, right, rng, 200);
  const auto h = loop_zhang_rectify(estimate_fundamental(matches).f, {640, 480}, {640, 480});
  double residual = 0;
  for (const auto& m : matches)
    residual = std::max(residual, std::abs(apply_h(h.left, m.left).y() - apply_h(h.right, m.right).y()));
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  return {worst_fraction >= kRectFraction && residual <= kRectifiedResidual && secs <= kRectSeconds,
          fmt("%d pairs, worst |dy|<=%.1f fraction %.4f (min %.2f); rectified residual %.2e px (max %.1f); %.1f s "
              "(max %.0f)",
              kRectPairs, kRectDy, worst_fraction, kRectFraction, residual, kRectifiedResidual, secs, kRectSeconds)};
}

Outcome disparity_oracle() {
  using namespace disparity;
  struct Scene {
    int w, h;
    double back, front;
    std::uint64_t seed;
  };
  const Scene scenes[] = {{160, 120, 4.0, 17.0, 5}, {200, 150, 2.0, 11.0, 31}, {128, 96, 6.0, 24.0, 77}};
  const DisparityConfig cfg;
  double worst_fraction = 1.0;
  std::size_t lr_bad = 0;
  for (const auto& sc : scenes) {
    const auto s = testing::two_plane_stereo(sc.w, sc.h, sc.back, sc.front, sc.seed);
    const auto d = dense_disparity(s.left, {}, s.right, {}, cfg);
    int within = 0;
    for (int y = 0; y < sc.h; ++y)
      for (int x = 0; x < sc.w; ++x)
        within += d.usable(x, y) && std::abs(d.data.at(x, y) - s.disparity.at(x, y)) <= kDispPx;
    worst_fraction = std::min(worst_fraction, static_cast<double>(within) / (sc.w * sc.h));

    // Independent right-to-left pass; every valid left pixel must agree.
    const Mask all(sc.w, sc.h, 1);
    const RawMatch rl = match_one_way(s.right, all, s.left, all, -1, cfg);
    const RawMatch lr = match_one_way(s.left, all, s.right, all, +1, cfg);
    for (int y = 0; y < sc.h; ++y)
      for (int x = 0; x < sc.w; ++x) {
        if (!d.valid.at(x, y)) continue;
        const int xr = static_cast<int>(std::lround(x - d.data.at(x, y)));
        const int yr = y + lr.dy.at(x, y);
        if (xr < 0 || xr >= sc.w || yr < 0 || yr >= sc.h || !rl.ok.at(xr, yr) ||
            std::abs(d.data.at(x, y) - rl.disparity.at(xr, yr)) > cfg.lr_tolerance)
          ++lr_bad;
      }
  }
  return {worst_fraction >= kDispFraction && lr_bad == 0,
          fmt("3 scenes, worst within-%.0fpx fraction %.4f (min %.2f); left-right violations %zu", kDispPx,
              worst_fraction, kDispFraction, lr_bad)};
}

Outcome double_reprojection() {
  const int w = 200, h = 160, fx0 = 80, fx1 = 130, fy0 = 50, fy1 = 110;
  const double zf = 1.0, zb = 2.0, f = 300.0;
  const GDImage gd = testing::two_plane_gd(w, h, fx0, fx1, fy0, fy1, zf, zb);
  const CameraView cam = make_view(w, h, f);
  double worst_width = 0, worst_iou = 1.0;
  for (const double delta : {0.02, 0.05, 0.0583, 0.08, -0.08, -0.117, 0.16}) {
    CameraView target = cam;
    target.position = {delta, 0, 0};
    const Mask m = geometry::double_reproject(gd, cam, target);
    const double width = f * std::abs(delta) * (1.0 / zf - 1.0 / zb);
    std::size_t inter = 0, uni = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const bool in = y >= fy0 && y <= fy1 &&
                        (delta > 0 ? (x < fx0 && x >= fx0 - width) : (x > fx1 && x <= fx1 + width));
        const bool got = m.at(x, y);
        inter += in && got;
        uni += in || got;
      }
    worst_iou = std::min(worst_iou, static_cast<double>(inter) / static_cast<double>(uni));
    std::vector<int> widths;
    for (int y = fy0; y <= fy1; ++y) {
      int n = 0;
      for (int x = 0; x < w; ++x) n += m.at(x, y);
      widths.push_back(n);
    }
    std::sort(widths.begin(), widths.end());
    worst_width = std::max(worst_width, std::abs(widths[widths.size() / 2] - width));
  }
  const std::size_t same = count(geometry::double_reproject(gd, cam, cam));
  const GDImage plane = testing::plane_gd(120, 90, 3.0);
  const CameraView pcam = make_view(120, 90, 100.0);
  CameraView moved = pcam;
  moved.position = {0.2, -0.1, -0.3};
  moved.rotation = look_at(moved.position, {0, 0, -3}, {0, 1, 0});
  const std::size_t single = count(geometry::double_reproject(plane, pcam, moved));
  return {worst_width <= kBandPx && worst_iou >= kBandIoU && same == 0 && single == 0,
          fmt("band width err %.2f px (max %.0f), IoU %.3f (min %.1f), same-camera holes %zu, single-plane holes %zu",
              worst_width, kBandPx, worst_iou, kBandIoU, same, single)};
}

Outcome identity_reprojection() {
  std::mt19937_64 rng(4004);
  double di = 0, dd = 0;
  std::size_t missing = 0;
  for (int i = 0; i < 20; ++i) {
    const GDImage gd = testing::smooth_random_gd(64, 48, rng);
    const CameraView cam = make_view(64, 48, 60.0);
    const GDImage out = geometry::render(geometry::depth_to_mesh(gd, cam), cam);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 64; ++x) {
        if (!out.valid_at(x, y)) {
          ++missing;
          continue;
        }
        di = std::max(di, static_cast<double>(std::abs(out.intensity().at(x, y) - gd.intensity().at(x, y))));
        dd = std::max(dd, std::abs(out.depth().at(x, y) - gd.depth().at(x, y)) / gd.depth().at(x, y));
      }
  }
  return {missing == 0 && di <= kIdentityTol && dd <= kIdentityTol,
          fmt("20 maps, max intensity err %.2e, max relative depth err %.2e (tol %.0e), uncovered %zu", di, dd,
              kIdentityTol, missing)};
}

Outcome inpainting() {
  using namespace inpaint;
  const int w = 200, h = 160;
  const GDImage gd = testing::two_plane_gd(w, h, 80, 130, 50, 110, 1.0, 2.0);
  const CameraView cam = make_view(w, h, 300.0);
  CameraView target = cam;
  target.position = {0.08, 0, 0};
  const Mask holes = geometry::double_reproject(gd, cam, target);
  Mask known(w, h);
  for (std::size_t i = 0; i < holes.size(); ++i) known[i] = !holes[i];
  const auto truth = normalize_inverse_depth(gd.depth());
  const auto req = make_request(gd.intensity(), truth, geometry::boundary_mask(gd, holes), known);
  const auto guided = inpaint_gd(req, true);
  const auto unguided = inpaint_gd(req, false);

  std::size_t changed = 0, unfilled = 0, n = 0;
  double worst = 0, err_g = 0, err_u = 0;
  for (std::size_t i = 0; i < holes.size(); ++i) {
    if (!guided.nid.valid[i]) ++unfilled;
    if (!holes[i]) {
      changed += guided.nid.values[i] != truth.values[i] || guided.intensity[i] != gd.intensity()[i];
      continue;
    }
    ++n;
    // The background is the farthest plane: normalized value 0.
    worst = std::max(worst, std::abs(guided.nid.values[i]));
    err_g += std::abs(guided.nid.values[i]);
    err_u += std::abs(unguided.nid.values[i]);
  }
  return {n > 0 && changed == 0 && unfilled == 0 && worst <= kInpaintDepthTol && err_g < err_u,
          fmt("%zu hole px, changed valid %zu, unfilled %zu, max depth err %.2e (tol %.0e), mean err guided %.3e < "
              "unguided %.3e",
              n, changed, unfilled, worst, kInpaintDepthTol, err_g / n, err_u / n)};
}

NormalizedInverseDepth nid_of(int w, int h, std::vector<double> v) {
  NormalizedInverseDepth n;
  n.values = Raster<double>(w, h, std::move(v));
  n.valid = Mask(w, h, 1);
  n.d_min = 0.5;
  n.d_max_inv = 1.0;
  return n;
}

Outcome loss_metrics() {
  using namespace inpaint;
  const auto a = depth_loss(nid_of(2, 2, {0.3, 0.3, 0.3, 0.3}), nid_of(2, 2, {0.3, 0.3, 0.3, 0.3}), Mask(2, 2, 1));
  const auto b = depth_loss(nid_of(1, 1, {0.5}), nid_of(1, 1, {1.0}), Mask(1, 1, 0));
  Mask m(2, 1, 0);
  m.at(0, 0) = 1;
  const auto c = depth_loss(nid_of(2, 1, {0.2, 0.2}), nid_of(2, 1, {0.2, 0.6}), m);
  const double e = std::max({std::abs(a.total - 0.0), std::abs(b.total - 3.0), std::abs(c.total - 2.42)});

  std::mt19937_64 rng(7007);
  std::uniform_real_distribution<double> u(0, 1);
  double combo = 0;
  for (int t = 0; t < 200; ++t) {
    const int w = 1 + static_cast<int>(u(rng) * 24), h = 1 + static_cast<int>(u(rng) * 24);
    std::vector<double> p(static_cast<std::size_t>(w * h)), q(p.size());
    Mask k(w, h);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = u(rng);
      q[i] = u(rng);
      k[i] = u(rng) < 0.6;
    }
    const auto r = depth_loss(nid_of(w, h, p), nid_of(w, h, q), k);
    combo = std::max(combo, std::abs(r.total - (r.l_valid + 6.0 * r.l_hole + 0.1 * r.tv_term)));
  }
  return {e <= kLossTol && combo <= kLossTol,
          fmt("examples (0, 3, 2.42) max err %.2e; linear combination max err %.2e over 200 inputs (tol %.0e)", e,
              combo, kLossTol)};
}

Outcome bundle_round_trip() {
  const fs::path dir = fs::temp_directory_path() / "parallax_acceptance_bundle";
  fs::remove_all(dir);
  const SceneBundle a = testing::two_plane_bundle(160, 128);
  bundle::save(a, dir);
  const SceneBundle b = bundle::load(dir);
  double di = 0, dn = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& ia = a.gds[i].intensity();
    const auto& ib = b.gds[i].intensity();
    for (std::size_t p = 0; p < ia.size(); ++p) di = std::max(di, static_cast<double>(std::abs(ia[p] - ib[p])));
    const auto na = normalize_inverse_depth(a.gds[i].depth());
    const auto& db = b.gds[i].depth().depth();
    for (std::size_t p = 0; p < db.size(); ++p) {
      const double nb = na.degenerate ? 0.0 : (1.0 / db[p] - na.d_min) / (na.d_max_inv - na.d_min);
      dn = std::max(dn, std::abs(nb - na.values[p]));
    }
  }

  // Flip one byte inside a raster.
  const fs::path target = dir / bundle::nid_file(3);
  std::string bytes;
  {
    std::ifstream in(target, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x5a);
  std::ofstream(target, std::ios::binary | std::ios::trunc) << bytes;
  std::string tamper = "not detected";
  try {
    bundle::load(dir);
  } catch (const Error& e) {
    tamper = e.what();
  }
  fs::remove_all(dir);
  return {di <= kQuantIntensity && dn <= kQuantNid && tamper == "corrupt bundle",
          fmt("max intensity err %.2e (max %.2e), max depth err %.2e (max %.2e), tamper: %s", di, kQuantIntensity, dn,
              kQuantNid, tamper.c_str())};
}

Outcome renderer_performance() {
  const SceneBundle b = testing::two_plane_bundle(kPerfSize, kPerfSize);
  const auto single = viewsynth::benchmark(b, kPerfFrames, {1});
  const auto multi = viewsynth::benchmark(b, kPerfFrames, {kPerfWorkers});
  return {single.p99_ms <= kPerfSingleMs && multi.p99_ms <= kPerfWorkersMs,
          fmt("%dx%d, %zu frames: p99 %.1f ms single (max %.0f), p99 %.1f ms with %u workers (max %.0f) on %u "
              "hardware threads",
              kPerfSize, kPerfSize, kPerfFrames, single.p99_ms, kPerfSingleMs, multi.p99_ms, kPerfWorkers,
              kPerfWorkersMs, std::thread::hardware_concurrency())};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

Outcome end_to_end_determinism() {
#ifndef PARALLAX_CLI_PATH
  return {false, "command line tool not built"};
#else
  const fs::path root = fs::temp_directory_path() / "parallax_acceptance_e2e";
  fs::remove_all(root);
  testing::write_fixture_set(root / "fixtures");
  int status[2];
  for (int run = 0; run < 2; ++run) {
    const std::string cmd = std::string("\"") + PARALLAX_CLI_PATH + "\" all \"" + (root / "fixtures").string() +
                            "\" --out \"" + (root / ("run" + std::to_string(run))).string() + "\" 2>/dev/null";
    status[run] = std::system(cmd.c_str());
  }
  const auto a = tree(root / "run0"), b = tree(root / "run1");
  std::size_t bundles = 0;
  for (const auto& [name, _] : a) bundles += name.ends_with("bundle/manifest.json");
  std::size_t differ = 0;
  for (const auto& [name, content] : a) {
    const auto it = b.find(name);
    differ += it == b.end() || it->second != content;
  }
  differ += b.size() > a.size() ? b.size() - a.size() : 0;
  fs::remove_all(root);
  return {status[0] == 0 && status[1] == 0 && bundles == 2 && differ == 0 && !a.empty(),
          fmt("exit %d/%d, %zu files, %zu bundles, %zu differing files", status[0], status[1], a.size(), bundles,
              differ)};
#endif
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"rig-formula", rig_formula},
      {"rectification", rectification},
      {"disparity", disparity_oracle},
      {"double-reprojection", double_reprojection},
      {"identity-reprojection", identity_reprojection},
      {"inpainting", inpainting},
      {"loss-metrics", loss_metrics},
      {"bundle-round-trip", bundle_round_trip},
      {"renderer-performance", renderer_performance},
      {"end-to-end-determinism", end_to_end_determinism},
  };
  std::string only;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--only") only = argv[i + 1];

  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && name != only) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
