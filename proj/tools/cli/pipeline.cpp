#include "pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "parallax/bundle.hpp"
#include "parallax/geometry.hpp"
#include "parallax/inpaint.hpp"
#include "parallax/normalize.hpp"
#include "parallax/sidecar.hpp"
#include "parallax/thread_pool.hpp"

#ifndef PARALLAX_VERSION
#define PARALLAX_VERSION "dev"
#endif

namespace parallax::cli {

namespace fs = std::filesystem;
using nlohmann::json;

nlohmann::json LogEntry::to_json() const {
  return {{"record", record}, {"stage", stage}, {"status", status}, {"reason", reason}};
}

void Log::write(std::ostream& out) const {
  for (const auto& e : entries_) out << e.to_json().dump() << '\n';
}

void Log::write_file(const fs::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write log " + file.string());
  write(out);
}

namespace {

template <typename F>
LogEntry guarded(const fs::path& record, const char* stage, F&& body) {
  LogEntry e{record.filename().string(), stage, "ok", ""};
  try {
    body(e);
  } catch (const std::exception& ex) {
    e.status = "error";
    e.reason = ex.what();
  }
  return e;
}

bool culled(const fs::path& record, LogEntry& e) {
  const auto report = sidecar::load_matches(record / "match.json");
  if (report.verdict != ingest::Verdict::cull) return false;
  e.status = "skipped";
  e.reason = "culled";
  return true;
}

}  // namespace

std::vector<std::string> ingest_stage(const std::string& locator, const fs::path& out, const PipelineConfig& cfg,
                                      Log& log) {
  std::vector<std::string> warnings;
  const auto records = ingest::fetch_records(locator, cfg.limit, cfg.fetch, &warnings);
  for (const auto& w : warnings) log.add({"", "ingest", "skipped", w});
  fs::create_directories(out);
  std::vector<std::string> ids;
  std::vector<LogEntry> entries(records.size());
  ThreadPool pool(cfg.workers);
  pool.parallel_for(records.size(), [&](std::size_t i) {
    const auto& rec = records[i];
    const fs::path dir = out / rec.id;
    entries[i] = guarded(dir, "ingest", [&](LogEntry& e) {
      ingest::save_record_dir(dir / "raw", rec);
      // Match what later stages will read back from disk.
      const ingest::RawRecord stored = ingest::load_record_dir(dir / "raw");
      const ingest::MatchReport report = ingest::match_and_cull(stored, cfg.match);
      sidecar::save_matches(dir / "match.json", report);
      e.status = ingest::to_string(report.verdict);
      e.reason = report.reason.empty()
                     ? std::to_string(report.n_good) + " good of " + std::to_string(report.n_keypoints) + " keypoints"
                     : report.reason;
    });
    entries[i].record = rec.id;
  });
  for (const auto& rec : records) ids.push_back(rec.id);
  log.append(entries);
  return ids;
}

LogEntry rectify_stage(const fs::path& record, const PipelineConfig& cfg) {
  return guarded(record, "rectify", [&](LogEntry& e) {
    if (culled(record, e)) return;
    const ingest::RawRecord rec = ingest::load_record_dir(record / "raw");
    const ingest::MatchReport report = sidecar::load_matches(record / "match.json");
    const ingest::AlignedPair aligned = ingest::align_crops(rec, report);

    // Matches re-expressed in the aligned crops.
    std::vector<ingest::PointMatch> matches;
    const auto& l = aligned.left_region;
    const auto& r = aligned.right_region;
    for (const auto& m : report.matches)
      if (l.contains(m.left.x(), m.left.y()) && r.contains(m.right.x(), m.right.y()))
        matches.push_back({m.left - Eigen::Vector2d(l.x, l.y), m.right - Eigen::Vector2d(r.x, r.y)});

    const auto est = rectify::estimate_fundamental(matches, cfg.ransac);
    std::vector<ingest::PointMatch> inliers;
    for (std::size_t i : est.inliers) inliers.push_back(matches[i]);
    const rectify::ImageSize ls{aligned.left.width(), aligned.left.height()};
    const rectify::ImageSize rs{aligned.right.width(), aligned.right.height()};
    const rectify::Principals pp{aligned.principal_left, aligned.principal_right};
    const auto h = rectify::loop_zhang_rectify(est.f, ls, rs, pp, rectify::RectifyOptions{cfg.max_size});
    const auto pair = rectify::apply_and_offset(aligned.left, aligned.right, h, inliers, aligned.principal_left);
    sidecar::save_rectified(record / "rectified", pair);
    e.reason = std::to_string(inliers.size()) + " inliers of " + std::to_string(matches.size());
  });
}

LogEntry disparity_stage(const fs::path& record, const PipelineConfig& cfg) {
  return guarded(record, "disparity", [&](LogEntry& e) {
    if (culled(record, e)) return;
    const auto pair = sidecar::load_rectified(record / "rectified");
    sidecar::DisparityResult r;
    r.disparity = disparity::dense_disparity(pair, cfg.disparity);
    r.focal = pair.focal;
    r.baseline = pair.baseline;
    r.depth = disparity::disparity_to_depth(r.disparity, r.focal, r.baseline);
    sidecar::save_disparity(record / "disparity", r);
    e.reason = "d_max " + json(r.disparity.d_max).dump();
  });
}

LogEntry build_stage(const fs::path& record, const PipelineConfig& cfg) {
  return guarded(record, "build", [&](LogEntry& e) {
    if (culled(record, e)) return;
    const auto pair = sidecar::load_rectified(record / "rectified");
    const auto dr = sidecar::load_disparity(record / "disparity");
    const int w = pair.left.width(), h = pair.left.height();
    if (dr.depth.depth.width() != w || dr.depth.depth.height() != h) throw Error("disparity does not match rectified pair");

    CameraView cam;
    cam.focal = pair.focal;
    cam.principal = pair.principal;
    cam.width = w;
    cam.height = h;

    // M0: pixels with both a rectified intensity and a depth, minus specks
    // too small to carry a triangle of their own.
    Mask known(w, h, 0);
    Raster<double> depth(w, h, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (pair.left_valid.at(x, y) && dr.depth.depth.valid_at(x, y)) {
          known.at(x, y) = 1;
          depth.at(x, y) = dr.depth.depth.at(x, y);
        }
    if (cfg.min_region > 1) {
      const Mask specks = geometry::small_regions(DepthMap(depth, known), cfg.min_region);
      for (std::size_t i = 0; i < known.size(); ++i)
        if (specks[i]) {
          known[i] = 0;
          depth[i] = 0.0;
        }
    }
    const DepthMap ref_depth(std::move(depth), known);
    const inpaint::DiffusionInpainter inpainter(cfg.guided);
    const NormalizedInverseDepth nid = normalize_inverse_depth(ref_depth);
    GDImage ref = inpainter.inpaint(inpaint::make_request(pair.left, nid, Mask(w, h, 0), known)).gd();
    // Filled depth, but the photograph wherever one exists.
    {
      ImageGray intensity = ref.intensity();
      for (std::size_t i = 0; i < intensity.size(); ++i)
        if (pair.left_valid[i]) intensity[i] = pair.left[i];
      ref = GDImage(std::move(intensity), ref.depth());
    }

    const auto rig = geometry::compute_rig(ref_depth, dr.disparity.d_max, pair.baseline, cam);
    const auto corners = inpaint::corner_gds(ref, rig, inpainter);

    Provenance prov{record.filename().string(), PARALLAX_VERSION, cfg.to_json()};
    SceneBundle b = make_bundle(rig, {ref, corners[0].gd, corners[1].gd, corners[2].gd, corners[3].gd}, std::move(prov));
    b.known = {known, corners[0].known, corners[1].known, corners[2].known, corners[3].known};
    fs::remove_all(record / "bundle");
    bundle::save(b, record / "bundle");

    std::size_t holes = 0, boundary = 0;
    bool sealed = false;
    for (const auto& c : corners) {
      holes += c.hole_pixels;
      boundary += c.boundary_pixels;
      sealed = sealed || c.foreground_sealed;
    }
    e.reason = std::to_string(holes) + " hole pixels, " + std::to_string(boundary) + " boundary pixels" +
               (sealed ? ", foreground sealed" : "");
  });
}

std::vector<fs::path> record_dirs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  if (fs::is_directory(dir / "raw")) return {dir};
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::is_directory(entry.path() / "raw")) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<LogEntry> run_stages(const std::vector<fs::path>& records, const std::vector<Stage>& stages,
                                 const PipelineConfig& cfg) {
  std::vector<std::vector<LogEntry>> per(records.size());
  ThreadPool pool(cfg.workers);
  pool.parallel_for(records.size(), [&](std::size_t i) {
    for (Stage s : stages) {
      per[i].push_back(s(records[i], cfg));
      if (per[i].back().status != "ok") break;
    }
  });
  std::vector<LogEntry> out;
  for (auto& p : per) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace parallax::cli
