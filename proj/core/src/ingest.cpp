#include "parallax/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <thread>

#include <opencv2/core.hpp>
#include <opencv2/features2d.hpp>

#include <httplib.h>
#include <json.hpp>

#include "parallax/io.hpp"
#include "parallax/json_util.hpp"

namespace parallax::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::keep: return "keep";
    case Verdict::review: return "review";
    case Verdict::cull: return "cull";
  }
  return "cull";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "keep") return Verdict::keep;
  if (s == "review") return Verdict::review;
  if (s == "cull") return Verdict::cull;
  throw Error("unknown verdict '" + s + "'");
}

Verdict classify(std::size_t n_good, std::size_t n_keypoints, const MatchConfig& cfg) {
  const double good = static_cast<double>(n_good);
  const double kp = static_cast<double>(n_keypoints);
  if (n_good < cfg.min_good || good < cfg.cull_fraction * kp) return Verdict::cull;
  if (good < cfg.review_fraction * kp) return Verdict::review;
  return Verdict::keep;
}

namespace {

cv::Mat to_mat8(const ImageGray& image) {
  cv::Mat mat(image.height(), image.width(), CV_8UC1);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) mat.at<std::uint8_t>(y, x) = io::quantize8(image.at(x, y));
  return mat;
}

struct Features {
  std::vector<cv::KeyPoint> keypoints;
  cv::Mat descriptors;
};

Features detect(const ImageGray& image, const MatchConfig& cfg) {
  Features f;
  if (image.empty()) return f;
  auto sift = cv::SIFT::create(std::max(cfg.max_features, 0));
  sift->detectAndCompute(to_mat8(image), cv::noArray(), f.keypoints, f.descriptors);
  return f;
}

// Best match per query row that passes the ratio test, -1 otherwise.
std::vector<int> ratio_matches(const cv::Mat& query, const cv::Mat& train, double ratio) {
  std::vector<int> best(static_cast<std::size_t>(query.rows), -1);
  if (query.empty() || train.rows < 2) return best;
  cv::BFMatcher matcher(cv::NORM_L2);
  std::vector<std::vector<cv::DMatch>> knn;
  matcher.knnMatch(query, train, knn, 2);
  for (const auto& m : knn) {
    if (m.size() < 2) continue;
    if (m[0].distance < ratio * m[1].distance) best[static_cast<std::size_t>(m[0].queryIdx)] = m[0].trainIdx;
  }
  return best;
}

}  // namespace

MatchReport match_images(const ImageGray& left, const ImageGray& right, const MatchConfig& cfg) {
  if (left.empty() || right.empty()) throw std::invalid_argument("match_images: empty image");
  cv::setNumThreads(1);
  const Features fl = detect(left, cfg);
  const Features fr = detect(right, cfg);

  MatchReport report;
  report.n_keypoints_left = fl.keypoints.size();
  report.n_keypoints_right = fr.keypoints.size();
  report.n_keypoints = std::min(report.n_keypoints_left, report.n_keypoints_right);
  report.n_attempted = report.n_keypoints;
  if (report.n_keypoints == 0) {
    report.verdict = Verdict::cull;
    report.reason = "featureless";
    return report;
  }

  // Mutual check keeps the count independent of which side is "left".
  const std::vector<int> forward = ratio_matches(fl.descriptors, fr.descriptors, cfg.ratio);
  const std::vector<int> backward = ratio_matches(fr.descriptors, fl.descriptors, cfg.ratio);
  for (std::size_t i = 0; i < forward.size(); ++i) {
    const int j = forward[i];
    if (j < 0 || backward[static_cast<std::size_t>(j)] != static_cast<int>(i)) continue;
    const auto& pl = fl.keypoints[i].pt;
    const auto& pr = fr.keypoints[static_cast<std::size_t>(j)].pt;
    report.matches.push_back({{pl.x, pl.y}, {pr.x, pr.y}});
  }
  report.n_good = report.matches.size();
  report.verdict = classify(report.n_good, report.n_keypoints, cfg);
  if (report.verdict == Verdict::cull) report.reason = "too few good matches";
  return report;
}

MatchReport match_and_cull(const RawRecord& rec, const MatchConfig& cfg) {
  return match_images(rec.left, rec.right, cfg);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ImageGray cut(const ImageGray& image, const PixelRect& r) {
  ImageGray out(r.w, r.h);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x) out.at(x, y) = image.at(r.x + x, r.y + y);
  return out;
}

// Full-frame centre in region coordinates, or the region centre when the
// frame centre was cropped away.
Eigen::Vector2d principal_in(const ImageGray& full, const PixelRect& region) {
  const Eigen::Vector2d centre(0.5 * (full.width() - 1), 0.5 * (full.height() - 1));
  if (region.contains(centre.x(), centre.y()))
    return centre - Eigen::Vector2d(region.x, region.y);
  return {0.5 * (region.w - 1), 0.5 * (region.h - 1)};
}

}  // namespace

AlignedPair align_crops(const RawRecord& rec, const MatchReport& report) {
  const PixelRect cl = rec.crop_left.value_or(PixelRect{0, 0, rec.left.width(), rec.left.height()});
  const PixelRect cr = rec.crop_right.value_or(PixelRect{0, 0, rec.right.width(), rec.right.height()});
  if (!cl.inside(rec.left.width(), rec.left.height()) || !cr.inside(rec.right.width(), rec.right.height()))
    throw Error("crop outside image");

  std::vector<double> dx, dy;
  for (const auto& m : report.matches) {
    if (!cl.contains(m.left.x(), m.left.y()) || !cr.contains(m.right.x(), m.right.y())) continue;
    dx.push_back((m.right.x() - cr.x) - (m.left.x() - cl.x));
    dy.push_back((m.right.y() - cr.y) - (m.left.y() - cl.y));
  }
  if (dx.size() < 4) throw Error("insufficient alignment evidence");

  // Content at left-crop pixel p appears at right-crop pixel p + t.
  const int tx = static_cast<int>(std::lround(median(dx)));
  const int ty = static_cast<int>(std::lround(median(dy)));

  const int x0 = std::max(0, -tx);
  const int y0 = std::max(0, -ty);
  const int x1 = std::min(cl.w, cr.w - tx);
  const int y1 = std::min(cl.h, cr.h - ty);
  if (x1 <= x0 || y1 <= y0) throw Error("disjoint crops");

  AlignedPair out;
  out.left_region = {cl.x + x0, cl.y + y0, x1 - x0, y1 - y0};
  out.right_region = {cr.x + x0 + tx, cr.y + y0 + ty, x1 - x0, y1 - y0};
  out.translation = {tx, ty};
  out.evidence = dx.size();
  out.left = cut(rec.left, out.left_region);
  out.right = cut(rec.right, out.right_region);
  out.principal_left = principal_in(rec.left, out.left_region);
  out.principal_right = principal_in(rec.right, out.right_region);
  return out;
}

AlignedPair align_crops(const RawRecord& rec, const MatchConfig& cfg) {
  return align_crops(rec, match_and_cull(rec, cfg));
}

// ---------------------------------------------------------------------------
// Record files

namespace {

std::optional<PixelRect> parse_rect(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 4) throw Error("crop must be [x, y, w, h]");
  return PixelRect{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

void validate_record(const RawRecord& rec) {
  if (rec.left.empty() || rec.right.empty()) throw Error("empty image");
  if (rec.crop_left && !rec.crop_left->inside(rec.left.width(), rec.left.height()))
    throw Error("crop_left outside image");
  if (rec.crop_right && !rec.crop_right->inside(rec.right.width(), rec.right.height()))
    throw Error("crop_right outside image");
}

}  // namespace

void parse_metadata(const std::string& json_text, RawRecord& rec) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed meta.json: ") + e.what());
  }
  if (!j.is_object()) throw Error("malformed meta.json: not an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.value().is_string()) rec.metadata[it.key()] = it.value().get<std::string>();
  }
  try {
    if (j.contains("crop_left")) rec.crop_left = parse_rect(j["crop_left"]);
    if (j.contains("crop_right")) rec.crop_right = parse_rect(j["crop_right"]);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed crop: ") + e.what());
  }
}

std::string metadata_json(const RawRecord& rec) {
  json j = json::object();
  for (const auto& [k, v] : rec.metadata) j[k] = v;
  auto rect = [](const PixelRect& r) { return json::array({r.x, r.y, r.w, r.h}); };
  if (rec.crop_left) j["crop_left"] = rect(*rec.crop_left);
  if (rec.crop_right) j["crop_right"] = rect(*rec.crop_right);
  return canonical_json(j);
}

RawRecord load_record_dir(const fs::path& dir) {
  RawRecord rec;
  rec.id = dir.filename().string();
  rec.left = io::read_gray(dir / "left.png");
  rec.right = io::read_gray(dir / "right.png");
  const auto meta = io::read_file(dir / "meta.json");
  parse_metadata(std::string(meta.begin(), meta.end()), rec);
  validate_record(rec);
  return rec;
}

void save_record_dir(const fs::path& dir, const RawRecord& rec) {
  fs::create_directories(dir);
  io::write_gray(dir / "left.png", rec.left);
  io::write_gray(dir / "right.png", rec.right);
  io::write_text(dir / "meta.json", metadata_json(rec));
}

// ---------------------------------------------------------------------------
// Fetching

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/'
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("unreachable index");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::vector<std::uint8_t> http_get(const std::string& url, const FetchConfig& cfg) {
  const Url u = split_url(url);
  std::string last_error = "no attempt";
  for (int attempt = 0; attempt <= std::max(cfg.retries, 0); ++attempt) {
    httplib::Client client(u.origin);
    client.set_connection_timeout(cfg.timeout_seconds, 0);
    client.set_read_timeout(cfg.timeout_seconds, 0);
    client.set_follow_location(true);
    auto res = client.Get(u.path);
    if (res && res->status == 200) return {res->body.begin(), res->body.end()};
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
  }
  throw Error("GET " + url + " failed: " + last_error);
}

bool is_http(const std::string& locator) {
  return locator.rfind("http://", 0) == 0 || locator.rfind("https://", 0) == 0;
}

void warn(std::vector<std::string>* sink, const std::string& message) {
  if (sink) {
    sink->push_back(message);
  } else {
    std::cerr << "warning: " << message << "\n";
  }
}

// Runs `load(i)` for indices in order, at most `workers` at a time, and
// stops scheduling once `limit` successes have been collected.
template <typename Load>
std::vector<RawRecord> load_bounded(std::size_t count, std::size_t limit, int workers, Load&& load,
                                    std::vector<std::string>* warnings) {
  std::vector<RawRecord> out;
  const std::size_t batch = static_cast<std::size_t>(std::max(workers, 1));
  for (std::size_t start = 0; start < count; start += batch) {
    const std::size_t end = std::min(count, start + batch);
    std::vector<std::optional<RawRecord>> slot(end - start);
    std::vector<std::string> errors(end - start);
    {
      std::vector<std::jthread> threads;
      for (std::size_t i = start; i < end; ++i) {
        threads.emplace_back([&, i] {
          try {
            slot[i - start] = load(i);
          } catch (const std::exception& e) {
            errors[i - start] = e.what();
          }
        });
      }
    }
    for (std::size_t k = 0; k < slot.size(); ++k) {
      if (!slot[k]) {
        warn(warnings, "skipping record " + std::to_string(start + k) + ": " + errors[k]);
        continue;
      }
      out.push_back(std::move(*slot[k]));
      if (limit && out.size() == limit) return out;
    }
  }
  return out;
}

}  // namespace

std::vector<RawRecord> fetch_records(const std::string& locator, std::size_t limit, const FetchConfig& cfg,
                                     std::vector<std::string>* warnings) {
  if (!is_http(locator)) {
    const fs::path root(locator);
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw Error("unreachable index");
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    return load_bounded(
        dirs.size(), limit, cfg.max_concurrency,
        [&](std::size_t i) {
          try {
            return load_record_dir(dirs[i]);
          } catch (const std::exception& e) {
            throw Error(dirs[i].filename().string() + ": " + e.what());
          }
        },
        warnings);
  }

  std::vector<std::uint8_t> index_bytes;
  try {
    index_bytes = http_get(locator, cfg);
  } catch (const Error&) {
    throw Error("unreachable index");
  }
  json index;
  try {
    index = json::parse(index_bytes.begin(), index_bytes.end());
  } catch (const json::exception&) {
    throw Error("malformed index");
  }
  const json& list = index.is_object() ? index.value("records", json::array()) : index;
  if (!list.is_array()) throw Error("malformed index");
  std::vector<std::string> ids;
  for (const auto& e : list) {
    if (e.is_string()) ids.push_back(e.get<std::string>());
  }

  const std::string base = locator.substr(0, locator.find_last_of('/') + 1);
  return load_bounded(
      ids.size(), limit, cfg.max_concurrency,
      [&](std::size_t i) {
        const std::string prefix = base + ids[i] + "/";
        try {
          RawRecord rec;
          rec.id = ids[i];
          rec.left = io::decode_gray(http_get(prefix + "left.png", cfg));
          rec.right = io::decode_gray(http_get(prefix + "right.png", cfg));
          const auto meta = http_get(prefix + "meta.json", cfg);
          parse_metadata(std::string(meta.begin(), meta.end()), rec);
          validate_record(rec);
          return rec;
        } catch (const std::exception& e) {
          throw Error(ids[i] + ": " + e.what());
        }
      },
      warnings);
}

}  // namespace parallax::ingest
