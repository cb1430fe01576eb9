#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "parallax/types.hpp"

namespace parallax::ingest {

struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool contains(double px, double py) const { return px >= x && py >= y && px < x + w && py < y + h; }
  bool inside(int width, int height) const {
    return x >= 0 && y >= 0 && w > 0 && h > 0 && x + w <= width && y + h <= height;
  }
  bool operator==(const PixelRect&) const = default;
};

/// One scanned stereo card: both halves plus its catalog metadata.
struct RawRecord {
  std::string id;
  ImageGray left;
  ImageGray right;
  std::map<std::string, std::string> metadata;
  std::optional<PixelRect> crop_left;
  std::optional<PixelRect> crop_right;
};

enum class Verdict { keep, review, cull };

const char* to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

struct PointMatch {
  Eigen::Vector2d left;
  Eigen::Vector2d right;
};

struct MatchConfig {
  double ratio = 0.7;
  std::size_t min_good = 10;
  double cull_fraction = 0.005;
  double review_fraction = 0.015;
  int max_features = 4000;
};

struct MatchReport {
  std::size_t n_keypoints_left = 0;
  std::size_t n_keypoints_right = 0;
  std::size_t n_keypoints = 0;  // min of both sides
  std::size_t n_attempted = 0;
  std::size_t n_good = 0;
  std::vector<PointMatch> matches;  // every entry passed the ratio test
  Verdict verdict = Verdict::cull;
  std::string reason;
};

/// Pure threshold logic: cull below max(min_good, cull_fraction * n_keypoints),
/// review below review_fraction * n_keypoints, keep otherwise.
Verdict classify(std::size_t n_good, std::size_t n_keypoints, const MatchConfig& cfg);

/// Detects scale-invariant keypoints on both images and keeps mutual
/// nearest-neighbour matches that pass the ratio test in both directions.
MatchReport match_images(const ImageGray& left, const ImageGray& right, const MatchConfig& cfg = {});

MatchReport match_and_cull(const RawRecord& rec, const MatchConfig& cfg = {});

struct AlignedPair {
  ImageGray left;
  ImageGray right;
  PixelRect left_region;   // in source left image coordinates
  PixelRect right_region;  // in source right image coordinates
  Eigen::Vector2i translation = Eigen::Vector2i::Zero();  // right crop offset relative to left crop
  std::size_t evidence = 0;                               // matches used for the median
  Eigen::Vector2d principal_left = Eigen::Vector2d::Zero();
  Eigen::Vector2d principal_right = Eigen::Vector2d::Zero();
};

/// Aligns the two crop boxes by the median displacement of the good matches
/// falling inside them and cuts both down to their common region.
AlignedPair align_crops(const RawRecord& rec, const MatchReport& report);
AlignedPair align_crops(const RawRecord& rec, const MatchConfig& cfg = {});

struct FetchConfig {
  int timeout_seconds = 10;
  int retries = 2;
  int max_concurrency = 4;
};

/// Reads `<id>/left.png`, `<id>/right.png`, `<id>/meta.json`. Throws on any
/// malformed piece.
RawRecord load_record_dir(const std::filesystem::path& dir);
void save_record_dir(const std::filesystem::path& dir, const RawRecord& rec);

/// Parses meta.json content into `rec` (metadata strings and crops).
void parse_metadata(const std::string& json_text, RawRecord& rec);
std::string metadata_json(const RawRecord& rec);

/// Loads records from a fixture directory or an HTTP(S) index. Malformed
/// records are skipped with a warning (appended to `warnings` when given,
/// echoed to stderr otherwise); an unreachable index throws
/// Error("unreachable index"). limit == 0 means no limit.
///
/// An HTTP index is a JSON document, either a bare array of record ids or
/// {"records": [...]}; record files live next to it at `<base>/<id>/...`.
std::vector<RawRecord> fetch_records(const std::string& locator, std::size_t limit,
                                     const FetchConfig& cfg = {},
                                     std::vector<std::string>* warnings = nullptr);

}  // namespace parallax::ingest
