#include "config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>

#include "parallax/geometry.hpp"
#include "parallax/inpaint.hpp"
#include "parallax/viewsynth.hpp"

namespace parallax::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw UsageError("invalid value for " + key + ": " + v);
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw UsageError("invalid value for " + key + ": " + v);
  return out;
}

double positive(const std::string& key, double v) {
  if (!(v > 0)) throw UsageError(key + " must be positive");
  return v;
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  const auto d = [&] { return positive(key, to_double(key, v)); };
  const auto i = [&] { return static_cast<long long>(positive(key, static_cast<double>(to_int(key, v)))); };
  const std::map<std::string, std::function<void()>> setters = {
      {"ratio", [&] { match.ratio = d(); }},
      {"min_good", [&] { match.min_good = static_cast<std::size_t>(i()); }},
      {"cull_fraction", [&] { match.cull_fraction = d(); }},
      {"review_fraction", [&] { match.review_fraction = d(); }},
      {"max_features", [&] { match.max_features = static_cast<int>(i()); }},
      {"http_timeout", [&] { fetch.timeout_seconds = static_cast<int>(i()); }},
      {"http_retries",
       [&] {
         const long long r = to_int(key, v);
         if (r < 0) throw UsageError("http_retries must not be negative");
         fetch.retries = static_cast<int>(r);
       }},
      {"ransac_threshold", [&] { ransac.threshold_px = d(); }},
      {"ransac_iterations", [&] { ransac.max_iterations = static_cast<int>(i()); }},
      {"seed",
       [&] {
         const long long s = to_int(key, v);
         if (s < 0) throw UsageError("seed must not be negative");
         ransac.seed = static_cast<std::uint64_t>(s);
       }},
      {"max_size", [&] { max_size = static_cast<int>(i()); }},
      {"max_disp", [&] { disparity.max_disp = static_cast<int>(i()); }},
      {"patch",
       [&] {
         disparity.patch = static_cast<int>(i());
         if (disparity.patch % 2 == 0) throw UsageError("patch must be odd");
       }},
      {"levels", [&] { disparity.levels = static_cast<int>(i()); }},
      {"vertical_slack", [&] { disparity.vertical_slack = static_cast<int>(i()); }},
      {"lr_tolerance", [&] { disparity.lr_tolerance = d(); }},
      {"max_fill", [&] { disparity.max_fill = static_cast<int>(i()); }},
      {"min_texture", [&] { disparity.min_texture = d(); }},
      {"min_score", [&] { disparity.min_score = d(); }},
      {"median_radius",
       [&] {
         const long long r = to_int(key, v);
         if (r < 0) throw UsageError("median_radius must not be negative");
         disparity.median_radius = static_cast<int>(r);
       }},
      {"smooth_radius",
       [&] {
         const long long r = to_int(key, v);
         if (r < 0) throw UsageError("smooth_radius must not be negative");
         disparity.smooth_radius = static_cast<int>(r);
       }},
      {"smooth_range", [&] { disparity.smooth_range = d(); }},
      {"min_region",
       [&] {
         const long long r = to_int(key, v);
         if (r < 0) throw UsageError("min_region must not be negative");
         min_region = static_cast<std::size_t>(r);
       }},
      {"guided",
       [&] {
         if (v == "true" || v == "1") guided = true;
         else if (v == "false" || v == "0") guided = false;
         else throw UsageError("guided must be true or false");
       }},
      {"workers", [&] { workers = static_cast<unsigned>(i()); }},
      {"render_workers", [&] { render_workers = static_cast<unsigned>(i()); }},
      {"limit",
       [&] {
         const long long l = to_int(key, v);
         if (l < 0) throw UsageError("limit must not be negative");
         limit = static_cast<std::size_t>(l);
       }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw UsageError("unknown config key: " + key);
  it->second();
}

void PipelineConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file: " + path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key = value");
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    set(trim(line.substr(0, eq)), value);
  }
}

void PipelineConfig::apply_environment() {
  if (const char* t = std::getenv("PARALLAX_HTTP_TIMEOUT"); t && *t) set("http_timeout", t);
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"ratio", match.ratio},
          {"min_good", match.min_good},
          {"cull_fraction", match.cull_fraction},
          {"review_fraction", match.review_fraction},
          {"max_features", match.max_features},
          {"ransac_threshold", ransac.threshold_px},
          {"ransac_iterations", ransac.max_iterations},
          {"seed", ransac.seed},
          {"max_size", max_size},
          {"fov_deg", 45.0},
          {"max_disp", disparity.max_disp},
          {"patch", disparity.patch},
          {"levels", disparity.levels},
          {"vertical_slack", disparity.vertical_slack},
          {"lr_tolerance", disparity.lr_tolerance},
          {"max_fill", disparity.max_fill},
          {"min_texture", disparity.min_texture},
          {"min_score", disparity.min_score},
          {"median_radius", disparity.median_radius},
          {"smooth_radius", disparity.smooth_radius},
          {"smooth_range", disparity.smooth_range},
          {"min_region", min_region},
          {"triangle_threshold", geometry::kTriangleThreshold},
          {"lambda_hole", inpaint::kLambdaHole},
          {"lambda_tv", inpaint::kLambdaTv},
          {"blend_tolerance", viewsynth::kBlendTolerance},
          {"guided", guided}};
}

}  // namespace parallax::cli
