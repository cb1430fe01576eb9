#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "parallax/disparity.hpp"
#include "parallax/ingest.hpp"
#include "parallax/rectify.hpp"

namespace parallax::cli {

/// Bad command line or config input (exit status 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every tunable of the pipeline. Defaults are the stage defaults.
struct PipelineConfig {
  ingest::MatchConfig match;
  ingest::FetchConfig fetch;
  rectify::RansacConfig ransac;
  int max_size = 512;
  disparity::DisparityConfig disparity;
  std::size_t min_region = 16;  // smaller depth specks are dropped and filled
  bool guided = true;
  unsigned workers = 1;         // records processed concurrently
  unsigned render_workers = 1;  // tile workers for render / bench
  std::size_t limit = 0;

  /// Applies one key=value pair. Throws UsageError on unknown keys or
  /// values that do not parse or are out of range.
  void set(const std::string& key, const std::string& value);
  /// Reads `key = value` lines; '#' starts a comment.
  void load_file(const std::string& path);
  /// Applies PARALLAX_HTTP_TIMEOUT when set.
  void apply_environment();

  /// Effective parameters, including the fixed constants, for provenance.
  nlohmann::json to_json() const;
};

}  // namespace parallax::cli
