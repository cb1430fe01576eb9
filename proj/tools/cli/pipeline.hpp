#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace parallax::cli {

/// One line of the machine-readable log.
struct LogEntry {
  std::string record;
  std::string stage;
  std::string status;  // ok | keep | review | cull | skipped | error
  std::string reason;

  nlohmann::json to_json() const;
};

/// Collects entries and writes them as JSON lines, in the order added.
class Log {
 public:
  void add(LogEntry e) { entries_.push_back(std::move(e)); }
  void append(const std::vector<LogEntry>& more) { entries_.insert(entries_.end(), more.begin(), more.end()); }
  const std::vector<LogEntry>& entries() const { return entries_; }
  void write(std::ostream& out) const;
  void write_file(const std::filesystem::path& file) const;

 private:
  std::vector<LogEntry> entries_;
};

// Record directory layout:
//   <record>/raw/{left.png,right.png,meta.json}
//   <record>/match.json
//   <record>/rectified/...
//   <record>/disparity/...
//   <record>/bundle/...

/// Fetches records from `locator`, writes their raw files and match reports
/// under `out/<id>/`. Throws Error when the index is unreachable.
std::vector<std::string> ingest_stage(const std::string& locator, const std::filesystem::path& out,
                                      const PipelineConfig& cfg, Log& log);

/// Each stage reads its inputs from the record directory and writes its
/// outputs there. Failures become log entries; a culled record is skipped.
LogEntry rectify_stage(const std::filesystem::path& record, const PipelineConfig& cfg);
LogEntry disparity_stage(const std::filesystem::path& record, const PipelineConfig& cfg);
LogEntry build_stage(const std::filesystem::path& record, const PipelineConfig& cfg);

/// Record directories under `dir` (or `dir` itself when it is a record),
/// sorted by name.
std::vector<std::filesystem::path> record_dirs(const std::filesystem::path& dir);

/// Runs `stages` (in order, stopping a record at its first non-ok result)
/// over the records, `cfg.workers` records at a time. Entries come back in
/// record order.
using Stage = LogEntry (*)(const std::filesystem::path&, const PipelineConfig&);
std::vector<LogEntry> run_stages(const std::vector<std::filesystem::path>& records, const std::vector<Stage>& stages,
                                 const PipelineConfig& cfg);

}  // namespace parallax::cli
