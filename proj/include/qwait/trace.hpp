#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qwait/time.hpp"

namespace qwait {

// One completed job from an accounting log.
struct JobRecord {
  std::string job_id;
  Instant submit = 0;
  Instant start = 0;
  Instant end = 0;
  int nodes_req = 1;
  Seconds req_wtime = 1;
  std::string partition;

  Seconds wait() const { return start - submit; }
  Seconds actual() const { return end - start; }
};

// A single machine/partition history, sorted by submit time.
struct Trace {
  std::string machine_name;
  std::vector<JobRecord> records;
  int node_capacity = 1;
  // Rows discarded during parsing because the job never started or ended.
  std::size_t dropped_rows = 0;
};

// Sorts records by (submit, job_id), checks every record invariant and that
// job ids are unique. When node_capacity is absent it is set to the peak
// concurrent node usage. Throws Error on violation.
Trace make_trace(std::string machine_name, std::vector<JobRecord> records,
                 std::optional<int> node_capacity = std::nullopt);

// Reads either the canonical CSV (job_id,submit,start,end,nodes,req_wtime_s,partition)
// or an sacct export (JobID,Submit,Start,End,NNodes,Timelimit,Partition; ',' or
// '|' separated). The format is recognised from the header. When `partition`
// is set only rows of that partition are kept. Throws ParseError.
Trace parse_trace(std::istream& in, std::string machine_name,
                  const std::optional<std::string>& partition = std::nullopt);
Trace parse_trace(const std::filesystem::path& path,
                  const std::optional<std::string>& partition = std::nullopt);

// Canonical CSV with header.
void write_trace(std::ostream& out, const Trace& trace);
void write_trace(const std::filesystem::path& path, const Trace& trace);

struct SplitTrace {
  std::vector<JobRecord> train;
  std::vector<JobRecord> test;
  // Test calendar days as days since the epoch (UTC), ascending.
  std::vector<std::int64_t> test_days;
};

// Every fifth distinct submit date (0-based positions 4, 9, 14, ...) is a test day.
SplitTrace split_every_fifth_day(const Trace& trace);

}  // namespace qwait
