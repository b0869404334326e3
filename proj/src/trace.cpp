#include "qwait/trace.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string_view>
#include <unordered_set>

#include "qwait/error.hpp"
#include "text.hpp"

namespace qwait {
namespace {

using detail::parse_int_field;
using detail::split_fields;
using detail::trim;

constexpr std::array<std::string_view, 7> kCanonicalColumns = {
    "job_id", "submit", "start", "end", "nodes", "req_wtime_s", "partition"};
constexpr std::array<std::string_view, 7> kSacctColumns = {
    "JobID", "Submit", "Start", "End", "NNodes", "Timelimit", "Partition"};

enum class Format { canonical, sacct };

std::string expected_columns() {
  std::string s;
  for (auto c : kCanonicalColumns) s += (s.empty() ? "" : ",") + std::string(c);
  s += " (or sacct: ";
  bool first = true;
  for (auto c : kSacctColumns) {
    s += (first ? "" : ",") + std::string(c);
    first = false;
  }
  return s + ")";
}

bool missing_time(std::string_view f) {
  return f.empty() || f == "Unknown" || f == "None" || f == "N/A";
}

}  // namespace

Trace make_trace(std::string machine_name, std::vector<JobRecord> records,
                 std::optional<int> node_capacity) {
  std::stable_sort(records.begin(), records.end(), [](const JobRecord& a, const JobRecord& b) {
    return a.submit != b.submit ? a.submit < b.submit : a.job_id < b.job_id;
  });
  std::unordered_set<std::string> ids;
  ids.reserve(records.size());
  int max_nodes = 0;
  for (const auto& r : records) {
    if (!(r.submit <= r.start && r.start <= r.end)) {
      throw Error("job " + r.job_id + " violates submit <= start <= end");
    }
    if (r.nodes_req < 1 || r.req_wtime <= 0) {
      throw Error("job " + r.job_id + " has non-positive nodes or requested wall time");
    }
    if (!ids.insert(r.job_id).second) throw Error("duplicate job_id " + r.job_id);
    max_nodes = std::max(max_nodes, r.nodes_req);
  }

  Trace trace;
  trace.machine_name = std::move(machine_name);
  if (node_capacity) {
    if (*node_capacity < 1) throw Error("node capacity must be positive");
    trace.node_capacity = *node_capacity;
  } else {
    // Peak concurrent usage; ends sort before starts at equal instants.
    std::vector<std::pair<Instant, int>> deltas;
    deltas.reserve(records.size() * 2);
    for (const auto& r : records) {
      if (r.end == r.start) continue;
      deltas.emplace_back(r.start, r.nodes_req);
      deltas.emplace_back(r.end, -r.nodes_req);
    }
    std::sort(deltas.begin(), deltas.end());
    long long in_use = 0, peak = 0;
    for (const auto& [t, d] : deltas) {
      in_use += d;
      peak = std::max(peak, in_use);
    }
    trace.node_capacity = static_cast<int>(std::max<long long>({peak, max_nodes, 1}));
  }
  trace.records = std::move(records);
  return trace;
}

Trace parse_trace(std::istream& in, std::string machine_name,
                  const std::optional<std::string>& partition) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty trace file; expected header " + expected_columns(), 1);
  ++line_no;

  const char sep = line.find('|') != std::string::npos ? '|' : ',';
  const auto header = split_fields(trim(line), sep);
  Format format;
  auto matches = [&](const auto& cols) {
    return header.size() == cols.size() && std::equal(header.begin(), header.end(), cols.begin());
  };
  if (matches(kCanonicalColumns)) {
    format = Format::canonical;
  } else if (matches(kSacctColumns)) {
    format = Format::sacct;
  } else {
    throw ParseError("unknown header '" + std::string(trim(line)) + "'; expected " + expected_columns(), 1);
  }
  const auto& names = format == Format::canonical ? kCanonicalColumns : kSacctColumns;

  std::vector<JobRecord> records;
  std::unordered_set<std::string> seen;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto f = split_fields(row, sep);
    if (f.size() != names.size()) {
      throw ParseError("expected " + std::to_string(names.size()) + " fields, got " +
                           std::to_string(f.size()) + " at line " + std::to_string(line_no),
                       line_no);
    }
    if (partition && f[6] != *partition) continue;

    JobRecord r;
    r.job_id = std::string(f[0]);
    r.partition = std::string(f[6]);
    if (format == Format::sacct && r.job_id.find('.') != std::string::npos) continue;  // job step
    if (r.job_id.empty()) throw ParseError("empty job_id at line " + std::to_string(line_no), line_no, std::string(names[0]));
    if (missing_time(f[2]) || missing_time(f[3])) {
      ++dropped;
      continue;
    }

    auto time_field = [&](int i) -> Instant {
      if (format == Format::canonical) return parse_int_field(f[i], line_no, names[i]);
      try {
        return parse_iso8601(f[i]);
      } catch (const Error&) {
        throw ParseError("malformed timestamp '" + std::string(f[i]) + "' in column " +
                             std::string(names[i]) + " at line " + std::to_string(line_no),
                         line_no, std::string(names[i]));
      }
    };
    r.submit = time_field(1);
    r.start = time_field(2);
    r.end = time_field(3);
    const auto nodes = parse_int_field(f[4], line_no, names[4]);
    if (format == Format::canonical) {
      r.req_wtime = parse_int_field(f[5], line_no, names[5]);
    } else {
      if (f[5] == "UNLIMITED" || f[5] == "Partition_Limit" || f[5].empty()) {
        ++dropped;
        continue;
      }
      try {
        r.req_wtime = parse_slurm_duration(f[5]);
      } catch (const Error&) {
        throw ParseError("malformed time limit '" + std::string(f[5]) + "' in column Timelimit at line " +
                             std::to_string(line_no),
                         line_no, "Timelimit");
      }
    }

    if (nodes < 1 || nodes > 100000000) {
      throw ParseError("nodes must be a positive integer at line " + std::to_string(line_no), line_no, std::string(names[4]));
    }
    r.nodes_req = static_cast<int>(nodes);
    if (r.req_wtime <= 0) {
      throw ParseError("requested wall time must be positive at line " + std::to_string(line_no), line_no, std::string(names[5]));
    }
    if (r.start < r.submit) {
      throw ParseError("start precedes submit at line " + std::to_string(line_no), line_no, std::string(names[2]));
    }
    if (r.end < r.start) {
      throw ParseError("end precedes start at line " + std::to_string(line_no), line_no, std::string(names[3]));
    }
    if (!seen.insert(r.job_id).second) {
      throw ParseError("duplicate job_id '" + r.job_id + "' at line " + std::to_string(line_no), line_no, std::string(names[0]));
    }
    records.push_back(std::move(r));
  }

  Trace trace = make_trace(std::move(machine_name), std::move(records));
  trace.dropped_rows = dropped;
  return trace;
}

Trace parse_trace(const std::filesystem::path& path, const std::optional<std::string>& partition) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file " + path.string());
  return parse_trace(in, path.stem().string(), partition);
}

void write_trace(std::ostream& out, const Trace& trace) {
  out << "job_id,submit,start,end,nodes,req_wtime_s,partition\n";
  for (const auto& r : trace.records) {
    out << r.job_id << ',' << r.submit << ',' << r.start << ',' << r.end << ',' << r.nodes_req
        << ',' << r.req_wtime << ',' << r.partition << '\n';
  }
}

void write_trace(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file " + path.string());
  write_trace(out, trace);
}

SplitTrace split_every_fifth_day(const Trace& trace) {
  if (trace.records.empty()) throw Error("cannot split an empty trace");
  // Records are sorted by submit, so distinct days appear in order.
  std::vector<std::int64_t> days;
  for (const auto& r : trace.records) {
    const auto d = civil_day(r.submit);
    if (days.empty() || days.back() != d) days.push_back(d);
  }
  if (days.size() < 5) throw Error("insufficient span for fifth-day split");

  SplitTrace split;
  for (std::size_t i = 4; i < days.size(); i += 5) split.test_days.push_back(days[i]);
  for (const auto& r : trace.records) {
    const bool is_test =
        std::binary_search(split.test_days.begin(), split.test_days.end(), civil_day(r.submit));
    (is_test ? split.test : split.train).push_back(r);
  }
  return split;
}

}  // namespace qwait
