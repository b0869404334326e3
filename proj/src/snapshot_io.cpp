#include "qwait/snapshot_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "qwait/error.hpp"
#include "text.hpp"

namespace qwait {

QueueSnapshot parse_snapshot_csv(std::istream& in, Instant at) {
  QueueSnapshot snap;
  snap.at = at;
  std::string line;
  if (!std::getline(in, line)) return snap;
  const auto header = detail::split_fields(line, ',');
  if (header.size() != 4 || header[0] != "state" || header[1] != "nodes_req" || header[2] != "req_wtime" ||
      header[3] != "since") {
    throw ParseError("unknown snapshot header; expected columns state,nodes_req,req_wtime,since", 1);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_fields(line, ',');
    const auto where = " at line " + std::to_string(line_no);
    if (f.size() != 4) throw ParseError("expected 4 fields" + where, line_no);
    const auto nodes = detail::parse_int_field(f[1], line_no, "nodes_req");
    const double wtime = detail::parse_double_field(f[2], line_no, "req_wtime");
    const Instant since = detail::parse_int_field(f[3], line_no, "since");
    if (nodes < 1 || nodes > 1'000'000'000) throw ParseError("nodes_req must be positive" + where, line_no, "nodes_req");
    if (!(wtime > 0)) throw ParseError("req_wtime must be positive" + where, line_no, "req_wtime");
    if (since > at) throw ParseError("since is after the snapshot instant" + where, line_no, "since");
    if (f[0] == "queued") {
      snap.queued.push_back({static_cast<int>(nodes), wtime, since, wtime});
    } else if (f[0] == "running") {
      snap.running.push_back({static_cast<int>(nodes), wtime, since, wtime});
    } else {
      throw ParseError("state must be queued or running" + where, line_no, "state");
    }
  }
  return snap;
}

QueueSnapshot load_snapshot_csv(const std::filesystem::path& path, Instant at) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open snapshot file " + path.string());
  return parse_snapshot_csv(in, at);
}

void write_snapshot_csv(std::ostream& out, const QueueSnapshot& snap) {
  char buf[40];
  out << "state,nodes_req,req_wtime,since\n";
  for (const auto& q : snap.queued) {
    std::snprintf(buf, sizeof buf, "%.17g", q.req_wtime);
    out << "queued," << q.nodes_req << ',' << buf << ',' << q.queued_since << "\n";
  }
  for (const auto& r : snap.running) {
    std::snprintf(buf, sizeof buf, "%.17g", r.req_wtime);
    out << "running," << r.nodes_req << ',' << buf << ',' << r.started_at << "\n";
  }
}

void write_snapshot_csv(const std::filesystem::path& path, const QueueSnapshot& snap) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write snapshot file " + path.string());
  write_snapshot_csv(out, snap);
}

}  // namespace qwait
