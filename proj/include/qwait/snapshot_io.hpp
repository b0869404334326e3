#pragma once

#include <filesystem>
#include <iosfwd>

#include "qwait/snapshot.hpp"

namespace qwait {

// Snapshot CSV: header `state,nodes_req,req_wtime,since` where state is
// "queued" (since = queued_since) or "running" (since = started_at); all
// values integer seconds except req_wtime, which may be fractional.
// The snapshot instant is supplied by the caller. Members must not start
// after `at`. runtime_for_features is set to req_wtime. Throws ParseError.
QueueSnapshot parse_snapshot_csv(std::istream& in, Instant at);
QueueSnapshot load_snapshot_csv(const std::filesystem::path& path, Instant at);

void write_snapshot_csv(std::ostream& out, const QueueSnapshot& snap);
void write_snapshot_csv(const std::filesystem::path& path, const QueueSnapshot& snap);

}  // namespace qwait
