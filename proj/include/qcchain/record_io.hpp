#pragma once

#include <qcchain/dag.hpp>
#include <qcchain/ledger.hpp>

#include <iosfwd>
#include <string>
#include <string_view>

namespace qcchain {

// Line-delimited text records. Reals are written in shortest round-trip form
// so every value round-trips bit-exactly.
//
// DAG file:
//   qcchain-dag 1
//   A <id> <score> <out_degree> <created_at>       one line per artifact, ascending id
//   E <source> <target> <weight> <link_id>         one line per link, link_id order
//
// Ledger file:
//   qcchain-ledger 1
//   B <height> <digest> <prev_hash> <payload_hash> <timestamp> <leader> <n> <txn>...
// where each <txn> is one of
//   E:<txn_id>:<timestamp>:<artifact>:<target>,<target>,...
//   S:<txn_id>:<timestamp>:<artifact>:<score>
//   R:<txn_id>:<timestamp>:<node>:<delta>

std::string encode_dag(const ArtifactDag& dag);
ArtifactDag decode_dag(std::string_view text);

std::string encode_ledger(const Ledger& ledger);

/// Strict parser: the input must be exactly what encode_ledger would write
/// for the parsed value, and every stored block digest must match. Hash
/// links are *not* checked here; call verify_chain on the result.
Ledger decode_ledger(std::string_view text);

std::string read_file(const std::string& path);
void        write_file(const std::string& path, std::string_view content);

/// Parse helpers shared with the other text formats.
namespace text {
std::uint64_t parse_u64(std::string_view s);
double        parse_real(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
} // namespace text

} // namespace qcchain
