#include <qcchain/error.hpp>
#include <qcchain/record_io.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace qcchain {

namespace text {

std::uint64_t parse_u64(std::string_view s) {
   std::uint64_t v = 0;
   auto [ptr, ec]  = std::from_chars(s.data(), s.data() + s.size(), v);
   if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw Error(ErrorCode::parse_error, "bad integer '" + std::string(s) + "'");
   return v;
}

double parse_real(std::string_view s) {
   double v       = 0;
   auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
   if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw Error(ErrorCode::parse_error, "bad real '" + std::string(s) + "'");
   return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
   std::vector<std::string_view> out;
   std::size_t                   start = 0;
   while (true) {
      auto pos = s.find(sep, start);
      if (pos == std::string_view::npos) {
         out.push_back(s.substr(start));
         return out;
      }
      out.push_back(s.substr(start, pos - start));
      start = pos + 1;
   }
}

} // namespace text

namespace {

using text::parse_real;
using text::parse_u64;
using text::split;

std::vector<std::string_view> lines_of(std::string_view body) {
   if (body.empty() || body.back() != '\n')
      throw Error(ErrorCode::parse_error, "record file must end with a newline");
   body.remove_suffix(1);
   return split(body, '\n');
}

void encode_txn(std::ostringstream& os, const Transaction& t) {
   std::visit(
      [&](const auto& p) {
         using T = std::decay_t<decltype(p)>;
         if constexpr (std::is_same_v<T, EndorsementPayload>) {
            os << "E:" << t.id.value << ':' << format_real(t.timestamp) << ':' << p.artifact.value << ':';
            for (std::size_t i = 0; i < p.endorsed.size(); ++i)
               os << (i ? "," : "") << p.endorsed[i].value;
         } else if constexpr (std::is_same_v<T, ScoreUpdatePayload>) {
            os << "S:" << t.id.value << ':' << format_real(t.timestamp) << ':' << p.artifact.value << ':'
               << format_real(p.score);
         } else {
            os << "R:" << t.id.value << ':' << format_real(t.timestamp) << ':' << p.node.value << ':'
               << format_real(p.delta);
         }
      },
      t.payload);
}

Transaction decode_txn(std::string_view s) {
   auto f = split(s, ':');
   if (f.size() != 5 || f[0].size() != 1)
      throw Error(ErrorCode::parse_error, "bad transaction record '" + std::string(s) + "'");
   TxnId   id{parse_u64(f[1])};
   SimTime ts = parse_real(f[2]);
   switch (f[0][0]) {
      case 'E': {
         std::vector<ArtifactId> targets;
         if (!f[4].empty())
            for (auto part : split(f[4], ','))
               targets.push_back(ArtifactId{parse_u64(part)});
         return make_endorsement(id, ts, ArtifactId{parse_u64(f[3])}, std::move(targets));
      }
      case 'S': return Transaction{id, ts, ScoreUpdatePayload{ArtifactId{parse_u64(f[3])}, parse_real(f[4])}};
      case 'R': return Transaction{id, ts, ReputationUpdatePayload{NodeId{parse_u64(f[3])}, parse_real(f[4])}};
      default: throw Error(ErrorCode::parse_error, "unknown transaction kind '" + std::string(f[0]) + "'");
   }
}

std::string encode_block(const Block& b) {
   std::ostringstream os;
   os << "B " << b.height << ' ' << b.digest().hex() << ' ' << b.prev_hash.hex() << ' ' << b.payload_hash.hex()
      << ' ' << format_real(b.timestamp) << ' ' << b.leader_id.value << ' ' << b.transactions.size();
   for (const auto& t : b.transactions) {
      os << ' ';
      encode_txn(os, t);
   }
   return os.str();
}

Digest parse_digest(std::string_view s) {
   auto d = Digest::from_hex(s);
   if (!d)
      throw Error(ErrorCode::parse_error, "bad digest '" + std::string(s) + "'");
   return *d;
}

} // namespace

std::string encode_dag(const ArtifactDag& dag) {
   std::ostringstream os;
   os << "qcchain-dag 1\n";
   for (const auto& a : dag.artifacts())
      os << "A " << a.id.value << ' ' << format_real(a.score) << ' ' << a.out_degree << ' '
         << format_real(a.created_at) << '\n';
   for (const auto& l : dag.links())
      os << "E " << l.source.value << ' ' << l.target.value << ' ' << format_real(l.weight) << ' '
         << l.link_id.value << '\n';
   return os.str();
}

ArtifactDag decode_dag(std::string_view body) {
   auto lines = lines_of(body);
   if (lines.empty() || lines[0] != "qcchain-dag 1")
      throw Error(ErrorCode::parse_error, "missing dag header");
   ArtifactDag                                    dag;
   std::vector<std::pair<ArtifactId, std::uint64_t>> degrees;
   for (std::size_t i = 1; i < lines.size(); ++i) {
      auto f = split(lines[i], ' ');
      if (f.size() == 5 && f[0] == "A") {
         ArtifactId id{parse_u64(f[1])};
         dag.insert_artifact(id, parse_real(f[2]), parse_real(f[4]));
         degrees.emplace_back(id, parse_u64(f[3]));
      } else if (f.size() == 5 && f[0] == "E") {
         auto expected = dag.links().size();
         dag.insert_link(ArtifactId{parse_u64(f[1])}, ArtifactId{parse_u64(f[2])}, parse_real(f[3]));
         if (parse_u64(f[4]) != expected)
            throw Error(ErrorCode::parse_error, "link ids must be sequential");
      } else {
         throw Error(ErrorCode::parse_error, "bad dag record on line " + std::to_string(i + 1));
      }
   }
   for (auto [id, deg] : degrees)
      if (dag.artifact(id).out_degree != deg)
         throw Error(ErrorCode::parse_error, "out_degree mismatch for " + to_string(id));
   return dag;
}

std::string encode_ledger(const Ledger& ledger) {
   std::string out = "qcchain-ledger 1\n";
   for (const auto& b : ledger.blocks()) {
      out += encode_block(*b);
      out += '\n';
   }
   return out;
}

Ledger decode_ledger(std::string_view body) {
   auto lines = lines_of(body);
   if (lines.empty() || lines[0] != "qcchain-ledger 1")
      throw Error(ErrorCode::parse_error, "missing ledger header");
   std::vector<Block> blocks;
   for (std::size_t i = 1; i < lines.size(); ++i) {
      auto f = split(lines[i], ' ');
      if (f.size() < 8 || f[0] != "B")
         throw Error(ErrorCode::parse_error, "bad block record on line " + std::to_string(i + 1));
      Block b;
      b.height       = parse_u64(f[1]);
      Digest stored  = parse_digest(f[2]);
      b.prev_hash    = parse_digest(f[3]);
      b.payload_hash = parse_digest(f[4]);
      b.timestamp    = parse_real(f[5]);
      b.leader_id    = NodeId{parse_u64(f[6])};
      auto n         = parse_u64(f[7]);
      if (f.size() != 8 + n)
         throw Error(ErrorCode::parse_error, "transaction count mismatch on line " + std::to_string(i + 1));
      for (std::size_t k = 0; k < n; ++k)
         b.transactions.push_back(decode_txn(f[8 + k]));
      if (b.digest() != stored)
         throw Error(ErrorCode::integrity_violation, "stored digest mismatch at height " + std::to_string(b.height));
      if (encode_block(b) != lines[i])
         throw Error(ErrorCode::parse_error, "non-canonical block record on line " + std::to_string(i + 1));
      blocks.push_back(std::move(b));
   }
   return Ledger::from_blocks(std::move(blocks));
}

std::string read_file(const std::string& path) {
   std::ifstream in(path, std::ios::binary);
   if (!in)
      throw Error(ErrorCode::io_error, "cannot open " + path);
   std::ostringstream ss;
   ss << in.rdbuf();
   return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
   std::ofstream out(path, std::ios::binary | std::ios::trunc);
   if (!out)
      throw Error(ErrorCode::io_error, "cannot write " + path);
   out.write(content.data(), static_cast<std::streamsize>(content.size()));
   if (!out)
      throw Error(ErrorCode::io_error, "write failed for " + path);
}

} // namespace qcchain
