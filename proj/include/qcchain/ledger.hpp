#pragma once

#include <qcchain/dag.hpp>
#include <qcchain/digest.hpp>
#include <qcchain/ids.hpp>

#include <memory>
#include <optional>
#include <span>
#include <unordered_set>
#include <variant>
#include <vector>

namespace qcchain {

enum class TxnKind : std::uint8_t { endorsement = 1, score_update = 2, reputation_update = 3 };

struct EndorsementPayload {
   ArtifactId              artifact;
   std::vector<ArtifactId> endorsed;

   friend bool operator==(const EndorsementPayload&, const EndorsementPayload&) = default;
};

struct ScoreUpdatePayload {
   ArtifactId artifact;
   double     score{0.0};

   friend bool operator==(const ScoreUpdatePayload&, const ScoreUpdatePayload&) = default;
};

struct ReputationUpdatePayload {
   NodeId node;
   double delta{0.0};

   friend bool operator==(const ReputationUpdatePayload&, const ReputationUpdatePayload&) = default;
};

using TxnPayload = std::variant<EndorsementPayload, ScoreUpdatePayload, ReputationUpdatePayload>;

struct Transaction {
   TxnId      id;
   SimTime    timestamp{0.0};
   TxnPayload payload;

   TxnKind kind() const { return static_cast<TxnKind>(payload.index() + 1); }

   const EndorsementPayload* endorsement() const { return std::get_if<EndorsementPayload>(&payload); }

   void encode(ByteWriter& w) const;

   friend bool operator==(const Transaction&, const Transaction&) = default;
};

Transaction make_endorsement(TxnId id, SimTime ts, ArtifactId artifact, std::vector<ArtifactId> endorsed);

/// Structural validation of an endorsement against a DAG: the payload is an
/// endorsement, the new artifact is absent, every target exists and no
/// target repeats. Throws Error(invalid_transaction / unknown_artifact /
/// duplicate_target / duplicate_artifact).
void validate_endorsement(const Transaction& txn, const ArtifactDag& dag);

Digest payload_digest(std::span<const Transaction> txns);

struct Block {
   std::uint64_t            height{0};
   Digest                   prev_hash;
   Digest                   payload_hash;
   SimTime                  timestamp{0.0};
   NodeId                   leader_id;
   std::vector<Transaction> transactions;

   /// Digest over the canonical header encoding (which covers payload_hash).
   Digest digest() const;

   friend bool operator==(const Block&, const Block&) = default;
};

/// Hash-chained block ledger. Committed blocks are immutable and may be
/// shared between ledgers; the ledger remembers how far it has verified so
/// appends stay O(1) unless a block is replaced.
class Ledger {
public:
   std::size_t  size() const { return blocks_.size(); }
   bool         empty() const { return blocks_.empty(); }
   const Block& block(std::size_t height) const { return *blocks_.at(height); }
   const Block& tip() const { return *blocks_.back(); }
   Digest       tip_digest() const;

   std::span<const std::shared_ptr<const Block>> blocks() const { return blocks_; }

   /// Appends an already-built block after checking it links onto the tip.
   /// Throws Error(integrity_violation) if the chain or the block is broken.
   void append(std::shared_ptr<const Block> block);

   /// Like append, but trusts the block's payload hash. For a block object
   /// already verified once and shared between many ledgers.
   void append_checked(std::shared_ptr<const Block> block);

   /// Wraps blocks loaded from storage without checking them; run
   /// verify_chain before trusting the result.
   static Ledger from_blocks(std::vector<Block> blocks);

   /// Overwrites a committed block. Only meant for importers and tamper
   /// experiments; it invalidates the verified prefix.
   void replace_block(std::size_t height, Block block);

   /// Next block that would extend this ledger (not appended).
   Block next_block(std::vector<Transaction> txns, NodeId leader, SimTime timestamp) const;

   bool verify() const;

   friend bool operator==(const Ledger& a, const Ledger& b);

private:
   void ensure_verified();

   std::vector<std::shared_ptr<const Block>> blocks_;
   std::size_t                               verified_{0};
   Digest                                    tip_digest_;
   // Tip digest as of the last append; lets verify() catch a rewritten tip.
   std::optional<Digest>                     anchor_;
};

/// Builds and appends the next block. Refuses to append onto a chain that
/// fails verification.
const Block& append_block(Ledger& ledger, std::vector<Transaction> txns, NodeId leader, SimTime timestamp);

/// True iff every block's payload hash and previous-hash link check out.
bool verify_chain(const Ledger& ledger);

} // namespace qcchain
