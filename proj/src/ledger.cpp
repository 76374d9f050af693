#include <qcchain/error.hpp>
#include <qcchain/ledger.hpp>

#include <algorithm>

namespace qcchain {

void Transaction::encode(ByteWriter& w) const {
   w.u8(static_cast<std::uint8_t>(kind())).u64(id.value).f64(timestamp);
   std::visit(
      [&](const auto& p) {
         using T = std::decay_t<decltype(p)>;
         if constexpr (std::is_same_v<T, EndorsementPayload>) {
            w.u64(p.artifact.value).u32(static_cast<std::uint32_t>(p.endorsed.size()));
            for (auto t : p.endorsed)
               w.u64(t.value);
         } else if constexpr (std::is_same_v<T, ScoreUpdatePayload>) {
            w.u64(p.artifact.value).f64(p.score);
         } else {
            w.u64(p.node.value).f64(p.delta);
         }
      },
      payload);
}

Transaction make_endorsement(TxnId id, SimTime ts, ArtifactId artifact, std::vector<ArtifactId> endorsed) {
   return Transaction{id, ts, EndorsementPayload{artifact, std::move(endorsed)}};
}

void validate_endorsement(const Transaction& txn, const ArtifactDag& dag) {
   const auto* e = txn.endorsement();
   if (e == nullptr)
      throw Error(ErrorCode::invalid_transaction, "transaction is not an endorsement");
   if (dag.contains(e->artifact))
      throw Error(ErrorCode::duplicate_artifact, "artifact " + to_string(e->artifact) + " already exists");
   auto targets = e->endorsed;
   std::sort(targets.begin(), targets.end());
   if (std::adjacent_find(targets.begin(), targets.end()) != targets.end())
      throw Error(ErrorCode::duplicate_target, "endorsement lists a target twice");
   for (auto t : targets) {
      if (t == e->artifact)
         throw Error(ErrorCode::invalid_transaction, "artifact endorses itself");
      if (!dag.contains(t))
         throw Error(ErrorCode::unknown_artifact, "endorsed artifact " + to_string(t) + " is unknown");
   }
}

Digest payload_digest(std::span<const Transaction> txns) {
   ByteWriter w;
   w.u32(static_cast<std::uint32_t>(txns.size()));
   for (const auto& t : txns)
      t.encode(w);
   return w.finish();
}

Digest Block::digest() const {
   ByteWriter w;
   w.u64(height).digest(prev_hash).digest(payload_hash).f64(timestamp).u64(leader_id.value);
   return w.finish();
}

namespace {

bool block_links(const Block& b, std::size_t height, const Digest& prev) {
   return b.height == height && b.prev_hash == prev && payload_digest(b.transactions) == b.payload_hash;
}

} // namespace

Digest Ledger::tip_digest() const {
   if (blocks_.empty())
      return Digest::zero();
   if (verified_ == blocks_.size())
      return tip_digest_;
   return blocks_.back()->digest();
}

void Ledger::ensure_verified() {
   Digest prev = verified_ == 0 ? Digest::zero() : tip_digest_;
   for (std::size_t h = verified_; h < blocks_.size(); ++h) {
      if (!block_links(*blocks_[h], h, prev))
         throw Error(ErrorCode::integrity_violation, "ledger integrity violated at height " + std::to_string(h));
      prev = blocks_[h]->digest();
      verified_   = h + 1;
      tip_digest_ = prev;
   }
   if (anchor_ && !blocks_.empty() && tip_digest_ != *anchor_)
      throw Error(ErrorCode::integrity_violation, "ledger tip differs from the committed tip");
}

void Ledger::append(std::shared_ptr<const Block> block) {
   if (!block)
      throw Error(ErrorCode::invalid_argument, "null block");
   ensure_verified();
   if (!block_links(*block, blocks_.size(), tip_digest()))
      throw Error(ErrorCode::integrity_violation, "block does not extend the ledger tip");
   tip_digest_ = block->digest();
   anchor_     = tip_digest_;
   blocks_.push_back(std::move(block));
   verified_ = blocks_.size();
}

void Ledger::append_checked(std::shared_ptr<const Block> block) {
   if (!block)
      throw Error(ErrorCode::invalid_argument, "null block");
   ensure_verified();
   if (block->height != blocks_.size() || block->prev_hash != tip_digest())
      throw Error(ErrorCode::integrity_violation, "block does not extend the ledger tip");
   tip_digest_ = block->digest();
   anchor_     = tip_digest_;
   blocks_.push_back(std::move(block));
   verified_ = blocks_.size();
}

Ledger Ledger::from_blocks(std::vector<Block> blocks) {
   Ledger l;
   for (auto& b : blocks)
      l.blocks_.push_back(std::make_shared<const Block>(std::move(b)));
   return l;
}

void Ledger::replace_block(std::size_t height, Block block) {
   blocks_.at(height) = std::make_shared<const Block>(std::move(block));
   verified_          = 0;
}

Block Ledger::next_block(std::vector<Transaction> txns, NodeId leader, SimTime timestamp) const {
   Block b;
   b.height       = blocks_.size();
   b.prev_hash    = tip_digest();
   b.payload_hash = payload_digest(txns);
   b.timestamp    = timestamp;
   b.leader_id    = leader;
   b.transactions = std::move(txns);
   return b;
}

bool Ledger::verify() const {
   Digest prev = Digest::zero();
   for (std::size_t h = 0; h < blocks_.size(); ++h) {
      if (!block_links(*blocks_[h], h, prev))
         return false;
      prev = blocks_[h]->digest();
   }
   return !anchor_ || blocks_.empty() || prev == *anchor_;
}

bool operator==(const Ledger& a, const Ledger& b) {
   if (a.blocks_.size() != b.blocks_.size())
      return false;
   for (std::size_t i = 0; i < a.blocks_.size(); ++i)
      if (a.blocks_[i] != b.blocks_[i] && !(*a.blocks_[i] == *b.blocks_[i]))
         return false;
   return true;
}

const Block& append_block(Ledger& ledger, std::vector<Transaction> txns, NodeId leader, SimTime timestamp) {
   // append() re-verifies any unverified prefix and throws on a broken chain.
   ledger.append(std::make_shared<const Block>(ledger.next_block(std::move(txns), leader, timestamp)));
   return ledger.tip();
}

bool verify_chain(const Ledger& ledger) { return ledger.verify(); }

} // namespace qcchain
