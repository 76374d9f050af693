#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>

namespace qcchain {

/// Integer identifier tagged with the domain it belongs to, so artifact and
/// node ids cannot be mixed up.
template <typename Tag>
struct StrongId {
   std::uint64_t value{0};

   constexpr StrongId() = default;
   constexpr explicit StrongId(std::uint64_t v) : value(v) {}

   friend constexpr auto operator<=>(const StrongId&, const StrongId&) = default;

   friend std::ostream& operator<<(std::ostream& os, const StrongId& id) { return os << id.value; }
};

struct ArtifactTag {};
struct NodeTag {};
struct TxnTag {};
struct LinkTag {};

using ArtifactId = StrongId<ArtifactTag>;
using NodeId     = StrongId<NodeTag>;
using TxnId      = StrongId<TxnTag>;
using LinkId     = StrongId<LinkTag>;

/// Simulated time in seconds. Wall-clock time never enters the model.
using SimTime = double;

inline std::string to_string(ArtifactId id) { return "a" + std::to_string(id.value); }
inline std::string to_string(NodeId id) { return "n" + std::to_string(id.value); }

} // namespace qcchain

template <typename Tag>
struct std::hash<qcchain::StrongId<Tag>> {
   std::size_t operator()(const qcchain::StrongId<Tag>& id) const noexcept {
      return std::hash<std::uint64_t>{}(id.value);
   }
};
