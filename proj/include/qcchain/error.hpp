#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qcchain {

enum class ErrorCode {
   duplicate_artifact,
   unknown_artifact,
   duplicate_target,
   cycle_detected,
   integrity_violation,
   invalid_transaction,
   duplicate_transaction,
   already_propagated,
   not_converged,
   invalid_argument,
   insufficient_proposals,
   mixed_proposals,
   parse_error,
   infeasible_scenario,
   io_error,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the library is reported as an Error carrying
/// a machine-readable code.
class Error : public std::runtime_error {
public:
   Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

   ErrorCode code() const noexcept { return code_; }

private:
   ErrorCode code_;
};

} // namespace qcchain
