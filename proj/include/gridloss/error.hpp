#ifndef GRIDLOSS_ERROR_HPP
#define GRIDLOSS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridloss {

/// Failure categories shared by every module. The CLI reports them by
/// their upper-snake name (see code_name()).
enum class ErrorCode {
  shape_mismatch,
  domain_error,
  non_finite_operand,
  invalid_axis,
  pool_too_large,
  mask_too_large,
  non_scalar_loss,
  non_finite_gradient,
  out_of_range,
  non_binary_truth,
  hard_mode_as_loss,
  class_out_of_range,
  range_violation,
  missing_supplement_channel,
  empty_combination,
  unknown_loss,
  invalid_config,
  parse_error,
  io_error,
  gradient_blocked_loss,
  divergence_detected,
};

inline std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::shape_mismatch: return "SHAPE_MISMATCH";
    case ErrorCode::domain_error: return "DOMAIN_ERROR";
    case ErrorCode::non_finite_operand: return "NON_FINITE_OPERAND";
    case ErrorCode::invalid_axis: return "INVALID_AXIS";
    case ErrorCode::pool_too_large: return "POOL_TOO_LARGE";
    case ErrorCode::mask_too_large: return "MASK_TOO_LARGE";
    case ErrorCode::non_scalar_loss: return "NON_SCALAR_LOSS";
    case ErrorCode::non_finite_gradient: return "NON_FINITE_GRADIENT";
    case ErrorCode::out_of_range: return "OUT_OF_RANGE";
    case ErrorCode::non_binary_truth: return "NON_BINARY_TRUTH";
    case ErrorCode::hard_mode_as_loss: return "HARD_MODE_AS_LOSS";
    case ErrorCode::class_out_of_range: return "CLASS_OUT_OF_RANGE";
    case ErrorCode::range_violation: return "RANGE_VIOLATION";
    case ErrorCode::missing_supplement_channel: return "MISSING_SUPPLEMENT_CHANNEL";
    case ErrorCode::empty_combination: return "EMPTY_COMBINATION";
    case ErrorCode::unknown_loss: return "UNKNOWN_LOSS";
    case ErrorCode::invalid_config: return "INVALID_CONFIG";
    case ErrorCode::parse_error: return "PARSE_ERROR";
    case ErrorCode::io_error: return "IO_ERROR";
    case ErrorCode::gradient_blocked_loss: return "GRADIENT_BLOCKED_LOSS";
    case ErrorCode::divergence_detected: return "DIVERGENCE_DETECTED";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace gridloss

#endif  // GRIDLOSS_ERROR_HPP
