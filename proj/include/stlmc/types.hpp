#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace stlmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorCode {
  dimension_mismatch,
  invalid_argument,
  undefined_operation,
  non_finite,
  precondition,
  reducible_chain,
  rejection_ceiling,
  schema,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers (and the CLI)
// can map it to a report or an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require_dim(const Vec& x, Eigen::Index d, const char* where) {
  if (x.size() != d) {
    throw Error(ErrorCode::dimension_mismatch,
                std::string(where) + ": expected dimension " + std::to_string(d) +
                    ", got " + std::to_string(x.size()));
  }
}

}  // namespace stlmc
