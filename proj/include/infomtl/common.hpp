#pragma once

#include <stdexcept>
#include <string>

namespace infomtl {

// Invalid arguments, shape mismatches, schema violations.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures: NaN/Inf in a forward op, divergence, domain errors.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// I/O and serialization failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace infomtl

#define IMTL_CHECK(cond, msg)                          \
  do {                                                 \
    if (!(cond)) throw ::infomtl::ConfigError(msg);    \
  } while (0)

#define IMTL_CHECK_NUM(cond, msg)                      \
  do {                                                 \
    if (!(cond)) throw ::infomtl::NumericError(msg);   \
  } while (0)
