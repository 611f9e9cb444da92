#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace snp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An argument violated an operation's stated precondition.
struct ContractViolation : Error {
    using Error::Error;
};

// A name was not found in a registry; message lists what is registered.
struct LookupError : Error {
    using Error::Error;
};

// A computation left the numeric domain (non-finite values, failed
// factorization). Message carries the offending context.
struct NumericalError : Error {
    using Error::Error;
};

// A backend could not be constructed or failed mid-call.
struct BackendError : Error {
    using Error::Error;
};

// File format / filesystem failures.
struct IoError : Error {
    using Error::Error;
};

// Config text could not be parsed or failed validation. line == 0 means
// the error is not tied to a specific line.
struct ConfigError : Error {
    int line = 0;
    explicit ConfigError(const std::string& msg, int line_no = 0)
        : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
          line(line_no) {}
};

// Dataset directory does not conform to the expected layout; carries the
// list of missing files so the CLI can print them.
struct DatasetError : Error {
    std::vector<std::string> missing;
    explicit DatasetError(const std::string& msg, std::vector<std::string> missing_files = {})
        : Error(msg), missing(std::move(missing_files)) {}
};

}  // namespace snp
