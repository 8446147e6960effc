#pragma once

#include <stdexcept>
#include <string>

namespace survtk {

// Failure categories, each with a stable process exit code so shell callers
// can dispatch on the kind of failure without parsing messages.
enum class ErrorCategory {
    config = 2,           // bad or contradictory configuration
    schema = 3,           // input file does not match the expected layout
    data = 4,             // values out of range, impossible records
    fit = 5,              // a model failed to converge or degenerated
    numeric = 6,          // overflow / NaN where none is tolerated
    metric_undefined = 7, // a requested metric has no value on this input
    io = 8,               // filesystem problems
};

const char* category_name(ErrorCategory c);

inline int exit_code(ErrorCategory c) { return static_cast<int>(c); }

class Error : public std::runtime_error {
public:
    Error(ErrorCategory cat, const std::string& msg)
        : std::runtime_error(std::string(category_name(cat)) + ": " + msg), cat_(cat) {}

    ErrorCategory category() const { return cat_; }

private:
    ErrorCategory cat_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorCategory::config, m) {}
};
struct SchemaError : Error {
    explicit SchemaError(const std::string& m) : Error(ErrorCategory::schema, m) {}
};
struct DataError : Error {
    explicit DataError(const std::string& m) : Error(ErrorCategory::data, m) {}
};
struct FitError : Error {
    explicit FitError(const std::string& m) : Error(ErrorCategory::fit, m) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& m) : Error(ErrorCategory::numeric, m) {}
};
struct MetricUndefinedError : Error {
    explicit MetricUndefinedError(const std::string& m) : Error(ErrorCategory::metric_undefined, m) {}
};
struct IoError : Error {
    explicit IoError(const std::string& m) : Error(ErrorCategory::io, m) {}
};

} // namespace survtk
