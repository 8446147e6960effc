#include "survtk/error.hpp"

namespace survtk {

const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return "config error";
        case ErrorCategory::schema: return "schema error";
        case ErrorCategory::data: return "data error";
        case ErrorCategory::fit: return "fit error";
        case ErrorCategory::numeric: return "numeric error";
        case ErrorCategory::metric_undefined: return "metric undefined";
        case ErrorCategory::io: return "io error";
    }
    return "error";
}

} // namespace survtk
