#pragma once

#include <stdexcept>
#include <string>

namespace boxkg {

// Bad shapes, bad ids in files, invalid configuration values.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Out-of-domain numeric input (log of non-positive, division by ~0).
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Conditional probability with a denominator volume below the floor.
struct degenerate_box_error : numeric_error {
    explicit degenerate_box_error(const std::string& msg) : numeric_error(msg) {}
};

// Malformed input file; message carries the line number.
struct parse_error : std::runtime_error {
    explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Entity/relation id or name that does not resolve.
struct lookup_error : std::runtime_error {
    explicit lookup_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace boxkg
