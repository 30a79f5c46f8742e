#pragma once

#include <stdexcept>
#include <string>

namespace cgl {

struct ParseError : std::runtime_error {
    ParseError(const std::string& what, long line, long column = -1)
        : std::runtime_error(what), line(line), column(column) {}
    long line;
    long column;
};

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct BoundsError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

/// Raised by exhaustive oracles when the input exceeds their intended scale.
struct ScaleError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual(residual) {}
    double residual;
};

}  // namespace cgl
